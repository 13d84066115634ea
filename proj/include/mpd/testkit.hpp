#pragma once

// The end-to-end martingale pair test: statistic n^(gamma/2) MPD against
// the simulated (1-alpha) critical value, rejecting on strict inequality.
// Also bandwidth selection, power curves, convergence studies and the
// bandwidth-scaling probe.

#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "mpd/baselines.hpp"
#include "mpd/estimator.hpp"
#include "mpd/generators.hpp"
#include "mpd/limit_sim.hpp"

namespace mpd {

inline nlohmann::json grid_to_json(const GridSpec& g) {
    return nlohmann::json{{"lower", g.lower}, {"upper", g.upper}, {"step", g.step}};
}

inline nlohmann::json config_to_json(const MpdConfig& cfg) {
    return nlohmann::json{{"gamma", cfg.gamma}, {"kernel", cfg.kernel}, {"grid", grid_to_json(cfg.grid)}};
}

struct TestReport {
    double statistic = 0.0;
    double critical_value = 0.0;
    double alpha = 0.0;
    bool reject = false;
    std::size_t n = 0;
    MpdConfig cfg;
    std::size_t n_sims = 0;
    std::uint64_t seed = 0;
    SimMethod method = SimMethod::multiplier;
    std::string cv_source = "plug_in";  // plug_in | reference
    std::optional<double> sigma_selected;
    double truncation_mass = 0.0;

    nlohmann::json to_json() const {
        nlohmann::json j;
        j["statistic"] = statistic;
        j["critical_value"] = critical_value;
        j["alpha"] = alpha;
        j["reject"] = reject;
        j["n"] = n;
        j["config"] = config_to_json(cfg);
        j["n_sims"] = n_sims;
        j["seed"] = seed;
        j["method"] = to_string(method);
        j["cv_source"] = cv_source;
        if (sigma_selected) j["sigma_selected"] = *sigma_selected;
        j["truncation_mass"] = truncation_mass;
        return j;
    }
};

/// Algorithm: compute the statistic on the sample, simulate the limit law
/// (plug-in on the same sample unless a reference coupling is supplied),
/// take the (1-alpha) quantile, reject iff statistic > critical value.
inline TestReport run_test(const PairedSample& sample, const MpdConfig& cfg, double alpha,
                           std::size_t n_sims, std::uint64_t seed,
                           SimMethod method = SimMethod::multiplier,
                           const PairedSample* reference = nullptr) {
    if (!(alpha > 0.0 && alpha < 1.0)) throw std::invalid_argument("run_test: alpha outside (0,1)");
    const MpdEvaluation eval = evaluate_smoothed_mpd(sample, cfg);
    TestReport rep;
    rep.n = sample.size();
    rep.statistic = std::pow(static_cast<double>(rep.n), cfg.gamma / 2.0) * eval.mpd;
    rep.truncation_mass = eval.truncation_mass;
    const PairedSample& cv_sample = reference ? *reference : sample;
    const LimitDistribution ld = simulate_limit(cv_sample, cfg, n_sims, method, seed);
    rep.critical_value = critical_value(ld, alpha);
    rep.alpha = alpha;
    rep.reject = rep.statistic > rep.critical_value;
    rep.cfg = cfg;
    rep.n_sims = n_sims;
    rep.seed = seed;
    rep.method = method;
    rep.cv_source = reference ? "reference" : "plug_in";
    return rep;
}

/// The gamma=1 statistic sqrt(n) MPD at bandwidth sigma, evaluated through
/// the change of variables u = x/sigma: identical to integrating the
/// sigma-kernel field over sigma * [lo, hi], so large bandwidths are not
/// clipped by a fixed grid. Exact for gamma = 1.
inline double scaled_statistic_gamma1(const PairedSample& sample, const KernelSpec& kernel,
                                      double sigma, const GridSpec& grid) {
    if (!(sigma > 0.0)) throw std::invalid_argument("sigma must be > 0");
    PairedSample scaled;
    scaled.d = sample.d;
    scaled.xs.reserve(sample.xs.size());
    scaled.ys.reserve(sample.ys.size());
    for (std::size_t i = 0; i < sample.xs.size(); ++i) {
        const double x = sample.xs[i] / sigma;
        scaled.xs.push_back(x);
        scaled.ys.push_back(x + (sample.ys[i] - sample.xs[i]));
    }
    MpdConfig cfg;
    cfg.gamma = 1.0;
    cfg.kernel = kernel;
    cfg.kernel.sigma = 1.0;
    cfg.grid = grid;
    return test_statistic(scaled, cfg);
}

struct BandwidthSelection {
    double sigma = 1.0;
    double statistic = 0.0;
};

/// Step-1 bandwidth choice: the candidate sigma >= 1 maximizing the
/// gamma=1 statistic sqrt(n) MPD, ties broken toward the smallest sigma.
inline BandwidthSelection select_bandwidth(const PairedSample& sample, const MpdConfig& cfg_base,
                                           std::vector<double> sigma_candidates) {
    if (sigma_candidates.empty()) throw std::invalid_argument("select_bandwidth: empty candidate set");
    for (double s : sigma_candidates)
        if (!(s >= 1.0)) throw std::invalid_argument("select_bandwidth: candidates must be >= 1");
    std::sort(sigma_candidates.begin(), sigma_candidates.end());
    BandwidthSelection best;
    best.sigma = sigma_candidates.front();
    best.statistic = -std::numeric_limits<double>::infinity();
    for (double s : sigma_candidates) {
        const double stat = scaled_statistic_gamma1(sample, cfg_base.kernel, s, cfg_base.grid);
        if (stat > best.statistic) {
            best.sigma = s;
            best.statistic = stat;
        }
    }
    return best;
}

struct PowerCurve {
    std::vector<double> perturbation_levels;
    std::vector<double> rejection_rates;
    std::vector<double> mean_statistics;
    int replications = 0;
};

/// Rejection rate and mean statistic per perturbation level. Levels map to
/// epsilon for the shift generator and to the order k for hermite.
inline PowerCurve power_curve(GeneratorId generator, const std::vector<double>& levels,
                              std::size_t n, int replications, const MpdConfig& cfg, double alpha,
                              std::size_t n_sims, std::uint64_t seed) {
    if (replications < 1) throw std::invalid_argument("power_curve: replications must be >= 1");
    if (generator != GeneratorId::shift && generator != GeneratorId::hermite)
        throw std::invalid_argument("power_curve: generator does not take a perturbation level");
    PowerCurve out;
    out.perturbation_levels = levels;
    out.replications = replications;
    for (std::size_t li = 0; li < levels.size(); ++li) {
        std::vector<double> stats(replications);
        std::vector<char> rejected(replications);
        parallel_for(0, replications, [&](std::uint64_t r) {
            GeneratorSpec g;
            g.id = generator;
            if (generator == GeneratorId::shift)
                g.epsilon = levels[li];
            else
                g.k = static_cast<int>(std::llround(levels[li]));
            g.seed = mix_seed(mix_seed(seed, li), r);
            const PairedSample s = generate(g, n);
            const TestReport rep =
                run_test(s, cfg, alpha, n_sims, mix_seed(g.seed, 0x5153), SimMethod::multiplier);
            stats[r] = rep.statistic;
            rejected[r] = rep.reject ? 1 : 0;
        });
        double mean = 0.0, rate = 0.0;
        for (int r = 0; r < replications; ++r) {
            mean += stats[r];
            rate += rejected[r];
        }
        out.mean_statistics.push_back(mean / replications);
        out.rejection_rates.push_back(rate / replications);
    }
    return out;
}

struct ConvergenceTable {
    std::vector<std::size_t> sizes;
    std::vector<double> mean_smoothed_mpd;
    std::vector<double> mean_adapted_mpd;  // empty unless requested
    double smoothed_slope = std::numeric_limits<double>::quiet_NaN();
    double adapted_slope = std::numeric_limits<double>::quiet_NaN();
    bool degenerate = false;  // some mean vanished; slopes undefined
};

namespace detail {

inline double loglog_slope(const std::vector<std::size_t>& ns, const std::vector<double>& means,
                           bool& degenerate) {
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    const std::size_t m = ns.size();
    for (std::size_t i = 0; i < m; ++i) {
        if (!(means[i] > 0.0) || !std::isfinite(means[i])) {
            degenerate = true;
            return std::numeric_limits<double>::quiet_NaN();
        }
        const double x = std::log(static_cast<double>(ns[i])), y = std::log(means[i]);
        sx += x;
        sy += y;
        sxx += x * x;
        sxy += x * y;
    }
    const double dm = static_cast<double>(m);
    return (dm * sxy - sx * sy) / (dm * sxx - sx * sx);
}

}  // namespace detail

/// Mean smoothed (and optionally adapted) MPD across sample sizes, with
/// least-squares slopes of log(mean) against log(n). The adapted branch
/// maps X and Y by the common affine map pinning the X-range to [0,1],
/// so partition borders align with the X support at every partition
/// depth; Y then snaps on the extended lattice.
inline ConvergenceTable convergence_study(GeneratorId generator, const std::vector<std::size_t>& sizes,
                                          int trials, const MpdConfig& cfg, bool include_adapted,
                                          std::uint64_t seed, double adapted_r = 0.0) {
    if (sizes.size() < 2) throw std::invalid_argument("convergence_study: need at least 2 sizes");
    for (std::size_t i = 1; i < sizes.size(); ++i)
        if (sizes[i] <= sizes[i - 1])
            throw std::invalid_argument("convergence_study: sizes must be ascending");
    if (trials < 1) throw std::invalid_argument("convergence_study: trials must be >= 1");

    ConvergenceTable out;
    out.sizes = sizes;
    AdaptedMpdConfig acfg;
    acfg.gamma = cfg.gamma;
    acfg.r_exponent = adapted_r;
    acfg.y_on_extended_lattice = true;
    for (std::size_t si = 0; si < sizes.size(); ++si) {
        std::vector<double> smoothed(trials), adapted(trials, 0.0);
        parallel_for(0, trials, [&](std::uint64_t t) {
            GeneratorSpec g;
            g.id = generator;
            g.dims = cfg.kernel.dim;
            g.seed = mix_seed(mix_seed(seed, si), t);
            const PairedSample s = generate(g, sizes[si]);
            smoothed[t] = smoothed_mpd(s, cfg);
            if (include_adapted)
                adapted[t] =
                    adapted_empirical_mpd(rescale_to_unit_cube(s, true).sample, acfg);
        });
        double ms = 0, ma = 0;
        for (int t = 0; t < trials; ++t) {
            ms += smoothed[t];
            ma += adapted[t];
        }
        out.mean_smoothed_mpd.push_back(ms / trials);
        if (include_adapted) out.mean_adapted_mpd.push_back(ma / trials);
    }
    out.smoothed_slope = detail::loglog_slope(sizes, out.mean_smoothed_mpd, out.degenerate);
    if (include_adapted)
        out.adapted_slope = detail::loglog_slope(sizes, out.mean_adapted_mpd, out.degenerate);
    return out;
}

enum class SigmaRule { subcritical, supercritical };

struct ProbeTable {
    std::vector<std::size_t> n_values;
    std::vector<double> sigma_values;
    std::vector<double> mean_statistics;
    double growth_slope = std::numeric_limits<double>::quiet_NaN();
    double max_over_median = std::numeric_limits<double>::quiet_NaN();
};

/// Bandwidth-scaling probe: statistic growth under sigma_n = n^(1/(4k))
/// (subcritical; grows like n^(1/2) / sigma_n^k under the order-k
/// alternative) versus sigma_n = n^(1/k) (supercritical; bounded).
/// Data come from the bounded generator; default truncated Hermite-k.
inline ProbeTable bandwidth_scaling_probe(int k, const std::vector<std::size_t>& n_values,
                                          SigmaRule rule, int trials, std::uint64_t seed,
                                          std::optional<GeneratorSpec> data_spec = std::nullopt) {
    if (k < 1) throw std::invalid_argument("bandwidth_scaling_probe: k must be >= 1");
    if (n_values.size() < 2) throw std::invalid_argument("bandwidth_scaling_probe: need >= 2 sizes");
    if (trials < 1) throw std::invalid_argument("bandwidth_scaling_probe: trials must be >= 1");

    KernelSpec kernel;  // poly_tail, rho 5, dim 1
    const GridSpec grid = GridSpec::uniform(1, -30.0, 30.0, 0.5);
    ProbeTable out;
    out.n_values = n_values;
    for (std::size_t ni = 0; ni < n_values.size(); ++ni) {
        const double n = static_cast<double>(n_values[ni]);
        const double exponent = rule == SigmaRule::subcritical ? 1.0 / (4.0 * k) : 1.0 / k;
        const double sigma = std::pow(n, exponent);
        std::vector<double> stats(trials);
        parallel_for(0, trials, [&](std::uint64_t t) {
            GeneratorSpec g;
            if (data_spec) {
                g = *data_spec;
            } else {
                g.id = GeneratorId::hermite;
                g.k = k;
                g.bounded = true;
            }
            g.seed = mix_seed(mix_seed(seed, ni), t);
            const PairedSample s = generate(g, n_values[ni]);
            stats[t] = scaled_statistic_gamma1(s, kernel, sigma, grid);
        });
        double mean = 0.0;
        for (int t = 0; t < trials; ++t) mean += stats[t];
        out.sigma_values.push_back(sigma);
        out.mean_statistics.push_back(mean / trials);
    }
    bool degenerate = false;
    out.growth_slope = detail::loglog_slope(out.n_values, out.mean_statistics, degenerate);
    std::vector<double> sorted = out.mean_statistics;
    std::sort(sorted.begin(), sorted.end());
    const double median = sorted[sorted.size() / 2];
    out.max_over_median = median > 0.0 ? sorted.back() / median
                                       : std::numeric_limits<double>::quiet_NaN();
    return out;
}

}  // namespace mpd
