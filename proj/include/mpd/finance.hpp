#pragma once

// Heston-model simulation (tamed Euler with full truncation of the
// variance, stock stepped in log space), Monte-Carlo option pricing, and
// the no-arbitrage audit pairs
//   (price at t given the path state, discounted realized payoff)
// which form a martingale coupling exactly when the pricer agrees with
// the simulated dynamics.

#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "mpd/grid.hpp"
#include "mpd/kernel.hpp"
#include "mpd/mathutil.hpp"
#include "mpd/parallel.hpp"
#include "mpd/rng.hpp"
#include "mpd/sample.hpp"

namespace mpd {

struct HestonParams {
    double x0 = 1.0;     // initial stock
    double r = 0.025;    // rate per unit time
    double v0 = 0.04;    // initial variance
    double kappa = 0.78; // mean reversion speed
    double mu = 0.11;    // long-run variance
    double eta = 0.68;   // vol of vol
    double corr = 0.044; // Brownian correlation

    void validate() const {
        if (!(x0 > 0.0)) throw std::invalid_argument("heston: x0 must be > 0");
        if (!(v0 >= 0.0)) throw std::invalid_argument("heston: v0 must be >= 0");
        if (!(kappa > 0.0)) throw std::invalid_argument("heston: kappa must be > 0");
        // mu = 0 admits the deterministic zero-variance world
        if (!(mu >= 0.0)) throw std::invalid_argument("heston: mu must be >= 0");
        if (!(eta >= 0.0)) throw std::invalid_argument("heston: eta must be >= 0");
        if (!(corr >= -1.0 && corr <= 1.0)) throw std::invalid_argument("heston: corr must lie in [-1,1]");
    }
};

inline void to_json(nlohmann::json& j, const HestonParams& p) {
    j = nlohmann::json{{"x0", p.x0},       {"r", p.r},     {"v0", p.v0}, {"kappa", p.kappa},
                       {"mu", p.mu},       {"eta", p.eta}, {"corr", p.corr}};
}

inline void from_json(const nlohmann::json& j, HestonParams& p) {
    p.x0 = j.value("x0", p.x0);
    p.r = j.value("r", p.r);
    p.v0 = j.value("v0", p.v0);
    p.kappa = j.value("kappa", p.kappa);
    p.mu = j.value("mu", p.mu);
    p.eta = j.value("eta", p.eta);
    p.corr = j.value("corr", p.corr);
}

struct OptionSpec {
    double strike = 1.0;
    double maturity = 1.0;  // in time units; must be a multiple of the step

    void validate() const {
        // strike 0 prices the discounted forward; useful as a sanity limit
        if (!(strike >= 0.0)) throw std::invalid_argument("option: strike must be >= 0");
        if (!(maturity > 0.0)) throw std::invalid_argument("option: maturity must be > 0");
    }
};

struct HestonPaths {
    std::size_t n_paths = 0;
    std::size_t n_steps = 0;  // steps per path; n_steps+1 states stored
    double dt = 0.0;
    std::vector<double> s;  // row-major n_paths x (n_steps+1)
    std::vector<double> v;

    double stock(std::size_t path, std::size_t step) const { return s[path * (n_steps + 1) + step]; }
    double variance(std::size_t path, std::size_t step) const { return v[path * (n_steps + 1) + step]; }
};

namespace detail {

inline double tame(double a) { return a / (1.0 + std::fabs(a)); }

inline void heston_step(const HestonParams& p, double dt, double root_dt, double& log_s, double& v,
                        RngStream& rng) {
    const double z1 = rng.normal();
    const double z2 = rng.normal();
    const double dw = root_dt * z1;
    const double db = root_dt * (p.corr * z1 + std::sqrt(1.0 - p.corr * p.corr) * z2);
    const double vp = std::max(v, 0.0);
    log_s += tame((p.r - 0.5 * vp) * dt) + std::sqrt(vp) * dw;
    v += tame(p.kappa * (p.mu - vp) * dt) + p.eta * std::sqrt(vp) * db;
}

}  // namespace detail

/// Simulates n_paths trajectories over [0, horizon]; stream per path.
inline HestonPaths simulate_heston(const HestonParams& params, double horizon, int steps_per_unit,
                                   std::size_t n_paths, std::uint64_t seed) {
    params.validate();
    if (steps_per_unit < 1) throw std::invalid_argument("simulate_heston: steps_per_unit must be >= 1");
    if (n_paths < 1) throw std::invalid_argument("simulate_heston: n_paths must be >= 1");
    if (!(horizon > 0.0)) throw std::invalid_argument("simulate_heston: horizon must be > 0");
    HestonPaths out;
    out.n_paths = n_paths;
    out.n_steps = static_cast<std::size_t>(std::llround(horizon * steps_per_unit));
    if (out.n_steps < 1) throw std::invalid_argument("simulate_heston: horizon shorter than one step");
    out.dt = 1.0 / steps_per_unit;
    out.s.resize(n_paths * (out.n_steps + 1));
    out.v.resize(n_paths * (out.n_steps + 1));
    const double root_dt = std::sqrt(out.dt);
    parallel_for(0, n_paths, [&](std::uint64_t i) {
        RngStream rng(seed, i);
        double log_s = std::log(params.x0), v = params.v0;
        out.s[i * (out.n_steps + 1)] = params.x0;
        out.v[i * (out.n_steps + 1)] = v;
        for (std::size_t k = 1; k <= out.n_steps; ++k) {
            detail::heston_step(params, out.dt, root_dt, log_s, v, rng);
            out.s[i * (out.n_steps + 1) + k] = std::exp(log_s);
            out.v[i * (out.n_steps + 1) + k] = v;
        }
    });
    return out;
}

/// e^{-r(T-t)} mean over n_inner restarted paths of (S_T - K)_+, the
/// inner simulation starting from the supplied state (s_t, v_t).
inline double price_option_mc(const HestonParams& params, double s_t, double v_t, double t,
                              const OptionSpec& option, std::size_t n_inner, int steps_per_unit,
                              std::uint64_t seed) {
    params.validate();
    option.validate();
    if (!(t < option.maturity)) throw std::invalid_argument("price_option_mc: requires t < T");
    if (n_inner < 1) throw std::invalid_argument("price_option_mc: n_inner must be >= 1");
    const double tau = option.maturity - t;
    const auto n_steps = static_cast<std::size_t>(std::llround(tau * steps_per_unit));
    if (n_steps < 1) throw std::invalid_argument("price_option_mc: maturity gap shorter than one step");
    const double dt = 1.0 / steps_per_unit;
    const double root_dt = std::sqrt(dt);
    std::vector<double> payoff(n_inner);
    parallel_for(0, n_inner, [&](std::uint64_t p) {
        RngStream rng(seed, p);
        double log_s = std::log(s_t), v = v_t;
        for (std::size_t k = 0; k < n_steps; ++k)
            detail::heston_step(params, dt, root_dt, log_s, v, rng);
        payoff[p] = std::max(std::exp(log_s) - option.strike, 0.0);
    });
    double mean = 0.0;
    for (double x : payoff) mean += x;
    mean /= static_cast<double>(n_inner);
    return std::exp(-params.r * tau) * mean;
}

/// Black-Scholes call price with flat volatility.
inline double bs_price(double s, double strike, double r, double vol, double tau) {
    if (!(tau > 0.0)) throw std::invalid_argument("bs_price: tau must be > 0");
    if (!(vol > 0.0)) {
        return std::max(s - strike * std::exp(-r * tau), 0.0);
    }
    const double sd = vol * std::sqrt(tau);
    const double d1 = (std::log(s / strike) + (r + 0.5 * vol * vol) * tau) / sd;
    const double d2 = d1 - sd;
    return s * normal_cdf(d1) - strike * std::exp(-r * tau) * normal_cdf(d2);
}

struct PricerSpec {
    enum class Kind { heston_consistent, misspecified_bs };
    Kind kind = Kind::heston_consistent;
    double bs_vol = 0.6;  // misspecified_bs only

    static PricerSpec consistent() { return {}; }
    static PricerSpec misspecified(double vol) { return {Kind::misspecified_bs, vol}; }
};

/// One pair per outer path: X_i the pricer's value at the path's time-t
/// state, Y_i the discounted payoff realized along the same path.
inline PairedSample build_audit_pairs(const HestonPaths& paths, const HestonParams& params,
                                      double t, const OptionSpec& option, std::size_t n_inner,
                                      const PricerSpec& pricer, int steps_per_unit,
                                      std::uint64_t seed) {
    option.validate();
    if (!(t >= 0.0 && t < option.maturity)) throw std::invalid_argument("audit: requires 0 <= t < T");
    const auto t_step = static_cast<std::size_t>(std::llround(t / paths.dt));
    const auto T_step = static_cast<std::size_t>(std::llround(option.maturity / paths.dt));
    if (T_step > paths.n_steps) throw std::invalid_argument("audit: maturity beyond simulated horizon");
    const double tau = option.maturity - t;
    const std::size_t n = paths.n_paths;
    std::vector<double> xs(n), ys(n);
    parallel_for(0, n, [&](std::uint64_t i) {
        const double s_t = paths.stock(i, t_step);
        const double v_t = paths.variance(i, t_step);
        if (pricer.kind == PricerSpec::Kind::heston_consistent) {
            xs[i] = price_option_mc(params, s_t, v_t, t, option, n_inner, steps_per_unit,
                                    mix_seed(seed, i));
        } else {
            xs[i] = bs_price(s_t, option.strike, params.r, pricer.bs_vol, tau);
        }
        ys[i] = std::exp(-params.r * tau) * std::max(paths.stock(i, T_step) - option.strike, 0.0);
    });
    PairedSample out;
    out.d = 1;
    out.xs = std::move(xs);
    out.ys = std::move(ys);
    return out;
}

/// Squared-projection calibration loss
///   sum_j sum_i integral ((X_ij - Y_ij) f(x - Y_ij))^2 dx
/// by rectangle-rule quadrature on the supplied grid.
inline double calibration_loss(const std::vector<PairedSample>& pairs_by_option,
                               const KernelSpec& kernel, const GridSpec& grid) {
    kernel.validate();
    if (kernel.family != KernelFamily::poly_tail)
        throw std::invalid_argument("calibration_loss: poly_tail kernel required");
    grid.validate();
    grid.check_node_cap();
    if (static_cast<int>(grid.lower.size()) != kernel.dim)
        throw std::invalid_argument("calibration_loss: grid/kernel dimension mismatch");
    const Kernel k(kernel);
    const int d = kernel.dim;
    const std::uint64_t nodes = grid.total_nodes();
    const double w = grid.node_weight();
    double total = 0.0;
    for (const PairedSample& s : pairs_by_option) {
        s.validate();
        if (s.d != d) throw std::invalid_argument("calibration_loss: sample dimension mismatch");
        const std::size_t n = s.size();
        std::vector<double> gap2(n);
        for (std::size_t i = 0; i < n; ++i) {
            double g2 = 0.0;
            for (int j = 0; j < d; ++j) {
                const double g = s.xs[i * d + j] - s.ys[i * d + j];
                g2 += g * g;
            }
            gap2[i] = g2;
        }
        std::vector<double> node_terms(nodes);
        parallel_for(0, nodes, [&](std::uint64_t idx) {
            std::vector<double> x(d);
            grid.node(idx, x);
            double acc = 0.0;
            for (std::size_t i = 0; i < n; ++i) {
                const double f = k.radial(detail::dist2(x, s.ys.data() + i * d, d));
                acc += gap2[i] * f * f;
            }
            node_terms[idx] = acc;
        });
        for (std::uint64_t idx = 0; idx < nodes; ++idx) total += node_terms[idx];
    }
    return total * w;
}

}  // namespace mpd
