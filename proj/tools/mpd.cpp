// mpd - martingale pair testing toolkit.
//
// Subcommands: gen, test, critical, power, converge, bandwidth,
// finance-audit, markov. CSV in, JSON/CSV out; every file output embeds or
// is accompanied by a manifest sufficient to replay the run. All
// randomness flows from --seed (or MPD_SEED); exit codes: 0 success,
// 1 bad input or runtime failure, 2 statistical rejection under
// --fail-on-reject.

#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <ctime>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "mpd/baselines.hpp"
#include "mpd/estimator.hpp"
#include "mpd/finance.hpp"
#include "mpd/generators.hpp"
#include "mpd/limit_sim.hpp"
#include "mpd/parallel.hpp"
#include "mpd/sample.hpp"
#include "mpd/testkit.hpp"
#include "mpd/version.hpp"

namespace {

using nlohmann::json;

std::string iso_timestamp() {
    const auto now = std::chrono::system_clock::now();
    const std::time_t t = std::chrono::system_clock::to_time_t(now);
    char buf[32];
    std::tm tm{};
    gmtime_r(&t, &tm);
    std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

json make_manifest(const std::string& command, const json& config, std::uint64_t seed) {
    return json{{"command", command},
                {"config", config},
                {"seed", seed},
                {"tool_version", mpd::kToolVersion},
                {"format_version", mpd::kFormatVersion},
                {"timestamp", iso_timestamp()}};
}

std::string join_argv(int argc, char** argv) {
    std::string s;
    for (int i = 0; i < argc; ++i) {
        if (i) s += ' ';
        s += argv[i];
    }
    return s;
}

void write_text(const std::string& path, const std::string& text) {
    if (path.empty() || path == "-") {
        std::cout << text;
        return;
    }
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot open output file: " + path);
    out << text;
}

void write_json(const std::string& path, const json& j) { write_text(path, j.dump(2) + "\n"); }

/// CSV outputs carry their manifest in a sidecar <out>.manifest.json;
/// with stdout output the manifest goes to stderr instead.
void write_csv_with_manifest(const std::string& path, const std::string& csv, const json& manifest) {
    if (path.empty() || path == "-") {
        std::cout << csv;
        std::cerr << manifest.dump() << "\n";
        return;
    }
    write_text(path, csv);
    write_text(path + ".manifest.json", manifest.dump(2) + "\n");
}

mpd::PairedSample read_pairs(const std::string& path) {
    if (path.empty() || path == "-") return mpd::read_pairs_csv(std::cin);
    std::ifstream in(path);
    if (!in) throw std::invalid_argument("cannot open pairs file: " + path);
    return mpd::read_pairs_csv(in);
}

/// "lo:hi:step", repeated per dimension or broadcast across d axes.
mpd::GridSpec parse_grid(const std::vector<std::string>& specs, int d) {
    mpd::GridSpec g;
    if (specs.empty()) return mpd::GridSpec::uniform(d, -50.0, 50.0, 1.0);
    if (specs.size() != 1 && static_cast<int>(specs.size()) != d)
        throw std::invalid_argument("grid: give one lo:hi:step or one per dimension");
    for (int j = 0; j < d; ++j) {
        const std::string& s = specs.size() == 1 ? specs[0] : specs[j];
        double lo, hi, step;
        char c1, c2;
        std::istringstream ss(s);
        if (!(ss >> lo >> c1 >> hi >> c2 >> step) || c1 != ':' || c2 != ':' || !ss.eof())
            throw std::invalid_argument("grid: cannot parse '" + s + "' (expected lo:hi:step)");
        g.lower.push_back(lo);
        g.upper.push_back(hi);
        g.step.push_back(step);
    }
    return g;
}

std::vector<double> parse_list(const std::string& s) {
    std::vector<double> out;
    std::stringstream ss(s);
    std::string tok;
    while (std::getline(ss, tok, ',')) {
        if (tok.empty()) continue;
        out.push_back(std::stod(tok));
    }
    if (out.empty()) throw std::invalid_argument("empty list: '" + s + "'");
    return out;
}

std::uint64_t env_seed_default() {
    const char* env = std::getenv("MPD_SEED");
    if (!env) return 0;
    return std::strtoull(env, nullptr, 10);
}

std::uint64_t fnv1a(const std::string& s) {
    std::uint64_t h = 1469598103934665603ull;
    for (unsigned char c : s) {
        h ^= c;
        h *= 1099511628211ull;
    }
    return h;
}

struct CommonOpts {
    std::uint64_t seed = env_seed_default();
    int threads = 0;
    std::string out;

    void attach(CLI::App* cmd) {
        cmd->add_option("--seed", seed, "RNG seed (default MPD_SEED or 0)");
        cmd->add_option("--threads", threads, "worker threads (0 = all cores)");
        cmd->add_option("--out", out, "output file (default stdout)");
    }
};

struct KernelOpts {
    std::string family = "poly_tail";
    double rho = 5.0;
    double sigma = 1.0;
    double gamma = 1.0;
    std::vector<std::string> grid;

    void attach(CLI::App* cmd) {
        cmd->add_option("--family", family, "kernel family: poly_tail|gaussian");
        cmd->add_option("--rho", rho, "poly_tail tail exponent (default 5)");
        cmd->add_option("--sigma", sigma, "kernel bandwidth");
        cmd->add_option("--gamma", gamma, "MPD exponent (>= 1)");
        cmd->add_option("--grid", grid, "quadrature grid lo:hi:step, repeatable per dimension");
    }

    mpd::MpdConfig config(int d) const {
        mpd::MpdConfig cfg;
        cfg.gamma = gamma;
        cfg.kernel.family = mpd::kernel_family_from_string(family);
        cfg.kernel.rho = rho;
        cfg.kernel.sigma = sigma;
        cfg.kernel.dim = d;
        cfg.grid = parse_grid(grid, d);
        cfg.validate();
        return cfg;
    }
};

json test_report_json(const mpd::TestReport& rep) { return rep.to_json(); }

void warn_truncation(const mpd::TestReport& rep) {
    if (rep.truncation_mass > 1e-2)
        std::cerr << "warning: smoothed mass outside the grid is " << rep.truncation_mass
                  << " (> 0.01); consider widening --grid\n";
}

int cmd_gen(const std::string& command, const CommonOpts& common, const mpd::GeneratorSpec& spec,
            std::size_t n) {
    mpd::GeneratorSpec g = spec;
    g.seed = common.seed;
    const mpd::PairedSample s = mpd::generate(g, n);
    std::ostringstream csv;
    mpd::write_pairs_csv(csv, s);
    json cfg = {{"id", mpd::to_string(g.id)}, {"n", n},
                {"dims", g.dims}, {"k", g.k},
                {"epsilon", g.epsilon}, {"kappa", g.kappa},
                {"rate", g.rate}, {"lambda_p", g.lambda_p},
                {"gamma_shape", g.gamma_shape}, {"gamma_scale", g.gamma_scale},
                {"bounded", g.bounded}, {"bound", g.bound}};
    write_csv_with_manifest(common.out, csv.str(), make_manifest(command, cfg, g.seed));
    return 0;
}

int cmd_test(const std::string& command, const CommonOpts& common, const KernelOpts& kopts,
             const std::string& pairs_path, double alpha, std::size_t sims,
             const std::string& method_str, const std::string& reference_path,
             const std::string& sigma_candidates, bool rescale_unit_cube, bool fail_on_reject) {
    mpd::PairedSample sample = read_pairs(pairs_path);
    double rescale_offset = 0.0, rescale_scale = 1.0;
    if (rescale_unit_cube) {
        auto mapped = mpd::rescale_to_unit_cube(sample);
        rescale_offset = mapped.offset;
        rescale_scale = mapped.scale;
        sample = std::move(mapped.sample);
    }
    mpd::MpdConfig cfg = kopts.config(sample.d);
    const mpd::SimMethod method = mpd::sim_method_from_string(method_str);

    std::optional<mpd::PairedSample> reference;
    if (!reference_path.empty()) reference = read_pairs(reference_path);

    std::optional<double> selected;
    if (!sigma_candidates.empty()) {
        const auto sel = mpd::select_bandwidth(sample, cfg, parse_list(sigma_candidates));
        cfg.kernel.sigma = sel.sigma;
        selected = sel.sigma;
    }
    mpd::TestReport rep = mpd::run_test(sample, cfg, alpha, sims, common.seed, method,
                                        reference ? &*reference : nullptr);
    rep.sigma_selected = selected;
    warn_truncation(rep);

    json out = test_report_json(rep);
    out["sample_digest"] = sample.digest();
    if (rescale_unit_cube) {
        out["rescale_unit_cube"] = {{"offset", rescale_offset}, {"scale", rescale_scale}};
    }
    out["manifest"] = make_manifest(command, test_report_json(rep)["config"], common.seed);
    write_json(common.out, out);
    return (fail_on_reject && rep.reject) ? 2 : 0;
}

int cmd_critical(const std::string& command, const CommonOpts& common, const KernelOpts& kopts,
                 int d, double alpha, std::size_t sims, std::size_t cov_samples,
                 const std::string& method_str, const std::string& cache_dir) {
    const mpd::MpdConfig cfg = kopts.config(d);
    const mpd::SimMethod method = mpd::sim_method_from_string(method_str);

    json cfg_json = mpd::config_to_json(cfg);
    cfg_json["cov_samples"] = cov_samples;
    cfg_json["n_sims"] = sims;
    cfg_json["method"] = method_str;
    cfg_json["seed"] = common.seed;

    mpd::LimitDistribution ld;
    char digest[17];
    std::snprintf(digest, sizeof(digest), "%016llx",
                  static_cast<unsigned long long>(fnv1a(cfg_json.dump())));
    const std::string cache_file =
        cache_dir.empty() ? "" : cache_dir + "/limit-" + digest + ".json";
    bool from_cache = false;
    if (!cache_file.empty()) {
        std::ifstream in(cache_file);
        if (in) {
            json j;
            in >> j;
            ld = mpd::LimitDistribution::from_json(j);
            from_cache = true;
        }
    }
    if (!from_cache) {
        mpd::GeneratorSpec g;
        g.id = mpd::GeneratorId::random_walk;
        g.dims = d;
        g.seed = mpd::mix_seed(common.seed, 0xC0);
        const mpd::PairedSample coupling = mpd::generate(g, cov_samples);
        ld = mpd::simulate_limit(coupling, cfg, sims, method, common.seed);
        if (!cache_file.empty()) {
            std::ofstream out(cache_file);
            if (!out) throw std::runtime_error("cannot open cache file: " + cache_file);
            out << ld.to_json().dump() << "\n";
        }
    }
    const double cv = mpd::critical_value(ld, alpha);
    json out = {{"critical_value", cv},
                {"alpha", alpha},
                {"dim", d},
                {"n_sims", ld.draws.size()},
                {"limit_mean", mpd::limit_mean(ld)},
                {"method", mpd::to_string(ld.method)},
                {"from_cache", from_cache},
                {"manifest", make_manifest(command, cfg_json, common.seed)}};
    write_json(common.out, out);
    return 0;
}

int cmd_power(const std::string& command, const CommonOpts& common, const KernelOpts& kopts,
              const std::string& id, const std::string& levels_str, std::size_t n, int reps,
              double alpha, std::size_t sims) {
    const mpd::GeneratorId id_e = mpd::generator_id_from_string(id);
    const std::vector<double> levels = parse_list(levels_str);
    const mpd::MpdConfig cfg = kopts.config(1);
    const mpd::PowerCurve pc =
        mpd::power_curve(id_e, levels, n, reps, cfg, alpha, sims, common.seed);
    std::ostringstream csv;
    csv << "level,rejection_rate,mean_statistic\n";
    csv.precision(12);
    for (std::size_t i = 0; i < levels.size(); ++i)
        csv << pc.perturbation_levels[i] << "," << pc.rejection_rates[i] << ","
            << pc.mean_statistics[i] << "\n";
    json cfg_json = mpd::config_to_json(cfg);
    cfg_json["generator"] = id;
    cfg_json["levels"] = levels;
    cfg_json["n"] = n;
    cfg_json["replications"] = reps;
    cfg_json["alpha"] = alpha;
    cfg_json["n_sims"] = sims;
    write_csv_with_manifest(common.out, csv.str(), make_manifest(command, cfg_json, common.seed));
    return 0;
}

int cmd_converge(const std::string& command, const CommonOpts& common, const KernelOpts& kopts,
                 const std::string& id, int d, const std::string& sizes_str, int trials,
                 bool adapted, double adapted_r) {
    const mpd::GeneratorId id_e = mpd::generator_id_from_string(id);
    std::vector<std::size_t> sizes;
    for (double v : parse_list(sizes_str)) sizes.push_back(static_cast<std::size_t>(v));
    const mpd::MpdConfig cfg = kopts.config(d);
    const mpd::ConvergenceTable table =
        mpd::convergence_study(id_e, sizes, trials, cfg, adapted, common.seed, adapted_r);
    std::ostringstream csv;
    csv << (adapted ? "n,mean_smoothed_mpd,mean_adapted_mpd\n" : "n,mean_smoothed_mpd\n");
    csv.precision(12);
    for (std::size_t i = 0; i < sizes.size(); ++i) {
        csv << table.sizes[i] << "," << table.mean_smoothed_mpd[i];
        if (adapted) csv << "," << table.mean_adapted_mpd[i];
        csv << "\n";
    }
    json cfg_json = mpd::config_to_json(cfg);
    cfg_json["generator"] = id;
    cfg_json["sizes"] = sizes;
    cfg_json["trials"] = trials;
    cfg_json["include_adapted"] = adapted;
    cfg_json["adapted_r"] = adapted_r;
    cfg_json["smoothed_slope"] = table.smoothed_slope;
    if (adapted) cfg_json["adapted_slope"] = table.adapted_slope;
    cfg_json["degenerate"] = table.degenerate;
    std::cerr << "smoothed slope: " << table.smoothed_slope;
    if (adapted) std::cerr << ", adapted slope: " << table.adapted_slope;
    std::cerr << "\n";
    write_csv_with_manifest(common.out, csv.str(), make_manifest(command, cfg_json, common.seed));
    return 0;
}

int cmd_bandwidth(const std::string& command, const CommonOpts& common, const KernelOpts& kopts,
                  const std::string& pairs_path, const std::string& candidates) {
    const mpd::PairedSample sample = read_pairs(pairs_path);
    const mpd::MpdConfig cfg = kopts.config(sample.d);
    const auto sel = mpd::select_bandwidth(sample, cfg, parse_list(candidates));
    json cfg_json = mpd::config_to_json(cfg);
    cfg_json["candidates"] = parse_list(candidates);
    json out = {{"sigma_selected", sel.sigma},
                {"statistic", sel.statistic},
                {"n", sample.size()},
                {"sample_digest", sample.digest()},
                {"manifest", make_manifest(command, cfg_json, common.seed)}};
    write_json(common.out, out);
    return 0;
}

int cmd_finance_audit(const std::string& command, const CommonOpts& common, const KernelOpts& kopts,
                      const std::string& pricer_str, double bs_vol, std::size_t paths,
                      std::size_t inner, double t, double maturity, double strike,
                      const std::string& params_path, int steps, double alpha, std::size_t sims,
                      bool fail_on_reject) {
    mpd::HestonParams params;
    if (!params_path.empty()) {
        std::ifstream in(params_path);
        if (!in) throw std::invalid_argument("cannot open params file: " + params_path);
        json j;
        in >> j;
        params = j.get<mpd::HestonParams>();
    }
    mpd::PricerSpec pricer;
    if (pricer_str == "consistent") {
        pricer = mpd::PricerSpec::consistent();
    } else if (pricer_str == "bs") {
        pricer = mpd::PricerSpec::misspecified(bs_vol);
    } else {
        throw std::invalid_argument("unknown pricer: " + pricer_str + " (expected consistent|bs)");
    }
    const mpd::OptionSpec option{strike, maturity};
    const mpd::HestonPaths outer = mpd::simulate_heston(params, maturity, steps, paths,
                                                        mpd::mix_seed(common.seed, 0xF1));
    const mpd::PairedSample pairs = mpd::build_audit_pairs(outer, params, t, option, inner, pricer,
                                                           steps, mpd::mix_seed(common.seed, 0xF2));
    const mpd::MpdConfig cfg = kopts.config(1);
    const mpd::TestReport rep =
        mpd::run_test(pairs, cfg, alpha, sims, mpd::mix_seed(common.seed, 0xF3));
    warn_truncation(rep);

    json cfg_json = mpd::config_to_json(cfg);
    cfg_json["pricer"] = pricer_str;
    if (pricer_str == "bs") cfg_json["bs_vol"] = bs_vol;
    cfg_json["heston"] = params;
    cfg_json["option"] = {{"strike", strike}, {"maturity", maturity}};
    cfg_json["t"] = t;
    cfg_json["paths"] = paths;
    cfg_json["inner"] = inner;
    cfg_json["steps_per_unit"] = steps;
    cfg_json["alpha"] = alpha;
    cfg_json["n_sims"] = sims;
    json out = test_report_json(rep);
    out["pricer"] = pricer_str;
    out["pairs_digest"] = pairs.digest();
    out["manifest"] = make_manifest(command, cfg_json, common.seed);
    write_json(common.out, out);
    return (fail_on_reject && rep.reject) ? 2 : 0;
}

int cmd_markov(const std::string& command, const CommonOpts& common, const KernelOpts& kopts,
               const std::string& id, std::size_t n, double kappa, double assumed_kappa,
               double rate, double lambda_p, double gamma_shape, double gamma_scale,
               std::size_t m_inner, double alpha, std::size_t sims, bool fail_on_reject) {
    mpd::GeneratorSpec g;
    g.id = mpd::generator_id_from_string(id);
    if (g.id != mpd::GeneratorId::gauss_markov && g.id != mpd::GeneratorId::cashflow)
        throw std::invalid_argument("markov: id must be gauss_markov or cashflow");
    g.seed = common.seed;
    g.kappa = kappa;
    g.rate = rate;
    g.lambda_p = lambda_p;
    g.gamma_shape = gamma_shape;
    g.gamma_scale = gamma_scale;
    g.kv_mc_inner = m_inner;

    mpd::PairedSample pairs;
    if (g.id == mpd::GeneratorId::gauss_markov && assumed_kappa != kappa) {
        // lift the true-kappa series with the assumed kernel
        mpd::RngStream rng(g.seed, 0);
        std::vector<double> series(n + 1);
        series[0] = kappa < 1.0 ? rng.normal() / std::sqrt(1.0 - kappa * kappa) : 0.0;
        for (std::size_t i = 1; i <= n; ++i) series[i] = kappa * series[i - 1] + rng.normal();
        const double ak = assumed_kappa;
        pairs = mpd::markov_pair_lift(
            series, {[](double x) { return x; }, [](double x) { return x > 0.0 ? x : 0.0; }},
            {[ak](double u) { return mpd::gauss_markov_kv1(ak, u); },
             [ak](double u) { return mpd::gauss_markov_kv2(ak, u); }});
    } else {
        pairs = mpd::generate(g, n);
    }
    const mpd::MpdConfig cfg = kopts.config(2);
    const mpd::TestReport rep =
        mpd::run_test(pairs, cfg, alpha, sims, mpd::mix_seed(common.seed, 0x4d4b));
    warn_truncation(rep);

    json cfg_json = mpd::config_to_json(cfg);
    cfg_json["generator"] = id;
    cfg_json["n"] = n;
    cfg_json["kappa"] = kappa;
    cfg_json["assumed_kappa"] = assumed_kappa;
    cfg_json["rate"] = rate;
    cfg_json["lambda_p"] = lambda_p;
    cfg_json["gamma_shape"] = gamma_shape;
    cfg_json["gamma_scale"] = gamma_scale;
    cfg_json["m_inner"] = m_inner;
    cfg_json["alpha"] = alpha;
    cfg_json["n_sims"] = sims;
    json out = test_report_json(rep);
    out["generator"] = id;
    out["pairs_digest"] = pairs.digest();
    out["manifest"] = make_manifest(command, cfg_json, common.seed);
    write_json(common.out, out);
    return (fail_on_reject && rep.reject) ? 2 : 0;
}

}  // namespace

int main(int argc, char** argv) {
    const std::string command = join_argv(argc, argv);
    CLI::App app{"martingale pair testing toolkit"};
    app.require_subcommand(1);

    // gen
    auto* gen = app.add_subcommand("gen", "generate a synthetic coupling as CSV");
    CommonOpts gen_common;
    gen_common.attach(gen);
    std::string gen_id = "random_walk";
    std::size_t gen_n = 100;
    mpd::GeneratorSpec gen_spec;
    gen->add_option("--id", gen_id, "generator id")->required();
    gen->add_option("--n", gen_n, "number of pairs")->required();
    gen->add_option("--dims", gen_spec.dims, "dimension (random_walk, shift, uniform)");
    gen->add_option("--k", gen_spec.k, "hermite order");
    gen->add_option("--eps", gen_spec.epsilon, "shift perturbation");
    gen->add_option("--kappa", gen_spec.kappa, "gauss_markov autoregression");
    gen->add_option("--rate", gen_spec.rate, "cashflow discount rate");
    gen->add_option("--lambda", gen_spec.lambda_p, "cashflow jump intensity");
    gen->add_option("--gamma-shape", gen_spec.gamma_shape, "cashflow jump-size shape");
    gen->add_option("--gamma-scale", gen_spec.gamma_scale, "cashflow jump-size scale");
    gen->add_flag("--bounded", gen_spec.bounded, "clip values to [-bound, bound]");
    gen->add_option("--bound", gen_spec.bound, "clip bound (default 10)");
    gen->add_option("--m-inner", gen_spec.kv_mc_inner, "inner draws for Monte-Carlo Kv");

    // test
    auto* test = app.add_subcommand("test", "martingale pair test on a CSV sample");
    CommonOpts test_common;
    KernelOpts test_kernel;
    test_common.attach(test);
    test_kernel.attach(test);
    std::string test_pairs = "-";
    double test_alpha = 0.05;
    std::size_t test_sims = 1000;
    std::string test_method = "multiplier";
    std::string test_reference;
    std::string test_select_sigma;
    bool test_rescale = false;
    bool test_fail_on_reject = false;
    test->add_option("--pairs", test_pairs, "pairs CSV ('-' = stdin)");
    test->add_option("--alpha", test_alpha, "significance level");
    test->add_option("--sims", test_sims, "limit-simulation draws");
    test->add_option("--method", test_method, "cholesky|multiplier");
    test->add_option("--reference", test_reference,
                     "CSV coupling used for the critical value instead of the sample under test");
    test->add_option("--select-sigma", test_select_sigma,
                     "comma list of bandwidth candidates; picks the statistic maximizer");
    test->add_flag("--rescale-unit-cube", test_rescale,
                   "affinely map all coordinates onto [0,1] before testing");
    test->add_flag("--fail-on-reject", test_fail_on_reject, "exit 2 when the test rejects");

    // critical
    auto* critical = app.add_subcommand("critical", "critical value from a random-walk coupling");
    CommonOpts crit_common;
    KernelOpts crit_kernel;
    crit_common.attach(critical);
    crit_kernel.attach(critical);
    int crit_d = 1;
    double crit_alpha = 0.05;
    std::size_t crit_sims = 1000, crit_cov = 100;
    std::string crit_method = "multiplier";
    std::string crit_cache;
    critical->add_option("--d", crit_d, "dimension");
    critical->add_option("--alpha", crit_alpha, "significance level");
    critical->add_option("--sims", crit_sims, "limit-simulation draws");
    critical->add_option("--cov-samples", crit_cov, "coupling samples for the covariance");
    critical->add_option("--method", crit_method, "cholesky|multiplier");
    critical->add_option("--cache", crit_cache, "cache directory for limit distributions");

    // power
    auto* power = app.add_subcommand("power", "power curve over perturbation levels (CSV)");
    CommonOpts power_common;
    KernelOpts power_kernel;
    power_common.attach(power);
    power_kernel.attach(power);
    std::string power_id = "shift", power_levels;
    std::size_t power_n = 1000;
    int power_reps = 100;
    double power_alpha = 0.05;
    std::size_t power_sims = 1000;
    power->add_option("--id", power_id, "generator: shift|hermite");
    power->add_option("--levels", power_levels, "comma list of perturbation levels")->required();
    power->add_option("--n", power_n, "sample size per replication");
    power->add_option("--reps", power_reps, "replications per level");
    power->add_option("--alpha", power_alpha, "significance level");
    power->add_option("--sims", power_sims, "limit-simulation draws");

    // converge
    auto* converge = app.add_subcommand("converge", "convergence study vs sample size (CSV)");
    CommonOpts conv_common;
    KernelOpts conv_kernel;
    conv_common.attach(converge);
    conv_kernel.attach(converge);
    std::string conv_id = "uniform", conv_sizes;
    int conv_d = 1, conv_trials = 10;
    bool conv_no_adapted = false;
    double conv_adapted_r = 0.0;
    converge->add_option("--id", conv_id, "generator id");
    converge->add_option("--d", conv_d, "dimension");
    converge->add_option("--sizes", conv_sizes, "comma list of ascending sizes")->required();
    converge->add_option("--trials", conv_trials, "trials per size");
    converge->add_flag("--no-adapted", conv_no_adapted, "skip the adapted-MPD baseline");
    converge->add_option("--adapted-r", conv_adapted_r,
                         "partition exponent r (default 1/(d+2))");

    // bandwidth
    auto* bandwidth = app.add_subcommand("bandwidth", "bandwidth selection by statistic maximization");
    CommonOpts bw_common;
    KernelOpts bw_kernel;
    bw_common.attach(bandwidth);
    bw_kernel.attach(bandwidth);
    std::string bw_pairs = "-", bw_candidates = "1,2,5,10,20,50,80,100";
    bandwidth->add_option("--pairs", bw_pairs, "pairs CSV ('-' = stdin)");
    bandwidth->add_option("--candidates", bw_candidates, "comma list of sigma candidates (>= 1)");

    // finance-audit
    auto* audit = app.add_subcommand("finance-audit", "no-arbitrage audit of an option pricer");
    CommonOpts audit_common;
    KernelOpts audit_kernel;
    audit_common.attach(audit);
    audit_kernel.attach(audit);
    std::string audit_pricer = "consistent", audit_params;
    double audit_bs_vol = 0.6, audit_t = 0.5, audit_T = 1.0, audit_K = 1.0, audit_alpha = 0.05;
    std::size_t audit_paths = 4000, audit_inner = 1000, audit_sims = 1000;
    int audit_steps = 100;
    bool audit_fail_on_reject = false;
    audit->add_option("--pricer", audit_pricer, "consistent|bs");
    audit->add_option("--bs-vol", audit_bs_vol, "volatility of the misspecified BS pricer");
    audit->add_option("--paths", audit_paths, "outer paths");
    audit->add_option("--inner", audit_inner, "inner pricing paths");
    audit->add_option("--t", audit_t, "audit time");
    audit->add_option("--T", audit_T, "option maturity");
    audit->add_option("--K", audit_K, "option strike");
    audit->add_option("--params", audit_params, "HestonParams JSON file");
    audit->add_option("--steps", audit_steps, "Euler steps per time unit");
    audit->add_option("--alpha", audit_alpha, "significance level");
    audit->add_option("--sims", audit_sims, "limit-simulation draws");
    audit->add_flag("--fail-on-reject", audit_fail_on_reject, "exit 2 when the test rejects");

    // markov
    auto* markov = app.add_subcommand("markov", "Markov-kernel pair-lift test");
    CommonOpts markov_common;
    KernelOpts markov_kernel;
    markov_common.attach(markov);
    markov_kernel.attach(markov);
    std::string markov_id = "gauss_markov";
    std::size_t markov_n = 1000, markov_m_inner = 100000, markov_sims = 1000;
    double markov_kappa = 0.5, markov_assumed_kappa = 0.5, markov_rate = 1.0, markov_lambda = 2.0;
    double markov_gshape = 2.0, markov_gscale = 3.0, markov_alpha = 0.05;
    bool markov_fail_on_reject = false;
    markov->add_option("--id", markov_id, "gauss_markov|cashflow");
    markov->add_option("--n", markov_n, "number of lifted pairs");
    markov->add_option("--kappa", markov_kappa, "true autoregression coefficient");
    markov->add_option("--assumed-kappa", markov_assumed_kappa,
                       "kernel coefficient used in the lift (mismatch tests a wrong kernel)");
    markov->add_option("--rate", markov_rate, "cashflow discount rate");
    markov->add_option("--lambda", markov_lambda, "cashflow jump intensity");
    markov->add_option("--gamma-shape", markov_gshape, "cashflow jump-size shape");
    markov->add_option("--gamma-scale", markov_gscale, "cashflow jump-size scale");
    markov->add_option("--m-inner", markov_m_inner, "inner draws for Monte-Carlo Kv");
    markov->add_option("--alpha", markov_alpha, "significance level");
    markov->add_option("--sims", markov_sims, "limit-simulation draws");
    markov->add_flag("--fail-on-reject", markov_fail_on_reject, "exit 2 when the test rejects");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        if (e.get_exit_code() == 0) return app.exit(e);  // --help
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }

    try {
        if (gen->parsed()) {
            mpd::worker_threads() = gen_common.threads;
            gen_spec.id = mpd::generator_id_from_string(gen_id);
            return cmd_gen(command, gen_common, gen_spec, gen_n);
        }
        if (test->parsed()) {
            mpd::worker_threads() = test_common.threads;
            return cmd_test(command, test_common, test_kernel, test_pairs, test_alpha, test_sims,
                            test_method, test_reference, test_select_sigma, test_rescale,
                            test_fail_on_reject);
        }
        if (critical->parsed()) {
            mpd::worker_threads() = crit_common.threads;
            return cmd_critical(command, crit_common, crit_kernel, crit_d, crit_alpha, crit_sims,
                                crit_cov, crit_method, crit_cache);
        }
        if (power->parsed()) {
            mpd::worker_threads() = power_common.threads;
            return cmd_power(command, power_common, power_kernel, power_id, power_levels, power_n,
                             power_reps, power_alpha, power_sims);
        }
        if (converge->parsed()) {
            mpd::worker_threads() = conv_common.threads;
            return cmd_converge(command, conv_common, conv_kernel, conv_id, conv_d, conv_sizes,
                                conv_trials, !conv_no_adapted, conv_adapted_r);
        }
        if (bandwidth->parsed()) {
            mpd::worker_threads() = bw_common.threads;
            return cmd_bandwidth(command, bw_common, bw_kernel, bw_pairs, bw_candidates);
        }
        if (audit->parsed()) {
            mpd::worker_threads() = audit_common.threads;
            return cmd_finance_audit(command, audit_common, audit_kernel, audit_pricer,
                                     audit_bs_vol, audit_paths, audit_inner, audit_t, audit_T,
                                     audit_K, audit_params, audit_steps, audit_alpha, audit_sims,
                                     audit_fail_on_reject);
        }
        if (markov->parsed()) {
            mpd::worker_threads() = markov_common.threads;
            return cmd_markov(command, markov_common, markov_kernel, markov_id, markov_n,
                              markov_kappa, markov_assumed_kappa, markov_rate, markov_lambda,
                              markov_gshape, markov_gscale, markov_m_inner, markov_alpha,
                              markov_sims, markov_fail_on_reject);
        }
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    std::cerr << "error: no subcommand\n";
    return 1;
}
