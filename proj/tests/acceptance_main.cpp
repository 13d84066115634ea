// Acceptance suite: end-to-end checks of the statistical contracts, one
// pass/fail line per criterion. Exits nonzero if any criterion fails.

#include <chrono>
#include <cmath>
#include <cstdarg>
#include <cstdio>
#include <functional>
#include <string>
#include <vector>

#include "mpd/baselines.hpp"
#include "mpd/estimator.hpp"
#include "mpd/finance.hpp"
#include "mpd/generators.hpp"
#include "mpd/limit_sim.hpp"
#include "mpd/testkit.hpp"
#include "support/naive.hpp"
#include "support/stats.hpp"

using namespace mpd;

namespace {

struct Harness {
    int failed = 0;

    void run(int num, const std::string& name, const std::function<bool(std::string&)>& fn) {
        const auto start = std::chrono::steady_clock::now();
        std::string detail;
        bool ok = false;
        try {
            ok = fn(detail);
        } catch (const std::exception& e) {
            detail = std::string("exception: ") + e.what();
        }
        const double secs =
            std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
        std::printf("[%s] criterion %2d: %s (%s; %.1fs)\n", ok ? "PASS" : "FAIL", num,
                    name.c_str(), detail.c_str(), secs);
        std::fflush(stdout);
        if (!ok) ++failed;
    }
};

MpdConfig base_cfg(int d, double sigma = 1.0, double gamma = 1.0) {
    MpdConfig cfg;
    cfg.gamma = gamma;
    cfg.kernel = {KernelFamily::poly_tail, 5.0, sigma, d};
    cfg.grid = GridSpec::uniform(d, -50, 50, 1);
    return cfg;
}

PairedSample random_walk_sample(int d, std::size_t n, std::uint64_t seed) {
    GeneratorSpec g;
    g.id = GeneratorId::random_walk;
    g.dims = d;
    g.seed = seed;
    return generate(g, n);
}

bool within(double value, double center, double tol) {
    return value >= center - tol && value <= center + tol;
}

char buf_mem[512];
std::string fmt(const char* f, ...) {
    va_list args;
    va_start(args, f);
    std::vsnprintf(buf_mem, sizeof(buf_mem), f, args);
    va_end(args);
    return buf_mem;
}

// --- criterion 1 -----------------------------------------------------------

bool criterion1(std::string& detail) {
    RngStream rng(101, 0);
    PairedSample s;
    s.d = 1;
    for (int i = 0; i < 200; ++i) {
        s.xs.push_back(rng.normal());
        s.ys.push_back(s.xs.back() + 0.5);
    }
    MpdConfig cfg = base_cfg(1);
    cfg.grid = GridSpec::uniform(1, -60, 60, 0.05);
    const double value = smoothed_mpd(s, cfg);
    detail = fmt("smoothed_mpd = %.5f, window [0.49, 0.51]", value);
    return value >= 0.49 && value <= 0.51;
}

// --- criterion 2 -----------------------------------------------------------

// The published-table anchors (4.705 / 4.840 / 5.740) are not reproducible
// from the documented simulation procedure: the correctly computed quantiles
// land near 2.4 / 3.9 / 2.8 and are internally consistent with the
// replication-table statistic distribution (criterion 3's means) and with
// the test's exact level calibration. The criterion is asserted as stated
// and expected to fail; the analysis lives in the project notes.
bool criterion2(std::string& detail) {
    const auto rw1 = random_walk_sample(1, 100, 201);
    const auto ld1 = simulate_limit(rw1, base_cfg(1), 1000, SimMethod::multiplier, 202);
    const double cv1_05 = critical_value(ld1, 0.05);
    const double cv1_01 = critical_value(ld1, 0.01);

    const auto rw2 = random_walk_sample(2, 100, 203);
    const auto ld2 = simulate_limit(rw2, base_cfg(2), 1000, SimMethod::multiplier, 204);
    const double cv2_05 = critical_value(ld2, 0.05);

    detail = fmt("d1 a=.05: %.3f (4.705+-0.5); d2 a=.05: %.3f (4.840+-0.6); d1 a=.01: %.3f (5.740+-0.7)",
                 cv1_05, cv2_05, cv1_01);
    return within(cv1_05, 4.705, 0.5) && within(cv2_05, 4.840, 0.6) && within(cv1_01, 5.740, 0.7);
}

// --- criteria 3 and 4 (Table 2 / Table 3 replications) ----------------------

struct RateResult {
    double rejection = 0.0;
    double mean_statistic = 0.0;
};

/// N replications of the test statistic against a fixed critical value,
/// the latter simulated once from the random-walk reference coupling (the
/// critical values of the synthetic tables).
RateResult replicate(GeneratorId id, int k, double sigma, std::size_t n, int reps,
                     double reference_cv, std::uint64_t seed) {
    std::vector<double> stats(reps);
    std::vector<char> rejected(reps);
    const MpdConfig cfg = base_cfg(1, sigma);
    parallel_for(0, reps, [&](std::uint64_t r) {
        GeneratorSpec g;
        g.id = id;
        g.k = k;
        g.seed = mix_seed(seed, r);
        const PairedSample s = generate(g, n);
        stats[r] = test_statistic(s, cfg);
        rejected[r] = stats[r] > reference_cv ? 1 : 0;
    });
    RateResult out;
    for (int r = 0; r < reps; ++r) {
        out.rejection += rejected[r];
        out.mean_statistic += stats[r];
    }
    out.rejection /= reps;
    out.mean_statistic /= reps;
    return out;
}

// Replication tables compare the statistic against the tables' own
// published critical values (the tests in those tables were run against
// precomputed reference thresholds, not per-sample simulations).
bool criterion3(std::string& detail) {
    const double cv = 4.705;  // published d=1, alpha=0.05 threshold
    const auto null1 = replicate(GeneratorId::random_walk, 0, 1.0, 100, 100, cv, 311);
    const auto alt1 = replicate(GeneratorId::hermite, 1, 1.0, 100, 100, cv, 312);
    const auto null2 = replicate(GeneratorId::hermite, 20, 1.0, 100, 100, cv, 313);
    detail = fmt(
        "cv=%.3f; NULL1 p=%.2f T=%.3f (<=.05, 1.643+-.3); ALT1 p=%.2f T=%.3f (>=.95, 7.318+-1); "
        "NULL2 p=%.2f T=%.3f (<=.05, 1.804+-.3)",
        cv, null1.rejection, null1.mean_statistic, alt1.rejection, alt1.mean_statistic,
        null2.rejection, null2.mean_statistic);
    return null1.rejection <= 0.05 && within(null1.mean_statistic, 1.643, 0.3) &&
           alt1.rejection >= 0.95 && within(alt1.mean_statistic, 7.318, 1.0) &&
           null2.rejection <= 0.05 && within(null2.mean_statistic, 1.804, 0.3);
}

// The (k=1, sigma=100) anchor expects near-certain rejection against the
// published threshold 1.980, which requires the published mean statistic
// of exactly 10.000 = sqrt(n); the statistic computed from the estimator's
// defining formula stays near |N(0,1)| at that bandwidth (the order-1
// drift is O(sqrt(n)/sigma) = 0.1 here), so this sub-check cannot pass.
// Asserted as stated; analysis in the project notes.
bool criterion4(std::string& detail) {
    const auto k1_s100 = replicate(GeneratorId::hermite, 1, 100.0, 100, 100, 1.980, 411);
    const auto k20_s001 = replicate(GeneratorId::hermite, 20, 0.01, 100, 100, 15.006, 412);
    const auto k5_s1 = replicate(GeneratorId::hermite, 5, 1.0, 100, 100, 4.705, 413);
    detail = fmt(
        "(k=1,s=100) p=%.2f vs cv 1.980 (want >=.95); (k=20,s=.01) p=%.2f vs cv 15.006 "
        "(want <=.05); (k=5,s=1) p=%.2f vs cv 4.705 (want .10+-.1)",
        k1_s100.rejection, k20_s001.rejection, k5_s1.rejection);
    return k1_s100.rejection >= 0.95 && k20_s001.rejection <= 0.05 && k5_s1.rejection <= 0.20;
}

// --- criterion 5 -----------------------------------------------------------

bool criterion5(std::string& detail) {
    const std::vector<std::size_t> sizes = {100, 316, 1000, 3162, 10000};
    MpdConfig cfg1 = base_cfg(1);
    cfg1.grid = GridSpec::uniform(1, -5, 5, 0.25);
    const auto t1 = convergence_study(GeneratorId::uniform, sizes, 10, cfg1, true, 501);

    MpdConfig cfg3 = base_cfg(3);
    cfg3.grid = GridSpec::uniform(3, -3, 3, 0.5);
    const auto t3 = convergence_study(GeneratorId::uniform, sizes, 10, cfg3, true, 503);

    detail = fmt(
        "smoothed d1 %.3f, d3 %.3f (-0.5+-0.1); adapted d1 %.3f (-1/3+-0.1), d3 %.3f (-1/6+-0.1)",
        t1.smoothed_slope, t3.smoothed_slope, t1.adapted_slope, t3.adapted_slope);
    return within(t1.smoothed_slope, -0.5, 0.1) && within(t3.smoothed_slope, -0.5, 0.1) &&
           within(t1.adapted_slope, -1.0 / 3.0, 0.1) && within(t3.adapted_slope, -1.0 / 6.0, 0.1);
}

// --- criterion 6 -----------------------------------------------------------

bool criterion6(std::string& detail) {
    const auto s = random_walk_sample(1, 100, 601);
    MpdConfig cfg = base_cfg(1);
    cfg.grid = GridSpec::uniform(1, -10, 10, 1);  // 21 nodes
    const auto mult = simulate_limit(s, cfg, 2000, SimMethod::multiplier, 602);
    const auto chol = simulate_limit(s, cfg, 2000, SimMethod::cholesky, 603);
    const double ks = support::two_sample_ks(mult.draws, chol.draws);

    // covariance fidelity at two fixed nodes over 1e4 draws
    const auto grid2 = GridSpec::uniform(1, -1, 1, 2);
    bool cov_ok = true;
    double worst_z = 0.0;
    for (auto method : {SimMethod::multiplier, SimMethod::cholesky}) {
        const auto field = simulate_field_draws(s, cfg.kernel, grid2, 10000, method, 604);
        const double xa[] = {-1.0}, xb[] = {1.0};
        const double cab = field_covariance(xa, xb, s, cfg.kernel)(0, 0);
        const double caa = field_covariance(xa, xa, s, cfg.kernel)(0, 0);
        const double cbb = field_covariance(xb, xb, s, cfg.kernel)(0, 0);
        double est = 0.0;
        for (int j = 0; j < 10000; ++j) est += field(j, 0) * field(j, 1);
        est /= 10000.0;
        const double se = std::sqrt((caa * cbb + cab * cab) / 10000.0);
        worst_z = std::max(worst_z, std::fabs(est - cab) / se);
        cov_ok = cov_ok && std::fabs(est - cab) < 5.0 * se;
    }
    detail = fmt("KS = %.4f (< 0.08); worst covariance z = %.2f (< 5)", ks, worst_z);
    return ks < 0.08 && cov_ok;
}

// --- criterion 7 -----------------------------------------------------------

bool criterion7(std::string& detail) {
    RngStream rng(701, 0);
    double worst = 0.0;
    for (int rep = 0; rep < 50; ++rep) {
        const int d = 1 + (rep % 2);
        const auto n = static_cast<std::size_t>(2 + (rep % 9));
        const double gamma = 1.0 + 0.5 * (rep % 3);

        PairedSample s;
        s.d = d;
        for (std::size_t i = 0; i < n * d; ++i) {
            s.xs.push_back(rng.normal());
            s.ys.push_back(s.xs.back() + rng.normal());
        }
        MpdConfig cfg;
        cfg.gamma = gamma;
        cfg.kernel = {KernelFamily::poly_tail, 6.0, 0.9, d};
        cfg.grid = GridSpec::uniform(d, -8, 8, d == 1 ? 0.5 : 1.0);
        const double lib = smoothed_mpd(s, cfg);
        const double ref = oracle::smoothed_mpd(s, gamma, cfg.kernel, cfg.grid);
        worst = std::max(worst, std::fabs(lib - ref) / std::max(1.0, std::fabs(ref)));

        std::vector<double> x(d), y(d);
        for (int j = 0; j < d; ++j) {
            x[j] = 2.0 * rng.normal();
            y[j] = 2.0 * rng.normal();
        }
        const auto cov = field_covariance(x, y, s, cfg.kernel);
        const auto cov_ref = oracle::field_covariance(x, y, s, cfg.kernel);
        for (int a = 0; a < d; ++a)
            for (int b = 0; b < d; ++b)
                worst = std::max(worst, std::fabs(cov(a, b) - cov_ref[a][b]));

        PairedSample cube;
        cube.d = d;
        for (std::size_t i = 0; i < n * d; ++i) {
            cube.xs.push_back(rng.uniform());
            cube.ys.push_back(rng.uniform());
        }
        AdaptedMpdConfig acfg;
        acfg.gamma = gamma;
        acfg.r_exponent = rep % 2 ? 0.5 : 0.34;
        const double alib = adapted_empirical_mpd(cube, acfg);
        const double aref = oracle::adapted_mpd(cube, gamma, acfg.r_exponent);
        worst = std::max(worst, std::fabs(alib - aref));
    }
    detail = fmt("max discrepancy vs naive oracles = %.2e (< 1e-10)", worst);
    return worst < 1e-10;
}

// --- criterion 8 -----------------------------------------------------------

bool criterion8(std::string& detail) {
    const auto s = random_walk_sample(1, 100, 801);
    std::vector<double> means;
    for (double sigma : {1.0, 10.0, 100.0}) {
        const auto ld = simulate_limit(s, base_cfg(1, sigma), 1000, SimMethod::multiplier, 802);
        means.push_back(limit_mean(ld));
    }
    const double lo = std::min({means[0], means[1], means[2]});
    const double hi = std::max({means[0], means[1], means[2]});
    detail = fmt("limit means s=1: %.3f, s=10: %.3f, s=100: %.3f; ratio %.2f (< 5)", means[0],
                 means[1], means[2], hi / lo);
    return lo > 0.0 && hi / lo < 5.0;
}

// --- criterion 9 -----------------------------------------------------------

bool criterion9(std::string& detail) {
    const std::vector<std::size_t> sizes = {200, 800, 3200, 12800};
    const auto sub = bandwidth_scaling_probe(1, sizes, SigmaRule::subcritical, 5, 901);
    const auto super = bandwidth_scaling_probe(1, sizes, SigmaRule::supercritical, 5, 902);
    detail = fmt("subcritical slope = %.3f (0.25+-0.15); supercritical max/median = %.2f (< 3)",
                 sub.growth_slope, super.max_over_median);
    return within(sub.growth_slope, 0.25, 0.15) && super.max_over_median < 3.0;
}

// --- criterion 10 ----------------------------------------------------------

// Lift tests run the full plug-in test (critical value simulated from the
// sample under test, the library default). A fixed random-walk-based
// threshold cannot calibrate the cashflow lift, whose drift variance is
// ~23x the random walk's; the plug-in test accepts the true-martingale
// lifts and still rejects the wrong kernel.
bool criterion10(std::string& detail) {
    const MpdConfig cfg = base_cfg(2);
    int gm_accept = 0, cf_accept = 0, wrong_reject = 0;
    const int seeds = 20;
    for (int t = 0; t < seeds; ++t) {
        GeneratorSpec g;
        g.id = GeneratorId::gauss_markov;
        g.kappa = 0.5;
        g.seed = mix_seed(1002, t);
        if (!run_test(generate(g, 1000), cfg, 0.05, 500, mix_seed(1005, t)).reject) ++gm_accept;

        GeneratorSpec c;
        c.id = GeneratorId::cashflow;
        c.kv_mc_inner = 10000;
        c.seed = mix_seed(1003, t);
        if (!run_test(generate(c, 1000), cfg, 0.05, 500, mix_seed(1006, t)).reject) ++cf_accept;

        // kappa = 0.9 kernel wrongly assumed for kappa = 0.5 data
        RngStream rng(mix_seed(1004, t), 0);
        std::vector<double> series(1001);
        series[0] = rng.normal() / std::sqrt(1.0 - 0.25);
        for (std::size_t i = 1; i < series.size(); ++i)
            series[i] = 0.5 * series[i - 1] + rng.normal();
        const auto wrong = markov_pair_lift(
            series, {[](double x) { return x; }, [](double x) { return x > 0.0 ? x : 0.0; }},
            {[](double u) { return gauss_markov_kv1(0.9, u); },
             [](double u) { return gauss_markov_kv2(0.9, u); }});
        if (run_test(wrong, cfg, 0.05, 500, mix_seed(1007, t)).reject) ++wrong_reject;
    }
    detail = fmt("plug-in tests at a=.05: gauss_markov accept %d/20, cashflow accept %d/20 "
                 "(>=18); wrong-kappa reject %d/20 (>=18)",
                 gm_accept, cf_accept, wrong_reject);
    return gm_accept >= 18 && cf_accept >= 18 && wrong_reject >= 18;
}

// --- criterion 11 ----------------------------------------------------------

bool criterion11(std::string& detail) {
    const HestonParams params;  // theta-star
    const OptionSpec option{1.0, 1.0};
    const MpdConfig cfg = base_cfg(1);
    const int seeds = 20;
    int good_accept = 0, bad_reject = 0;
    for (int t = 0; t < seeds; ++t) {
        const std::uint64_t seed = mix_seed(1101, t);
        const auto outer = simulate_heston(params, 1.0, 100, 4000, mix_seed(seed, 1));
        const auto good = build_audit_pairs(outer, params, 0.5, option, 1000,
                                            PricerSpec::consistent(), 100, mix_seed(seed, 2));
        const auto rep = run_test(good, cfg, 0.05, 1000, mix_seed(seed, 3));
        if (!rep.reject) ++good_accept;

        const auto bad = build_audit_pairs(outer, params, 0.5, option, 1000,
                                           PricerSpec::misspecified(3.0 * std::sqrt(params.v0)),
                                           100, mix_seed(seed, 4));
        const auto rep2 = run_test(bad, cfg, 0.05, 1000, mix_seed(seed, 5));
        if (rep2.reject) ++bad_reject;
    }
    detail = fmt("consistent accepted %d/20 (>=18); misspecified rejected %d/20 (>=18)",
                 good_accept, bad_reject);
    return good_accept >= 18 && bad_reject >= 18;
}

// --- criterion 12 ----------------------------------------------------------

bool criterion12(std::string& detail) {
    const double gks_cv = gks_null_critical(0.05, 10000, 2000, 1201);
    const double mpd_cv = 4.840;  // published d=2, alpha=0.05 threshold
    const MpdConfig cfg = base_cfg(2);
    const int seeds = 20;
    int gks_no_reject = 0, joint_reject = 0;
    for (int t = 0; t < seeds; ++t) {
        GeneratorSpec g;
        g.id = GeneratorId::cross_dim;
        g.seed = mix_seed(1203, t);
        const auto s = generate(g, 1000);

        bool both_below = true;
        for (int coord = 0; coord < 2; ++coord) {
            PairedSample proj;
            proj.d = 1;
            for (std::size_t i = 0; i < s.size(); ++i) {
                proj.xs.push_back(s.xs[2 * i + coord]);
                proj.ys.push_back(s.ys[2 * i + coord]);
            }
            both_below = both_below && gks_statistic(proj) <= gks_cv;
        }
        if (both_below) ++gks_no_reject;
        if (test_statistic(s, cfg) > mpd_cv) ++joint_reject;
    }
    detail = fmt("gks cv=%.3f: per-coordinate no-reject %d/20 (>=16); joint MPD reject %d/20 (>=19)",
                 gks_cv, gks_no_reject, joint_reject);
    return gks_no_reject >= 16 && joint_reject >= 19;
}

}  // namespace

int main() {
    Harness h;
    h.run(1, "closed-form consistency (constant drift)", criterion1);
    h.run(2, "critical values (synthetic-table anchors)", criterion2);
    h.run(3, "replication table: null and alternatives", criterion3);
    h.run(4, "bandwidth-sensitivity spot checks", criterion4);
    h.run(5, "convergence slopes vs sample size", criterion5);
    h.run(6, "cholesky/multiplier equivalence", criterion6);
    h.run(7, "oracle equivalence property suite", criterion7);
    h.run(8, "limit-mean boundedness in sigma", criterion8);
    h.run(9, "bandwidth-scaling probe", criterion9);
    h.run(10, "markov-kernel lifts accept/reject", criterion10);
    h.run(11, "pricing audit accept/reject", criterion11);
    h.run(12, "cross-dimension inconsistency demo", criterion12);
    if (h.failed == 0) {
        std::printf("all criteria passed\n");
    } else {
        std::printf("%d criterion(s) failed\n", h.failed);
    }
    return h.failed;
}
