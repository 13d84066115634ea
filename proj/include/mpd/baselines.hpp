#pragma once

// Competing estimators: the adapted empirical MPD (cube-center plug-in on
// a uniform partition of [0,1]^d) and the one-dimensional generalized
// Kolmogorov-Smirnov pair statistic
//   I_n(a) = sum_t (Y_t - X_t) 1{X_t <= a} / (sum_t (Y_t - X_t)^2)^(1/2)
// with its Brownian-functional null distribution sup_a |int 1{W<=a} dW|.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <numeric>
#include <stdexcept>
#include <vector>

#include "mpd/mathutil.hpp"
#include "mpd/parallel.hpp"
#include "mpd/rng.hpp"
#include "mpd/sample.hpp"

namespace mpd {

struct AdaptedMpdConfig {
    double gamma = 1.0;
    /// Partition exponent r in (0,1]: each axis splits into ceil(n^r)
    /// cells. r <= 0 selects the default 1/(d+2).
    double r_exponent = 0.0;
    /// Snap Y on the partition lattice continued beyond [0,1] instead of
    /// rejecting it. X stays confined to the unit cube either way. Lets X
    /// fill [0,1]^d exactly (partition borders aligned with its range)
    /// when Y spreads wider, as in the rate comparisons.
    bool y_on_extended_lattice = false;

    double effective_r(int d) const {
        const double r = r_exponent > 0.0 ? r_exponent : 1.0 / (d + 2.0);
        if (!(r > 0.0 && r <= 1.0))
            throw std::invalid_argument("adapted mpd: r_exponent must lie in (0,1]");
        return r;
    }
};

/// MPD of the adapted empirical measure: X and Y snapped to the centers
/// of a uniform partition of [0,1]^d into ceil(n^r)^d cubes, then
/// 2^(1-gamma) sum_g (count_g/n) |g - mean of snapped Y over g|_2^gamma.
/// Cells are half-open with the last cell closed, so 1.0 maps inside.
inline double adapted_empirical_mpd(const PairedSample& sample, const AdaptedMpdConfig& cfg) {
    sample.validate();
    if (!(cfg.gamma >= 1.0)) throw std::invalid_argument("adapted mpd: gamma must be >= 1");
    const int d = sample.d;
    const std::size_t n = sample.size();
    const double r = cfg.effective_r(d);
    const auto m = static_cast<long>(std::ceil(std::pow(static_cast<double>(n), r)));

    auto cell = [m](double c) {
        if (!(c >= 0.0 && c <= 1.0))
            throw std::invalid_argument("adapted mpd: coordinate outside [0,1]");
        return std::min(static_cast<long>(c * static_cast<double>(m)), m - 1);
    };
    auto cell_y = [&](double c) {
        if (c >= 0.0 && c <= 1.0) return cell(c);
        if (!cfg.y_on_extended_lattice)
            throw std::invalid_argument("adapted mpd: coordinate outside [0,1]");
        return static_cast<long>(std::floor(c * static_cast<double>(m)));
    };
    auto center = [m](long i) { return (static_cast<double>(i) + 0.5) / static_cast<double>(m); };

    struct Agg {
        std::size_t count = 0;
        std::vector<long> sum_y_cells;  // integer cell indices: exact accumulation
    };
    std::map<std::vector<long>, Agg> cubes;
    std::vector<long> gx(d);
    for (std::size_t i = 0; i < n; ++i) {
        for (int j = 0; j < d; ++j) gx[j] = cell(sample.xs[i * d + j]);
        Agg& agg = cubes[gx];
        if (agg.sum_y_cells.empty()) agg.sum_y_cells.assign(d, 0);
        agg.count += 1;
        for (int j = 0; j < d; ++j) agg.sum_y_cells[j] += cell_y(sample.ys[i * d + j]);
    }
    double acc = 0.0;
    for (const auto& [g, agg] : cubes) {
        double s = 0.0;
        for (int j = 0; j < d; ++j) {
            const double mean_cell =
                static_cast<double>(agg.sum_y_cells[j]) / static_cast<double>(agg.count);
            const double t = center(g[j]) - (mean_cell + 0.5) / static_cast<double>(m);
            s += t * t;
        }
        acc += static_cast<double>(agg.count) / static_cast<double>(n) *
               std::pow(std::sqrt(s), cfg.gamma);
    }
    return std::exp2(1.0 - cfg.gamma) * acc;
}

/// Affine map of all coordinates onto [0,1] by the common transform
/// u -> (u - min) / (max - min) over every entry of xs and ys; the same
/// scalar affine map on both legs preserves the martingale property.
struct UnitCubeRescale {
    PairedSample sample;
    double offset = 0.0;
    double scale = 1.0;  // mapped = (u - offset) * scale
};

inline UnitCubeRescale rescale_to_unit_cube(const PairedSample& s, bool x_range_only = false) {
    s.validate();
    double lo = s.xs[0], hi = s.xs[0];
    for (double v : s.xs) {
        lo = std::min(lo, v);
        hi = std::max(hi, v);
    }
    if (!x_range_only)
        for (double v : s.ys) {
            lo = std::min(lo, v);
            hi = std::max(hi, v);
        }
    UnitCubeRescale out;
    out.offset = lo;
    out.scale = hi > lo ? 1.0 / (hi - lo) : 1.0;
    out.sample.d = s.d;
    out.sample.xs.reserve(s.xs.size());
    out.sample.ys.reserve(s.ys.size());
    for (double v : s.xs) out.sample.xs.push_back((v - lo) * out.scale);
    for (double v : s.ys) out.sample.ys.push_back((v - lo) * out.scale);
    return out;
}

/// sup_a |I_n(a)|, evaluated exactly at the order statistics of X.
inline double gks_statistic(const PairedSample& sample) {
    sample.validate();
    if (sample.d != 1) throw std::invalid_argument("gks_statistic: requires d = 1");
    const std::size_t n = sample.size();
    double denom2 = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double diff = sample.ys[i] - sample.xs[i];
        denom2 += diff * diff;
    }
    if (!(denom2 > 0.0))
        throw std::invalid_argument("gks_statistic: degenerate denominator (ys identical to xs)");
    const double denom = std::sqrt(denom2);

    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(),
              [&](std::size_t a, std::size_t b) { return sample.xs[a] < sample.xs[b]; });
    double cum = 0.0, best = 0.0;
    for (std::size_t t = 0; t < n; ++t) {
        cum += sample.ys[order[t]] - sample.xs[order[t]];
        // step level completes once all ties at this X value are included
        if (t + 1 < n && sample.xs[order[t + 1]] == sample.xs[order[t]]) continue;
        best = std::max(best, std::fabs(cum));
    }
    return best / denom;
}

/// Null critical value for the GKS pair statistic: Euler simulation of
/// sup_a |J(a)|, J(a) = int_0^1 1{W(s) <= a} dW(s), the sup taken over
/// the visited levels; returns the empirical (1-alpha) quantile.
inline double gks_null_critical(double alpha, std::size_t n_paths, std::size_t n_steps,
                                std::uint64_t seed) {
    if (!(alpha > 0.0 && alpha < 1.0)) throw std::invalid_argument("gks_null_critical: alpha outside (0,1)");
    if (n_paths < 1000 || n_steps < 1000)
        throw std::invalid_argument("gks_null_critical: need n_paths >= 1000 and n_steps >= 1000");
    std::vector<double> sups(n_paths);
    const double root_dt = std::sqrt(1.0 / static_cast<double>(n_steps));
    parallel_for(0, n_paths, [&](std::uint64_t p) {
        RngStream rng(seed, p);
        std::vector<double> level(n_steps), incr(n_steps);
        double w = 0.0;
        for (std::size_t k = 0; k < n_steps; ++k) {
            level[k] = w;  // left endpoint of the k-th increment
            incr[k] = root_dt * rng.normal();
            w += incr[k];
        }
        std::vector<std::size_t> order(n_steps);
        std::iota(order.begin(), order.end(), 0);
        std::sort(order.begin(), order.end(),
                  [&](std::size_t a, std::size_t b) { return level[a] < level[b]; });
        double cum = 0.0, best = 0.0;
        for (std::size_t t = 0; t < n_steps; ++t) {
            cum += incr[order[t]];
            best = std::max(best, std::fabs(cum));
        }
        sups[p] = best;
    });
    std::sort(sups.begin(), sups.end());
    const auto rank = static_cast<std::size_t>(
        std::ceil((1.0 - alpha) * static_cast<double>(n_paths)));
    return sups[std::clamp<std::size_t>(rank, 1, n_paths) - 1];
}

}  // namespace mpd
