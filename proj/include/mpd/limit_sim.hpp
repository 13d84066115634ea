#pragma once

// Simulation of the asymptotic null distribution
//   2^(1-gamma) * integral |G_x|_2^gamma / m(x)^(gamma-1) dx
// for the centered Gaussian field G with covariance
//   E[G_x G_y^T] = E[(Y-X) f(x-X) f(y-X) (Y-X)^T],
// the population weight m(x) being estimated by p_n(x). Two samplers:
//
//  * multiplier (default): G_x = n^(-1/2) sum_i zeta_i (Y_i-X_i) f(x-X_i)
//    with i.i.d. standard-normal multipliers zeta - the empirical
//    covariance above is exactly the covariance of this sum, each draw
//    costs O(n m d), and no (md)^2 matrix is ever formed.
//  * cholesky: assemble the dense grid covariance and factor it; kept as
//    a small-grid cross-check of the multiplier route.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <numeric>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <json.hpp>

#include "mpd/estimator.hpp"
#include "mpd/grid.hpp"
#include "mpd/kernel.hpp"
#include "mpd/parallel.hpp"
#include "mpd/rng.hpp"
#include "mpd/sample.hpp"

namespace mpd {

enum class SimMethod { cholesky, multiplier };

inline std::string to_string(SimMethod m) {
    return m == SimMethod::cholesky ? "cholesky" : "multiplier";
}

inline SimMethod sim_method_from_string(const std::string& s) {
    if (s == "cholesky") return SimMethod::cholesky;
    if (s == "multiplier") return SimMethod::multiplier;
    throw std::invalid_argument("unknown simulation method: " + s);
}

struct LimitDistribution {
    std::vector<double> draws;
    GridSpec grid;
    KernelSpec kernel;
    double gamma = 1.0;
    SimMethod method = SimMethod::multiplier;
    std::uint64_t seed = 0;
    std::string source_sample_digest;

    nlohmann::json to_json() const {
        nlohmann::json j;
        j["format_version"] = 1;
        j["draws"] = draws;
        j["grid"] = {{"lower", grid.lower}, {"upper", grid.upper}, {"step", grid.step}};
        j["kernel"] = kernel;
        j["gamma"] = gamma;
        j["method"] = to_string(method);
        j["seed"] = seed;
        j["n_sims"] = draws.size();
        j["source_sample_digest"] = source_sample_digest;
        return j;
    }

    static LimitDistribution from_json(const nlohmann::json& j) {
        LimitDistribution ld;
        ld.draws = j.at("draws").get<std::vector<double>>();
        ld.grid.lower = j.at("grid").at("lower").get<std::vector<double>>();
        ld.grid.upper = j.at("grid").at("upper").get<std::vector<double>>();
        ld.grid.step = j.at("grid").at("step").get<std::vector<double>>();
        ld.kernel = j.at("kernel").get<KernelSpec>();
        ld.gamma = j.at("gamma").get<double>();
        ld.method = sim_method_from_string(j.at("method").get<std::string>());
        ld.seed = j.at("seed").get<std::uint64_t>();
        ld.source_sample_digest = j.at("source_sample_digest").get<std::string>();
        return ld;
    }
};

/// Empirical field covariance E_n[(Y-X) f(x-X) f(y-X) (Y-X)^T], d x d.
inline Eigen::MatrixXd field_covariance(std::span<const double> x, std::span<const double> y,
                                        const PairedSample& sample, const KernelSpec& kernel) {
    detail::check_sample_dim(sample, kernel);
    check_dim(x, kernel);
    check_dim(y, kernel);
    const Kernel k(kernel);
    const int d = sample.d;
    const std::size_t n = sample.size();
    Eigen::MatrixXd out = Eigen::MatrixXd::Zero(d, d);
    for (std::size_t i = 0; i < n; ++i) {
        const double* xr = sample.xs.data() + i * d;
        const double fx = k.radial(detail::dist2(x, xr, d));
        const double fy = k.radial(detail::dist2(y, xr, d));
        const double f2 = fx * fy;
        for (int a = 0; a < d; ++a) {
            const double da = sample.ys[i * d + a] - xr[a];
            for (int b = 0; b < d; ++b)
                out(a, b) += da * (sample.ys[i * d + b] - xr[b]) * f2;
        }
    }
    return out / static_cast<double>(n);
}

namespace detail {

/// m x n matrix of kernel weights f(node_t - X_i) plus p_n per node.
inline void kernel_weights(const PairedSample& sample, const Kernel& k, const GridSpec& grid,
                           std::uint64_t node_begin, std::uint64_t node_end, Eigen::MatrixXd& F,
                           std::vector<double>& pn) {
    const int d = sample.d;
    const std::size_t n = sample.size();
    const std::uint64_t m = node_end - node_begin;
    F.resize(m, n);
    pn.assign(m, 0.0);
    parallel_for(0, m, [&](std::uint64_t t) {
        std::vector<double> x(d);
        grid.node(node_begin + t, x);
        double acc = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            const double f = k.radial(dist2(x, sample.xs.data() + i * d, d));
            F(t, i) = f;
            acc += f;
        }
        pn[t] = acc / static_cast<double>(n);
    });
}

/// Symmetrize, attempt LLT; on failure clip negative eigenvalues to zero,
/// add jitter 1e-10*trace, and fall back to the eigenvalue square root
/// (rank-deficient covariances are routine when n < grid nodes). Throws
/// naming the most negative eigenvalue when the input is genuinely
/// indefinite rather than PSD up to roundoff.
inline Eigen::MatrixXd cholesky_with_psd_repair(Eigen::MatrixXd cov) {
    cov = 0.5 * (cov + cov.transpose()).eval();
    Eigen::LLT<Eigen::MatrixXd> llt(cov);
    if (llt.info() == Eigen::Success) return llt.matrixL();
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(cov);
    if (es.info() != Eigen::Success)
        throw std::runtime_error("limit_sim: eigendecomposition failed during PSD repair");
    const double min_eig = es.eigenvalues().minCoeff();
    const double scale = std::max({std::fabs(cov.trace()), es.eigenvalues().cwiseAbs().maxCoeff(), 1e-300});
    if (min_eig < -1e-6 * scale)
        throw std::runtime_error(
            "limit_sim: covariance not positive semidefinite; most negative eigenvalue " +
            std::to_string(min_eig));
    const double jitter = 1e-10 * std::max(cov.trace(), 0.0);
    const Eigen::VectorXd clipped = (es.eigenvalues().cwiseMax(0.0).array() + jitter).matrix();
    return es.eigenvectors() * clipped.cwiseSqrt().asDiagonal();
}

}  // namespace detail

/// Raw Gaussian-field draws at every grid node (n_draws x m*d, node-major
/// columns). Dense in the grid size; meant for small grids and checks.
inline Eigen::MatrixXd simulate_field_draws(const PairedSample& sample, const KernelSpec& kernel,
                                            const GridSpec& grid, std::size_t n_draws,
                                            SimMethod method, std::uint64_t seed,
                                            std::uint64_t dense_cap = 4096) {
    detail::check_sample_dim(sample, kernel);
    grid.validate();
    const int d = sample.d;
    const std::size_t n = sample.size();
    const std::uint64_t m = grid.total_nodes();
    if (m * d > dense_cap)
        throw std::invalid_argument("simulate_field_draws: grid dimension " + std::to_string(m * d) +
                                    " exceeds dense cap " + std::to_string(dense_cap));
    const Kernel k(kernel);
    Eigen::MatrixXd F;
    std::vector<double> pn;
    detail::kernel_weights(sample, k, grid, 0, m, F, pn);

    Eigen::MatrixXd draws(n_draws, m * d);
    if (method == SimMethod::multiplier) {
        const double root_n = std::sqrt(static_cast<double>(n));
        parallel_for(0, n_draws, [&](std::uint64_t j) {
            RngStream rng(seed, j);
            Eigen::MatrixXd A(n, d);
            for (std::size_t i = 0; i < n; ++i) {
                const double z = rng.normal();
                for (int c = 0; c < d; ++c)
                    A(i, c) = z * (sample.ys[i * d + c] - sample.xs[i * d + c]);
            }
            const Eigen::MatrixXd G = F * A / root_n;  // m x d
            for (std::uint64_t t = 0; t < m; ++t)
                for (int c = 0; c < d; ++c) draws(j, t * d + c) = G(t, c);
        });
        return draws;
    }
    // cholesky: covariance of the stacked field, Sigma = B B^T / n with
    // B((t,c), i) = f(x_t - X_i) (Y_i - X_i)_c.
    Eigen::MatrixXd B(m * d, n);
    for (std::uint64_t t = 0; t < m; ++t)
        for (int c = 0; c < d; ++c)
            for (std::size_t i = 0; i < n; ++i)
                B(t * d + c, i) = F(t, i) * (sample.ys[i * d + c] - sample.xs[i * d + c]);
    const Eigen::MatrixXd cov = B * B.transpose() / static_cast<double>(n);
    const Eigen::MatrixXd L = detail::cholesky_with_psd_repair(cov);
    parallel_for(0, n_draws, [&](std::uint64_t j) {
        RngStream rng(seed, j);
        Eigen::VectorXd z(m * d);
        for (std::uint64_t i = 0; i < m * d; ++i) z(i) = rng.normal();
        draws.row(j) = (L * z).transpose();
    });
    return draws;
}

/// Seeded draws of the limit statistic. Multiplier streams nodes in fixed
/// chunks, so results are bitwise-identical for any worker count.
inline LimitDistribution simulate_limit(const PairedSample& sample, const MpdConfig& cfg,
                                        std::size_t n_sims, SimMethod method, std::uint64_t seed,
                                        std::uint64_t dense_cap = 4096) {
    cfg.validate();
    detail::check_sample_dim(sample, cfg.kernel);
    cfg.grid.check_node_cap();
    const int d = sample.d;
    const std::size_t n = sample.size();
    const std::uint64_t m = cfg.grid.total_nodes();
    const double gamma = cfg.gamma;
    const double w = cfg.grid.node_weight();
    const Kernel k(cfg.kernel);

    LimitDistribution ld;
    ld.grid = cfg.grid;
    ld.kernel = cfg.kernel;
    ld.gamma = gamma;
    ld.method = method;
    ld.seed = seed;
    ld.source_sample_digest = sample.digest();
    ld.draws.assign(n_sims, 0.0);

    if (method == SimMethod::cholesky) {
        const Eigen::MatrixXd field =
            simulate_field_draws(sample, cfg.kernel, cfg.grid, n_sims, method, seed, dense_cap);
        Eigen::MatrixXd F;
        std::vector<double> pn;
        detail::kernel_weights(sample, k, cfg.grid, 0, m, F, pn);
        parallel_for(0, n_sims, [&](std::uint64_t j) {
            double acc = 0.0;
            for (std::uint64_t t = 0; t < m; ++t) {
                double s = 0.0;
                for (int c = 0; c < d; ++c) s += field(j, t * d + c) * field(j, t * d + c);
                const double norm = std::sqrt(s);
                acc += gamma == 1.0 ? norm
                                    : (norm == 0.0 ? 0.0
                                                   : std::pow(norm, gamma) /
                                                         std::pow(pn[t], gamma - 1.0));
            }
            ld.draws[j] = std::exp2(1.0 - gamma) * acc * w;
        });
        return ld;
    }

    // multiplier
    Eigen::MatrixXd Z(n_sims, n);
    parallel_for(0, n_sims, [&](std::uint64_t j) {
        RngStream rng(seed, j);
        for (std::size_t i = 0; i < n; ++i) Z(j, i) = rng.normal();
    });
    Eigen::MatrixXd delta(n, d);
    for (std::size_t i = 0; i < n; ++i)
        for (int c = 0; c < d; ++c) delta(i, c) = sample.ys[i * d + c] - sample.xs[i * d + c];

    constexpr std::uint64_t kChunk = 4096;
    Eigen::MatrixXd F;
    std::vector<double> pn;
    for (std::uint64_t base = 0; base < m; base += kChunk) {
        const std::uint64_t cnt = std::min<std::uint64_t>(kChunk, m - base);
        detail::kernel_weights(sample, k, cfg.grid, base, base + cnt, F, pn);
        parallel_for(0, n_sims, [&](std::uint64_t j) {
            Eigen::MatrixXd A(n, d);
            for (std::size_t i = 0; i < n; ++i)
                for (int c = 0; c < d; ++c) A(i, c) = Z(j, i) * delta(i, c);
            const Eigen::MatrixXd G = F * A;  // cnt x d, scaled by sqrt(n) below
            double acc = 0.0;
            for (std::uint64_t t = 0; t < cnt; ++t) {
                double s = 0.0;
                for (int c = 0; c < d; ++c) s += G(t, c) * G(t, c);
                const double norm = std::sqrt(s);
                acc += gamma == 1.0 ? norm
                                    : (norm == 0.0 ? 0.0
                                                   : std::pow(norm, gamma) /
                                                         std::pow(pn[t], gamma - 1.0));
            }
            ld.draws[j] += acc;
        });
    }
    const double scale = std::exp2(1.0 - gamma) * w / std::pow(static_cast<double>(n), gamma / 2.0);
    for (auto& v : ld.draws) v *= scale;
    return ld;
}

/// Empirical (1-alpha)-quantile by the nearest-rank rule (no interpolation).
inline double critical_value(const LimitDistribution& ld, double alpha) {
    if (!(alpha > 0.0 && alpha < 1.0)) throw std::invalid_argument("critical_value: alpha outside (0,1)");
    const std::size_t n = ld.draws.size();
    if (n < 100) throw std::invalid_argument("critical_value: need at least 100 draws");
    if (alpha * static_cast<double>(n) < 1.0)
        throw std::invalid_argument("critical_value: insufficient draws for alpha=" + std::to_string(alpha));
    std::vector<double> sorted = ld.draws;
    std::sort(sorted.begin(), sorted.end());
    const auto rank = static_cast<std::size_t>(std::ceil((1.0 - alpha) * static_cast<double>(n)));
    return sorted[std::clamp<std::size_t>(rank, 1, n) - 1];
}

inline double limit_mean(const LimitDistribution& ld) {
    if (ld.draws.empty()) throw std::invalid_argument("limit_mean: no draws");
    return std::accumulate(ld.draws.begin(), ld.draws.end(), 0.0) /
           static_cast<double>(ld.draws.size());
}

/// Finite-sample upper bound on E[MPD^{*xi}(P_n, 1)]: the bracketed
/// expression of the n^(-1/2) rate bound with the universal constant set
/// to 1, all moments estimated from the sample. poly_tail only.
inline double finite_sample_bound(const PairedSample& sample, const KernelSpec& kernel, double p) {
    detail::check_sample_dim(sample, kernel);
    if (kernel.family != KernelFamily::poly_tail)
        throw std::invalid_argument("finite_sample_bound: unsupported for the gaussian family");
    kernel.validate();
    const int d = kernel.dim;
    if (!(p > d + 1)) throw std::invalid_argument("finite_sample_bound: requires p > d + 1");
    const double rho = kernel.rho, sigma = kernel.sigma;
    const std::size_t n = sample.size();
    const double q = p / (p - 1.0);

    double ex_2p = 0.0;  // E |X|_2^(2p)
    for (std::size_t i = 0; i < n; ++i) {
        double s = 0.0;
        for (int j = 0; j < d; ++j) s += sample.xs[i * d + j] * sample.xs[i * d + j];
        ex_2p += std::pow(s, p);
    }
    ex_2p /= static_cast<double>(n);

    double sum_norms = 0.0;  // sum_j ||X^j - Y^j||_2p
    for (int j = 0; j < d; ++j) {
        double mj = 0.0;
        for (std::size_t i = 0; i < n; ++i)
            mj += std::pow(std::fabs(sample.xs[i * d + j] - sample.ys[i * d + j]), 2.0 * p);
        mj /= static_cast<double>(n);
        sum_norms += std::pow(mj, 1.0 / (2.0 * p));
    }

    const double c_rho = normalization_constant(rho, d);
    const double moment = std::pow(ex_2p, 1.0 / (2.0 * q)) * std::pow(2.0, p - 1.0);
    const double tail = std::sqrt(d) * d * rho *
                            (moment * std::pow(sigma, -p) / (p - 1.0 - d) +
                             std::pow(2.0, rho + 1.0) / (sigma * (rho + 1.0 - d))) +
                        d * (moment * std::pow(sigma, -(p - 1.0)) / (p - 1.0 - d) +
                             std::pow(2.0, rho) / (rho - d));
    const double near = (std::sqrt(d) * rho * std::pow(sigma, -(d + 1.0)) + std::pow(sigma, -d)) *
                        (std::pow(sigma, d) + 1.0);
    return sum_norms * c_rho * (tail + near) / std::sqrt(static_cast<double>(n));
}

}  // namespace mpd
