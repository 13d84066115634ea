#pragma once

// Seeded synthetic couplings: every data-generating process used by the
// test harnesses, plus the Markov-kernel pair lift
//   X_t(i) = U_t,  Y_t(i) = U_t + v_i(U_{t+1}) - (Kv_i)(U_t).
// Generation is single-threaded per stream so draw order is fixed;
// distinct (seed, stream) pairs are independent.

#include <cmath>
#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "mpd/mathutil.hpp"
#include "mpd/rng.hpp"
#include "mpd/sample.hpp"

namespace mpd {

enum class GeneratorId { random_walk, hermite, shift, cross_dim, gauss_markov, cashflow, uniform };

inline std::string to_string(GeneratorId id) {
    switch (id) {
        case GeneratorId::random_walk: return "random_walk";
        case GeneratorId::hermite: return "hermite";
        case GeneratorId::shift: return "shift";
        case GeneratorId::cross_dim: return "cross_dim";
        case GeneratorId::gauss_markov: return "gauss_markov";
        case GeneratorId::cashflow: return "cashflow";
        case GeneratorId::uniform: return "uniform";
    }
    throw std::invalid_argument("unknown generator id");
}

inline GeneratorId generator_id_from_string(const std::string& s) {
    if (s == "random_walk") return GeneratorId::random_walk;
    if (s == "hermite") return GeneratorId::hermite;
    if (s == "shift") return GeneratorId::shift;
    if (s == "cross_dim") return GeneratorId::cross_dim;
    if (s == "gauss_markov") return GeneratorId::gauss_markov;
    if (s == "cashflow") return GeneratorId::cashflow;
    if (s == "uniform") return GeneratorId::uniform;
    throw std::invalid_argument("unknown generator: " + s);
}

struct GeneratorSpec {
    GeneratorId id = GeneratorId::random_walk;
    std::uint64_t seed = 0;
    int dims = 1;              // random_walk, shift, uniform
    int k = 1;                 // hermite order
    double epsilon = 0.0;      // shift perturbation
    double kappa = 0.5;        // gauss_markov autoregression
    double rate = 1.0;         // cashflow discount rate r
    double lambda_p = 2.0;     // cashflow jump intensity
    double gamma_shape = 2.0;  // cashflow jump-size Gamma shape
    double gamma_scale = 3.0;  // cashflow jump-size Gamma scale
    bool bounded = false;      // clip values to [-bound, bound]
    double bound = 10.0;
    std::size_t kv_mc_inner = 100000;  // inner draws for Monte-Carlo Kv

    void validate() const {
        if (dims < 1) throw std::invalid_argument("generator: dims must be >= 1");
        if (k < 0) throw std::invalid_argument("generator: hermite order must be >= 0");
        if (!(kappa >= 0.0 && kappa <= 1.0))
            throw std::invalid_argument("generator: kappa must lie in [0,1]");
        if (!(rate > 0.0)) throw std::invalid_argument("generator: rate must be > 0");
        if (!(lambda_p >= 0.0)) throw std::invalid_argument("generator: lambda_p must be >= 0");
        if (!(gamma_shape > 0.0 && gamma_scale > 0.0))
            throw std::invalid_argument("generator: gamma shape/scale must be > 0");
        if (!(bound > 0.0)) throw std::invalid_argument("generator: bound must be > 0");
    }
};

/// Probabilists' Hermite polynomial H_k via the three-term recurrence
/// H_{k+1}(x) = x H_k(x) - k H_{k-1}(x), H_0 = 1, H_1 = x.
inline double hermite_polynomial(int k, double x) {
    if (k < 0) throw std::invalid_argument("hermite_polynomial: k must be >= 0");
    if (k == 0) return 1.0;
    double prev = 1.0, cur = x;
    for (int j = 1; j < k; ++j) {
        const double next = x * cur - static_cast<double>(j) * prev;
        prev = cur;
        cur = next;
    }
    return cur;
}

using ScalarFn = std::function<double(double)>;
/// Draws one transition U' | U = u.
using KernelSampler = std::function<double(double, RngStream&)>;

/// Pair lift of a scalar Markov series under test functions v_1..v_d.
/// Entries of kv may be empty; those coordinates estimate (Kv_i)(u) by
/// averaging v_i over m_inner sampler draws started from u.
inline PairedSample markov_pair_lift(std::span<const double> series, const std::vector<ScalarFn>& v,
                                     const std::vector<ScalarFn>& kv,
                                     const KernelSampler& sampler = nullptr,
                                     std::size_t m_inner = 100000, std::uint64_t seed = 0) {
    if (series.size() < 2) throw std::invalid_argument("markov_pair_lift: series needs >= 2 states");
    if (v.empty() || v.size() != kv.size())
        throw std::invalid_argument("markov_pair_lift: mismatched v/Kv lists");
    const int d = static_cast<int>(v.size());
    bool needs_mc = false;
    for (const auto& f : kv) needs_mc = needs_mc || !f;
    if (needs_mc && (!sampler || m_inner == 0))
        throw std::invalid_argument("markov_pair_lift: Monte-Carlo Kv requires a sampler and m_inner > 0");

    PairedSample out;
    out.d = d;
    const std::size_t n = series.size() - 1;
    out.xs.reserve(n * d);
    out.ys.reserve(n * d);
    for (std::size_t t = 0; t < n; ++t) {
        const double u = series[t], u_next = series[t + 1];
        std::vector<double> kv_mc;
        if (needs_mc) {
            kv_mc.assign(d, 0.0);
            RngStream rng(seed, t);
            for (std::size_t s = 0; s < m_inner; ++s) {
                const double draw = sampler(u, rng);
                for (int i = 0; i < d; ++i)
                    if (!kv[i]) kv_mc[i] += v[i](draw);
            }
            for (int i = 0; i < d; ++i) kv_mc[i] /= static_cast<double>(m_inner);
        }
        for (int i = 0; i < d; ++i) {
            out.xs.push_back(u);
            const double kvi = kv[i] ? kv[i](u) : kv_mc[i];
            out.ys.push_back(u + v[i](u_next) - kvi);
        }
    }
    return out;
}

namespace detail {

inline double clip(double x, double b) { return std::min(std::max(x, -b), b); }

inline std::vector<double> gauss_markov_series(const GeneratorSpec& spec, std::size_t len,
                                               RngStream& rng) {
    std::vector<double> u(len);
    u[0] = spec.kappa < 1.0 ? rng.normal() / std::sqrt(1.0 - spec.kappa * spec.kappa) : 0.0;
    for (std::size_t t = 1; t < len; ++t) u[t] = spec.kappa * u[t - 1] + rng.normal();
    return u;
}

/// U_{t+1} = e^-r U_t + sum over jumps in (t, t+1] of e^-r(t+1-s) S, with
/// Pois(lambda_p) jump counts, uniform jump times and Gamma(shape, scale)
/// jump sizes.
inline std::vector<double> cashflow_series(const GeneratorSpec& spec, std::size_t len,
                                           RngStream& rng) {
    std::vector<double> u(len);
    u[0] = 0.0;
    const double disc = std::exp(-spec.rate);
    for (std::size_t t = 1; t < len; ++t) {
        double inflow = 0.0;
        const std::uint64_t jumps = rng.poisson(spec.lambda_p);
        for (std::uint64_t j = 0; j < jumps; ++j) {
            const double s = rng.uniform();  // jump time within the unit interval
            const double size = rng.gamma(spec.gamma_shape, spec.gamma_scale);
            inflow += std::exp(-spec.rate * (1.0 - s)) * size;
        }
        u[t] = disc * u[t - 1] + inflow;
    }
    return u;
}

}  // namespace detail

/// Kv for the gauss_markov chain under v(x) = x.
inline double gauss_markov_kv1(double kappa, double u) { return kappa * u; }

/// Kv for the gauss_markov chain under v(x) = x 1{x > 0}:
/// E[(kappa u + Z)^+] = kappa u Phi(kappa u) + phi(kappa u).
inline double gauss_markov_kv2(double kappa, double u) {
    const double a = kappa * u;
    return a * normal_cdf(a) + normal_pdf(a);
}

/// Kv for the cashflow chain under v(x) = x:
/// e^-r u + lambda * E[S] * (1 - e^-r)/r.
inline double cashflow_kv1(const GeneratorSpec& spec, double u) {
    return std::exp(-spec.rate) * u + spec.lambda_p * spec.gamma_shape * spec.gamma_scale *
                                          (1.0 - std::exp(-spec.rate)) / spec.rate;
}

/// n paired draws from the configured coupling; deterministic under seed.
inline PairedSample generate(const GeneratorSpec& spec, std::size_t n) {
    spec.validate();
    if (n < 1) throw std::invalid_argument("generate: n must be >= 1");
    RngStream rng(spec.seed, 0);
    PairedSample out;

    switch (spec.id) {
        case GeneratorId::random_walk: {
            const int d = spec.dims;
            out.d = d;
            for (std::size_t i = 0; i < n; ++i) {
                std::vector<double> x(d), y(d);
                for (int j = 0; j < d; ++j) x[j] = rng.normal();
                for (int j = 0; j < d; ++j) y[j] = x[j] + rng.normal();
                if (spec.bounded)
                    for (int j = 0; j < d; ++j) {
                        x[j] = detail::clip(x[j], spec.bound);
                        y[j] = detail::clip(y[j], spec.bound);
                    }
                out.push_back(x, y);
            }
            return out;
        }
        case GeneratorId::hermite: {
            out.d = 1;
            const double norm = std::exp(-0.5 * std::lgamma(static_cast<double>(spec.k) + 1.0));
            for (std::size_t i = 0; i < n; ++i) {
                double x = rng.normal();
                if (spec.bounded) x = detail::clip(x, spec.bound);
                double dy = hermite_polynomial(spec.k, x) * norm;
                if (spec.bounded) dy = detail::clip(dy, spec.bound);
                const double xv[] = {x};
                const double yv[] = {x + dy};
                out.push_back(xv, yv);
            }
            return out;
        }
        case GeneratorId::shift: {
            const int d = spec.dims;
            out.d = d;
            for (std::size_t i = 0; i < n; ++i) {
                std::vector<double> x(d), y(d);
                for (int j = 0; j < d; ++j) x[j] = rng.normal();
                for (int j = 0; j < d; ++j) y[j] = x[j] + rng.normal() + spec.epsilon;
                out.push_back(x, y);
            }
            return out;
        }
        case GeneratorId::cross_dim: {
            out.d = 2;
            for (std::size_t i = 0; i < n; ++i) {
                double a = rng.normal(), b = rng.normal();
                if (spec.bounded) {
                    a = detail::clip(a, spec.bound);
                    b = detail::clip(b, spec.bound);
                }
                const double s = a + b;
                const double xv[] = {a, b};
                const double yv[] = {s, s};
                out.push_back(xv, yv);
            }
            return out;
        }
        case GeneratorId::uniform: {
            const int d = spec.dims;
            out.d = d;
            for (std::size_t i = 0; i < n; ++i) {
                std::vector<double> x(d), y(d);
                for (int j = 0; j < d; ++j) x[j] = rng.uniform() - 0.5;
                for (int j = 0; j < d; ++j) y[j] = x[j] + rng.uniform() - 0.5;
                out.push_back(x, y);
            }
            return out;
        }
        case GeneratorId::gauss_markov: {
            const auto series = detail::gauss_markov_series(spec, n + 1, rng);
            const double kappa = spec.kappa;
            const std::vector<ScalarFn> v = {[](double x) { return x; },
                                             [](double x) { return x > 0.0 ? x : 0.0; }};
            const std::vector<ScalarFn> kv = {
                [kappa](double u) { return gauss_markov_kv1(kappa, u); },
                [kappa](double u) { return gauss_markov_kv2(kappa, u); }};
            return markov_pair_lift(series, v, kv);
        }
        case GeneratorId::cashflow: {
            const auto series = detail::cashflow_series(spec, n + 1, rng);
            const GeneratorSpec s = spec;
            const std::vector<ScalarFn> v = {[](double x) { return x; },
                                             [](double x) { return x > 0.0 ? x : 0.0; }};
            // Kv for v_2 has no closed form here; estimate it by inner MC.
            const std::vector<ScalarFn> kv = {[s](double u) { return cashflow_kv1(s, u); },
                                              nullptr};
            const KernelSampler sampler = [s](double u, RngStream& r) {
                double inflow = 0.0;
                const std::uint64_t jumps = r.poisson(s.lambda_p);
                for (std::uint64_t j = 0; j < jumps; ++j) {
                    const double time = r.uniform();
                    inflow += std::exp(-s.rate * (1.0 - time)) * r.gamma(s.gamma_shape, s.gamma_scale);
                }
                return std::exp(-s.rate) * u + inflow;
            };
            return markov_pair_lift(series, v, kv, sampler, spec.kv_mc_inner,
                                    mix_seed(spec.seed, 0x6b76));
        }
    }
    throw std::invalid_argument("generate: invalid generator id");
}

}  // namespace mpd
