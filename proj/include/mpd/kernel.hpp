#pragma once

// Smoothing densities: the polynomial-tail family
//   f(x) = sigma^-d * C_rho * (|x|_2/sigma + 1)^-rho
// and the isotropic Gaussian N(0, sigma^2 I_d). Both are
// martingality-preserving, radially symmetric and strictly positive.

#include <cmath>
#include <numbers>
#include <span>
#include <stdexcept>
#include <string>

#include <json.hpp>

#include "mpd/mathutil.hpp"

namespace mpd {

enum class KernelFamily { poly_tail, gaussian };

inline std::string to_string(KernelFamily f) {
    return f == KernelFamily::poly_tail ? "poly_tail" : "gaussian";
}

inline KernelFamily kernel_family_from_string(const std::string& s) {
    if (s == "poly_tail") return KernelFamily::poly_tail;
    if (s == "gaussian") return KernelFamily::gaussian;
    throw std::invalid_argument("unknown kernel family: " + s);
}

struct KernelSpec {
    KernelFamily family = KernelFamily::poly_tail;
    double rho = 5.0;   // tail exponent, poly_tail only
    double sigma = 1.0; // bandwidth
    int dim = 1;

    void validate() const {
        if (!(sigma > 0.0)) throw std::invalid_argument("kernel: sigma must be > 0");
        if (dim < 1) throw std::invalid_argument("kernel: dim must be >= 1");
        if (family == KernelFamily::poly_tail && !(rho > dim + 1))
            throw std::invalid_argument("kernel: poly_tail requires rho > dim + 1");
    }
};

inline void to_json(nlohmann::json& j, const KernelSpec& k) {
    j = nlohmann::json{{"family", to_string(k.family)}, {"rho", k.rho}, {"sigma", k.sigma}, {"dim", k.dim}};
}

inline void from_json(const nlohmann::json& j, KernelSpec& k) {
    k.family = kernel_family_from_string(j.at("family").get<std::string>());
    k.rho = j.value("rho", 0.0);
    k.sigma = j.at("sigma").get<double>();
    k.dim = j.at("dim").get<int>();
}

/// Normalizing constant C_rho of the poly_tail family at sigma = 1:
/// C_rho^-1 = omega_{d-1} * B(d, rho - d), with omega_{d-1} the surface
/// area of the unit sphere in R^d. Requires rho > dim (integrability).
inline double normalization_constant(double rho, int dim) {
    if (dim < 1) throw std::invalid_argument("normalization_constant: dim must be >= 1");
    if (!(rho > dim))
        throw std::invalid_argument("normalization_constant: density not integrable (rho <= dim)");
    const double log_omega = std::log(2.0) + 0.5 * dim * std::log(std::numbers::pi) -
                             std::lgamma(0.5 * dim);
    const double log_beta = std::lgamma(static_cast<double>(dim)) + std::lgamma(rho - dim) -
                            std::lgamma(rho);
    return std::exp(-(log_omega + log_beta));
}

/// Precomputed evaluator; radial forms take r = |x|_2 directly.
class Kernel {
  public:
    explicit Kernel(const KernelSpec& spec) : spec_(spec) {
        spec.validate();
        if (spec.family == KernelFamily::poly_tail) {
            const double c_rho = normalization_constant(spec.rho, spec.dim);
            scale_ = c_rho * std::pow(spec.sigma, -spec.dim);
            log_scale_ = std::log(c_rho) - spec.dim * std::log(spec.sigma);
            const double r = std::round(spec.rho);
            rho_int_ = (std::fabs(spec.rho - r) < 1e-12 && r > 0 && r < 64) ? static_cast<int>(r) : -1;
        } else {
            log_scale_ = -0.5 * spec.dim * std::log(2.0 * std::numbers::pi * spec.sigma * spec.sigma);
            scale_ = std::exp(log_scale_);
        }
        inv_sigma_ = 1.0 / spec.sigma;
    }

    const KernelSpec& spec() const { return spec_; }

    double radial(double r) const {
        if (spec_.family == KernelFamily::poly_tail) {
            const double u = 1.0 / (1.0 + r * inv_sigma_);
            return scale_ * (rho_int_ > 0 ? pow_int(u, rho_int_) : std::pow(u, spec_.rho));
        }
        const double z = r * inv_sigma_;
        return scale_ * std::exp(-0.5 * z * z);
    }

    double log_radial(double r) const {
        if (spec_.family == KernelFamily::poly_tail)
            return log_scale_ - spec_.rho * std::log1p(r * inv_sigma_);
        const double z = r * inv_sigma_;
        return log_scale_ - 0.5 * z * z;
    }

    /// |grad f|_2 at radius r; poly_tail only.
    double gradient_norm_radial(double r) const {
        if (spec_.family != KernelFamily::poly_tail)
            throw std::invalid_argument("density_gradient_norm: unsupported for the gaussian family");
        const double u = 1.0 / (1.0 + r * inv_sigma_);
        const double p = rho_int_ > 0 ? pow_int(u, rho_int_ + 1) : std::pow(u, spec_.rho + 1.0);
        return spec_.rho * inv_sigma_ * scale_ * p;
    }

    double operator()(std::span<const double> x) const { return radial(norm2(x)); }

    static double norm2(std::span<const double> x) {
        double s = 0.0;
        for (double v : x) s += v * v;
        return std::sqrt(s);
    }

  private:
    KernelSpec spec_;
    double scale_ = 0.0;
    double log_scale_ = 0.0;
    double inv_sigma_ = 1.0;
    int rho_int_ = -1;
};

namespace detail {

/// Euclidean distance between a and the d-vector at b.
inline double dist2(std::span<const double> a, const double* b, int d) {
    double s = 0.0;
    for (int j = 0; j < d; ++j) {
        const double t = a[j] - b[j];
        s += t * t;
    }
    return std::sqrt(s);
}

}  // namespace detail

inline void check_dim(std::span<const double> x, const KernelSpec& spec) {
    if (static_cast<int>(x.size()) != spec.dim)
        throw std::invalid_argument("kernel: point dimension " + std::to_string(x.size()) +
                                    " does not match spec.dim " + std::to_string(spec.dim));
}

/// f_{xi,rho,sigma}(x), or the N(0, sigma^2 I) density for the gaussian family.
inline double density(std::span<const double> x, const KernelSpec& spec) {
    check_dim(x, spec);
    return Kernel(spec).radial(Kernel::norm2(x));
}

/// |grad f_{xi,rho,sigma}(x)|_2 = rho sigma^-(d+1) C_rho (|x/sigma|_2 + 1)^-(rho+1).
inline double density_gradient_norm(std::span<const double> x, const KernelSpec& spec) {
    check_dim(x, spec);
    return Kernel(spec).gradient_norm_radial(Kernel::norm2(x));
}

}  // namespace mpd
