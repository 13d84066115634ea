#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <numbers>
#include <vector>

#include "mpd/kernel.hpp"
#include "mpd/rng.hpp"
#include "support/quadrature.hpp"

using mpd::density;
using mpd::density_gradient_norm;
using mpd::KernelFamily;
using mpd::KernelSpec;
using mpd::normalization_constant;

namespace {

KernelSpec poly(double rho, double sigma, int dim) {
    return {KernelFamily::poly_tail, rho, sigma, dim};
}

KernelSpec gauss(double sigma, int dim) { return {KernelFamily::gaussian, 0.0, sigma, dim}; }

double quadrature_constant(double rho, int d) {
    return 1.0 / oracle::integrate_radial([rho](double r) { return std::pow(1.0 + r, -rho); }, d,
                                          1e13, 1e-12);
}

}  // namespace

TEST_CASE("normalization constant matches the quadrature oracle", "[kernel]") {
    CHECK(normalization_constant(5.0, 1) == Catch::Approx(2.0).epsilon(1e-12));
    CHECK(normalization_constant(2.0, 1) == Catch::Approx(0.5).epsilon(1e-12));
    CHECK(normalization_constant(5.0, 2) == Catch::Approx(6.0 / std::numbers::pi).epsilon(1e-12));
    for (double rho : {2.5, 4.0, 5.0, 8.0})
        for (int d : {1, 2, 3}) {
            if (!(rho > d)) continue;
            CHECK(normalization_constant(rho, d) ==
                  Catch::Approx(quadrature_constant(rho, d)).epsilon(1e-5));
        }
    CHECK_THROWS_AS(normalization_constant(1.0, 1), std::invalid_argument);
    CHECK_THROWS_AS(normalization_constant(2.0, 2), std::invalid_argument);
}

TEST_CASE("density point values", "[kernel]") {
    const double x0[] = {0.0};
    const double x1[] = {1.0};
    CHECK(density(x0, poly(5, 1, 1)) == Catch::Approx(2.0).epsilon(1e-12));
    CHECK(density(x1, poly(5, 1, 1)) == Catch::Approx(0.0625).epsilon(1e-12));
    CHECK(density(x0, poly(5, 2, 1)) == Catch::Approx(1.0).epsilon(1e-12));
    // gaussian: N(0, sigma^2 I)
    CHECK(density(x0, gauss(1, 1)) == Catch::Approx(1.0 / std::sqrt(2 * std::numbers::pi)));
    CHECK(density(x1, gauss(2, 1)) ==
          Catch::Approx(std::exp(-0.125) / (2.0 * std::sqrt(2 * std::numbers::pi))));
    const double x2[] = {1.0, 2.0};
    CHECK_THROWS_AS(density(x2, poly(5, 1, 1)), std::invalid_argument);
}

TEST_CASE("densities integrate to one", "[kernel]") {
    for (int d : {1, 2})
        for (double sigma : {0.5, 1.0, 10.0}) {
            for (double rho : {3.0, 5.0, 8.0}) {
                if (!(rho > d + 1)) continue;  // family constraint
                const mpd::Kernel k(poly(rho, sigma, d));
                const double mass = oracle::integrate_radial(
                    [&](double r) { return k.radial(r); }, d, 1e6 * sigma, 1e-9);
                CHECK(mass == Catch::Approx(1.0).margin(1e-4));
            }
            const mpd::Kernel k(gauss(sigma, d));
            const double mass = oracle::integrate_radial([&](double r) { return k.radial(r); }, d,
                                                         60.0 * sigma, 1e-11);
            CHECK(mass == Catch::Approx(1.0).margin(1e-4));
        }
}

TEST_CASE("radial symmetry is exact", "[kernel]") {
    mpd::RngStream rng(5, 0);
    for (int d : {1, 2, 3}) {
        const KernelSpec spec = poly(6, 1.5, d);
        for (int rep = 0; rep < 50; ++rep) {
            std::vector<double> x(d), neg(d);
            for (int j = 0; j < d; ++j) {
                x[j] = 3.0 * rng.normal();
                neg[j] = -x[j];
            }
            CHECK(density(x, spec) == density(neg, spec));
        }
    }
}

TEST_CASE("gradient norm closed form", "[kernel]") {
    const double x0[] = {0.0};
    const double x1[] = {1.0};
    CHECK(density_gradient_norm(x0, poly(5, 1, 1)) == Catch::Approx(10.0).epsilon(1e-12));
    CHECK(density_gradient_norm(x1, poly(5, 1, 1)) == Catch::Approx(10.0 / 64.0).epsilon(1e-12));
    CHECK_THROWS_AS(density_gradient_norm(x0, gauss(1, 1)), std::invalid_argument);

    // scaling identity: value at sigma=2 equals value at x/2 (sigma=1) / 2^(d+1)
    mpd::RngStream rng(17, 0);
    for (int d : {1, 2}) {
        for (int rep = 0; rep < 20; ++rep) {
            std::vector<double> x(d), half(d);
            for (int j = 0; j < d; ++j) {
                x[j] = 4.0 * rng.normal();
                half[j] = 0.5 * x[j];
            }
            CHECK(density_gradient_norm(x, poly(5, 2, d)) ==
                  Catch::Approx(density_gradient_norm(half, poly(5, 1, d)) /
                                mpd::pow_int(2.0, d + 1))
                      .epsilon(1e-12));
        }
    }
}

TEST_CASE("finite differences confirm the gradient norm", "[kernel]") {
    mpd::RngStream rng(23, 0);
    const double h = 1e-6;
    for (int d : {1, 2}) {
        const KernelSpec spec = poly(5, 1, d);
        for (int rep = 0; rep < 100; ++rep) {
            std::vector<double> x(d);
            for (int j = 0; j < d; ++j) x[j] = 2.5 * rng.normal();
            if (mpd::Kernel::norm2(x) < 0.05) continue;  // kink at the origin
            double g2 = 0.0;
            for (int j = 0; j < d; ++j) {
                std::vector<double> hi = x, lo = x;
                hi[j] += h;
                lo[j] -= h;
                const double gj = (density(hi, spec) - density(lo, spec)) / (2.0 * h);
                g2 += gj * gj;
            }
            CHECK(std::sqrt(g2) ==
                  Catch::Approx(density_gradient_norm(x, spec)).epsilon(1e-4));
        }
    }
}

TEST_CASE("kernel spec json round trip", "[kernel]") {
    const nlohmann::json j = poly(5, 1, 1);
    CHECK(j == nlohmann::json::parse(R"({"family":"poly_tail","rho":5.0,"sigma":1.0,"dim":1})"));
    const auto back = j.get<KernelSpec>();
    CHECK(back.family == KernelFamily::poly_tail);
    CHECK(back.rho == 5.0);
    CHECK(back.sigma == 1.0);
    CHECK(back.dim == 1);
}

TEST_CASE("invalid specs are rejected", "[kernel]") {
    CHECK_THROWS_AS(poly(5, 0.0, 1).validate(), std::invalid_argument);
    CHECK_THROWS_AS(poly(5, 1, 0).validate(), std::invalid_argument);
    CHECK_THROWS_AS(poly(2, 1, 1).validate(), std::invalid_argument);  // rho <= dim+1
    CHECK_NOTHROW(gauss(1, 3).validate());
}
