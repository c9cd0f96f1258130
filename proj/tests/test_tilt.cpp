#include <doctest.h>

#include <cmath>
#include <numbers>

#include "tklab/tilt.hpp"

using namespace tklab;

namespace {

// quadrature oracle for the circle normalizer (1/2pi) int e^{k cos t} dt
double circle_normalizer_quadrature(double kappa) {
    const int n = 20000;
    double s = 0.0;
    for (int i = 0; i < n; ++i) {
        const double t =
            2.0 * std::numbers::pi * (static_cast<double>(i) + 0.5) / n;
        s += std::exp(kappa * std::cos(t));
    }
    return s / n;
}

}  // namespace

TEST_SUITE_BEGIN("tilt");

TEST_CASE("circle normalizer matches quadrature") {
    for (double kappa : {0.1, 0.5, 1.0, 1.7}) {
        CHECK(log_sphere_tilt_normalizer(kappa, 2) ==
              doctest::Approx(std::log(circle_normalizer_quadrature(kappa)))
                  .epsilon(1e-8));
    }
    CHECK(log_sphere_tilt_normalizer(0.0, 2) == 0.0);
}

TEST_CASE("three-sphere normalizer has the sinh closed form") {
    for (double kappa : {0.2, 0.9, 1.5}) {
        CHECK(log_sphere_tilt_normalizer(kappa, 3) ==
              doctest::Approx(std::log(std::sinh(kappa) / kappa)).epsilon(1e-12));
    }
}

TEST_CASE("table interpolation is accurate and falls back out of range") {
    const TiltNormalizerTable table(2, 1.2);
    for (double kappa : {0.01, 0.37, 0.81, 1.19}) {
        CHECK(table.log_z(kappa) ==
              doctest::Approx(log_sphere_tilt_normalizer(kappa, 2))
                  .epsilon(1e-7));
    }
    CHECK(table.log_z(2.5) ==
          doctest::Approx(log_sphere_tilt_normalizer(2.5, 2)).epsilon(1e-12));
}

TEST_CASE("tilted draws live on the sphere and have the right mean cosine") {
    for (int dim : {2, 3, 5}) {
        const double kappa = 1.1;
        std::vector<double> dir(static_cast<std::size_t>(dim), 0.0);
        dir[0] = 2.0;  // unnormalized direction is fine
        RngStream rng = derive_stream(77, "vmf", static_cast<std::uint64_t>(dim));
        std::vector<double> a(static_cast<std::size_t>(dim));
        const std::size_t n = 40000;
        double mean_cos = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            sample_sphere_tilted(dir, kappa, rng, a);
            double norm2 = 0.0;
            for (double v : a) norm2 += v * v;
            REQUIRE(std::abs(norm2 - 1.0) < 1e-9);
            mean_cos += a[0];
        }
        mean_cos /= static_cast<double>(n);
        const double expect = sphere_tilt_mean_cosine(kappa, dim);
        // 3 sigma band; the cosine has variance < 1
        CHECK(std::abs(mean_cos - expect) <
              3.0 / std::sqrt(static_cast<double>(n)));
    }
}

TEST_CASE("zero concentration reduces to the uniform law") {
    std::vector<double> dir = {1.0, 0.0};
    RngStream rng = derive_stream(3, "vmf-uniform");
    std::vector<double> a(2);
    double mean = 0.0;
    const std::size_t n = 40000;
    for (std::size_t i = 0; i < n; ++i) {
        sample_sphere_tilted(dir, 0.0, rng, a);
        mean += a[0];
    }
    CHECK(std::abs(mean / static_cast<double>(n)) <
          3.0 / std::sqrt(static_cast<double>(n)));
}

TEST_SUITE_END();
