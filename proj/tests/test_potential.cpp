#include <doctest.h>

#include <cmath>

#include "tklab/potential.hpp"

using namespace tklab;

namespace {

Config sphere_config_all(const AlphabetPtr& alph, std::size_t depth,
                         std::span<const double> point) {
    Config c;
    c.alphabet = alph;
    c.coords.resize(depth * point.size());
    for (std::size_t i = 0; i < depth; ++i)
        std::copy(point.begin(), point.end(),
                  c.coords.begin() +
                      static_cast<std::ptrdiff_t>(i * point.size()));
    return c;
}

// independent partial-sum oracle for sum_{n=1}^{m} n^{-2-eps}
double coupling_partial(double eps, std::size_t m) {
    double s = 0.0;
    for (std::size_t n = 1; n <= m; ++n)
        s += std::pow(static_cast<double>(n), -2.0 - eps);
    return s;
}

}  // namespace

TEST_SUITE_BEGIN("potential");

TEST_CASE("dyson sphere on a constant configuration sums the couplings") {
    auto alph = Alphabet::sphere(2);
    const DysonSpherePotential f(1.0, 2);
    const std::vector<double> e = {1.0, 0.0};
    for (std::size_t depth : {8u, 32u, 128u}) {
        const Config x = sphere_config_all(alph, depth, e);
        CHECK(f.eval(x) == doctest::Approx(coupling_partial(1.0, depth - 1))
                               .epsilon(1e-14));
    }
    // converges to zeta(3) = 1.2020569... as the depth grows
    const Config deep = sphere_config_all(alph, 4096, e);
    CHECK(f.eval(deep) == doctest::Approx(1.2020569).epsilon(1e-6));
    // truncation error against a much longer sum obeys the declared bound
    const double full = coupling_partial(1.0, 2000000);
    for (std::size_t depth : {8u, 64u, 256u}) {
        const Config x = sphere_config_all(alph, depth, e);
        CHECK(std::abs(full - f.eval(x)) <= f.tail_bound(depth));
    }
}

TEST_CASE("dyson sphere sign symmetry under tail negation") {
    auto alph = Alphabet::sphere(3);
    const DysonSpherePotential f(0.7, 3);
    auto mu = AprioriMeasure::sphere_uniform(alph);
    RngStream rng = derive_stream(4, "dyson-sign");
    Config x = sample_config(mu, 24, rng);
    Config y = x;
    for (std::size_t i = 1; i < y.depth(); ++i)
        for (double& v : y.mutable_point(i)) v = -v;
    CHECK(f.eval(y) == doctest::Approx(-f.eval(x)).epsilon(1e-13));
}

TEST_CASE("potential bounds and minimum depth are enforced") {
    const DysonSpherePotential f(3.0, 2);
    auto alph = Alphabet::sphere(2);
    const std::vector<double> e = {0.0, 1.0};
    const Config shallow = sphere_config_all(alph, 1, e);
    CHECK_THROWS_AS((void)eval_potential(f, shallow), std::invalid_argument);
    auto mu = AprioriMeasure::sphere_uniform(alph);
    RngStream rng = derive_stream(8, "bounds");
    for (int t = 0; t < 100; ++t) {
        const Config x = sample_config(mu, 16, rng);
        const double v = f.eval(x);
        CHECK(v <= f.sup_bound());
        CHECK(v >= f.inf_bound());
    }
}

TEST_CASE("dyson half line is nonnegative and bounded") {
    const DysonHalfLinePotential f(1.5);
    auto alph = Alphabet::half_line();
    auto mu = AprioriMeasure::half_line_exponential(alph);
    RngStream rng = derive_stream(12, "halfline");
    for (int t = 0; t < 200; ++t) {
        const Config x = sample_config(mu, 32, rng);
        const double v = f.eval(x);
        CHECK(v >= 0.0);
        CHECK(v <= f.sup_bound());
    }
}

TEST_CASE("birkhoff sums") {
    const ConstantPotential c7(0.35);
    auto alph = Alphabet::finite({0.0, 1.0});
    Config x;
    x.alphabet = alph;
    x.coords = {1, 1, 1, 1};
    std::vector<Config> path(7, x);
    CHECK(birkhoff_sum(c7, path) == doctest::Approx(7 * 0.35));
    CHECK(birkhoff_sum(c7, std::span<const Config>(path.data(), 1)) ==
          doctest::Approx(0.35));
    CHECK_THROWS_AS((void)birkhoff_sum(c7, {}), std::invalid_argument);

    // beta x1 x2 with beta = 1: word (1,1) prepended to all-ones
    FiniteRangePotential pair(alph, 2, {0.0, 0.0, 0.0, 1.0});
    Config ones;
    ones.alphabet = alph;
    ones.coords = {1, 1, 1, 1, 1, 1};
    const double one = 1.0;
    Config p1 = prepend(std::span<const double>(&one, 1), ones);
    Config p2 = prepend(std::span<const double>(&one, 1), p1);
    std::vector<Config> word_path = {p1, p2};
    CHECK(birkhoff_sum(pair, word_path) == doctest::Approx(2.0));
}

TEST_CASE("modulus of continuity shape and the linear domination bound") {
    const auto omega = ModulusOfContinuity::log_modulus(1.0);
    CHECK(omega(0.0) == 0.0);
    CHECK(omega(-1.0) == 0.0);
    double prev = 0.0;
    for (int i = 1; i <= 50; ++i) {
        const double t = static_cast<double>(i) / 50.0;
        CHECK(omega(t) >= prev);
        prev = omega(t);
    }
    CHECK(omega.r0() > 1.0);  // strictly above the diameter
    const double d_omega = omega.linear_domination_constant();
    for (int i = 1; i <= 200; ++i) {
        const double t = static_cast<double>(i) / 200.0;
        CHECK(t <= d_omega * omega(t) * (1.0 + 1e-12));
    }
    CHECK_THROWS_AS(ModulusOfContinuity::log_modulus(1.0, 0.5),
                    std::invalid_argument);
    const auto pw = ModulusOfContinuity::power(0.5);
    CHECK(pw(0.25) == doctest::Approx(0.5));
}

TEST_CASE("holder estimate: constants give zero, projections obey the bound") {
    auto alph = Alphabet::sphere(2);
    auto mu = AprioriMeasure::sphere_uniform(alph);
    const auto omega = ModulusOfContinuity::log_modulus(1.0);

    const ConstantPotential c(1.23);
    const auto rep_c = estimate_holder(c, omega, mu, 16, 500, 11);
    CHECK(rep_c.estimate == 0.0);

    // first-component projection pi_{1,1}: |pi(x)-pi(y)| <= 2 d(x,y)
    // and t <= D_omega omega(t), so the ratio stays below 2 D_omega
    struct Projection final : Potential {
        double eval(const Config& x) const override { return x.point(0)[0]; }
        double sup_bound() const override { return 1.0; }
        double inf_bound() const override { return -1.0; }
        double tail_bound(std::size_t) const override { return 0.0; }
        std::string name() const override { return "projection"; }
    } proj;
    const auto rep_p = estimate_holder(proj, omega, mu, 16, 4000, 13);
    CHECK(rep_p.estimate <= 2.0 * omega.linear_domination_constant());
    CHECK(rep_p.estimate > 0.0);
    CHECK(rep_p.max_x.has_value());
}

TEST_CASE("holder estimate of the dyson potential is stable in the sample count") {
    auto alph = Alphabet::sphere(2);
    auto mu = AprioriMeasure::sphere_uniform(alph);
    const auto omega = ModulusOfContinuity::log_modulus(1.0);
    const DysonSpherePotential f(1.0, 2);
    const auto small = estimate_holder(f, omega, mu, 32, 1000, 21);
    const auto large = estimate_holder(f, omega, mu, 32, 100000, 21);
    CHECK(large.estimate >= small.estimate);  // max over a superset-sized draw
    CHECK(large.estimate <= 2.0 * small.estimate);
    CHECK(std::isfinite(large.estimate));
}

TEST_CASE("flatness of constants and finite-range potentials by enumeration") {
    auto alph = Alphabet::finite({0.0, 1.0});
    auto mu = AprioriMeasure::uniform_finite(alph);
    const auto omega = ModulusOfContinuity::log_modulus(1.0);

    const ConstantPotential c(0.9);
    const auto rep_c = flatness_estimate(c, mu, omega, 8, 200, 16, 31);
    CHECK(rep_c.estimate == 0.0);

    // range-1 potentials see only the shared word: paired Birkhoff sums are
    // identical, verified here over every word and start pair up to n = 6
    FiniteRangePotential r1(alph, 1, {0.2, 1.4});
    double max_diff = 0.0;
    for (std::size_t xw = 0; xw < 2; ++xw) {
        for (std::size_t yw = 0; yw < 2; ++yw) {
            for (std::size_t word = 0; word < 64; ++word) {
                Config x, y;
                x.alphabet = alph;
                y.alphabet = alph;
                x.coords.assign(8, static_cast<double>(xw));
                y.coords.assign(8, static_cast<double>(yw));
                double fx = 0.0, fy = 0.0;
                for (std::size_t i = 0; i < 6; ++i) {
                    const double a = static_cast<double>((word >> i) & 1);
                    prepend_in_place(x, std::span<const double>(&a, 1));
                    prepend_in_place(y, std::span<const double>(&a, 1));
                    fx += r1.eval(x);
                    fy += r1.eval(y);
                    max_diff = std::max(max_diff, std::abs(fx - fy));
                }
            }
        }
    }
    CHECK(max_diff == 0.0);
    const auto rep_r1 = flatness_estimate(r1, mu, omega, 6, 500, 8, 37);
    CHECK(rep_r1.estimate == 0.0);
}

TEST_CASE("dyson flatness is stable as the horizon doubles") {
    auto alph = Alphabet::sphere(2);
    auto mu = AprioriMeasure::sphere_uniform(alph);
    const auto omega = dyson_flatness_modulus(3.0);
    const DysonSpherePotential f(3.0, 2);
    const auto rep = flatness_estimate(f, mu, omega, 32, 2000, 64, 41);
    CHECK(rep.estimate > 0.0);
    CHECK(std::isfinite(rep.estimate));
    // monotone nondecreasing in the horizon, stable within 20% from 16 to 32
    CHECK(rep.stability_ratio >= 1.0);
    CHECK(rep.stability_ratio <= 1.2);
}

TEST_CASE("automatic dyson flatness modulus refuses eps <= 2") {
    CHECK_THROWS_WITH_AS(dyson_flatness_modulus(2.0),
                         doctest::Contains("eps > 2"), std::invalid_argument);
    CHECK_NOTHROW(dyson_flatness_modulus(2.5));
}

TEST_SUITE_END();
