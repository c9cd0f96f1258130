#include <doctest.h>

#include <cmath>

#include "tklab/space.hpp"

using namespace tklab;

namespace {

Config finite_config(const AlphabetPtr& alph, std::vector<double> coords) {
    Config c;
    c.alphabet = alph;
    c.coords = std::move(coords);
    return c;
}

}  // namespace

TEST_SUITE_BEGIN("space");

TEST_CASE("config distance identity and single-coordinate cases") {
    auto alph = Alphabet::finite({0.0, 1.0});
    const Config x = finite_config(alph, {0, 1, 0, 1, 0, 1, 0, 1});
    CHECK(config_distance(x, x) == 0.0);

    Config y = x;
    y.coords[0] = 1.0;
    CHECK(config_distance(x, y) == doctest::Approx(0.5).epsilon(1e-15));

    Config z = x;
    for (auto& c : z.coords) c = 1.0 - c;
    CHECK(config_distance(x, z) == doctest::Approx(1.0 - std::pow(2.0, -8.0)));
    CHECK(config_distance(x, z) == doctest::Approx(0.99609375));
}

TEST_CASE("distance contract violations") {
    auto alph = Alphabet::finite({0.0, 1.0});
    auto other = Alphabet::finite({0.0, 1.0, 2.0});
    const Config x = finite_config(alph, {0, 1});
    const Config y = finite_config(other, {0, 1});
    CHECK_THROWS_AS((void)config_distance(x, y), std::invalid_argument);
    const Config shallow = finite_config(alph, {0.0});
    CHECK_THROWS_AS((void)config_distance(x, shallow), std::invalid_argument);
}

TEST_CASE("prepend drops the tail and shift inverts it") {
    auto alph = Alphabet::finite({0.0, 1.0, 2.0});
    const Config x = finite_config(alph, {1, 1, 1});
    const double a = 2.0;
    const Config ax = prepend(std::span<const double>(&a, 1), x);
    CHECK(ax.coords == std::vector<double>{2, 1, 1});

    const Config back = shift(ax);
    CHECK(back.coords == std::vector<double>{1, 1});
    CHECK(back.depth() == 2);

    const Config two = shift(shift(finite_config(alph, {0, 1, 2, 1, 0})));
    CHECK(two.depth() == 3);
    CHECK_THROWS_AS((void)shift(finite_config(alph, {1.0})),
                    std::invalid_argument);

    const double bad = 7.0;
    Config mut = x;
    CHECK_THROWS_AS(prepend_in_place(mut, std::span<const double>(&bad, 1)),
                    std::invalid_argument);
}

TEST_CASE("depth-2 prepend contraction example") {
    auto alph = Alphabet::finite({0.0, 1.0});
    const Config x = finite_config(alph, {0, 1});
    const Config y = finite_config(alph, {1, 1});
    CHECK(config_distance(x, y) == doctest::Approx(0.5));
    const double a = 0.0;
    const Config ax = prepend(std::span<const double>(&a, 1), x);
    const Config ay = prepend(std::span<const double>(&a, 1), y);
    CHECK(config_distance(ax, ay) == doctest::Approx(0.25));
}

TEST_CASE("prepend contraction sandwich over random configurations") {
    auto alph = Alphabet::sphere(3);
    auto mu = AprioriMeasure::sphere_uniform(alph);
    RngStream rng = derive_stream(42, "sandwich");
    const std::size_t depth = 12;
    for (int trial = 0; trial < 200; ++trial) {
        const Config x = sample_config(mu, depth, rng);
        const Config y = sample_config(mu, depth, rng);
        const auto a = mu.sample(rng);
        const Config ax = prepend(a, x);
        const Config ay = prepend(a, y);
        const double d = config_distance(x, y);
        const double da = config_distance(ax, ay);
        CHECK(da <= 0.5 * d + 1e-15);
        CHECK(da >= 0.5 * d - std::pow(2.0, -static_cast<double>(depth) - 1) -
                        1e-15);
    }
}

TEST_CASE("configs sharing a prefix are 2^-k close") {
    auto alph = Alphabet::finite({0.0, 1.0});
    RngStream rng = derive_stream(7, "prefix");
    auto mu = AprioriMeasure::uniform_finite(alph);
    for (std::size_t k = 1; k < 8; ++k) {
        Config x = sample_config(mu, 16, rng);
        Config y = x;
        for (std::size_t i = k; i < 16; ++i)
            y.coords[i] = 1.0 - y.coords[i];
        CHECK(config_distance(x, y) <= std::pow(2.0, -static_cast<double>(k)));
    }
}

TEST_CASE("intrinsic metric axioms on sampled triples") {
    auto alph = Alphabet::sphere(2);
    auto mu = AprioriMeasure::sphere_uniform(alph);
    RngStream rng = derive_stream(3, "triples");
    std::vector<double> a(2), b(2), c(2);
    for (int t = 0; t < 500; ++t) {
        mu.sample(rng, a);
        mu.sample(rng, b);
        mu.sample(rng, c);
        CHECK(alph->point_distance(a, a) == 0.0);
        CHECK(alph->point_distance(a, b) ==
              doctest::Approx(alph->point_distance(b, a)));
        CHECK(alph->point_distance(a, c) <=
              alph->point_distance(a, b) + alph->point_distance(b, c) + 1e-12);
        CHECK(std::min(alph->point_distance(a, b), 1.0) <= 1.0);
    }
}

TEST_CASE("bounded metric policy") {
    auto hl = Alphabet::half_line();
    const auto pol = BoundedMetricPolicy::for_alphabet(*hl);
    CHECK(pol.cap);
    CHECK(pol.apply(3.7) == 1.0);
    CHECK(pol.apply(0.4) == 0.4);
    auto fin = Alphabet::finite({0.0, 1.0});
    CHECK_FALSE(BoundedMetricPolicy::for_alphabet(*fin).cap);
}

TEST_CASE("finite sampling frequencies within the binomial band") {
    auto alph = Alphabet::finite({0.0, 1.0});
    auto mu = AprioriMeasure::uniform_finite(alph);
    RngStream rng = derive_stream(123, "finite-freq");
    const std::size_t n = 100000;
    std::size_t zeros = 0;
    std::vector<double> p(1);
    for (std::size_t i = 0; i < n; ++i) {
        mu.sample(rng, p);
        if (p[0] == 0.0) ++zeros;
    }
    const double freq = static_cast<double>(zeros) / static_cast<double>(n);
    CHECK(freq >= 0.494);
    CHECK(freq <= 0.506);
}

TEST_CASE("uniform circle draws have near-zero mean") {
    auto alph = Alphabet::sphere(2);
    auto mu = AprioriMeasure::sphere_uniform(alph);
    RngStream rng = derive_stream(5, "circle-mean");
    const std::size_t n = 100000;
    double sx = 0.0, sy = 0.0;
    std::vector<double> p(2);
    for (std::size_t i = 0; i < n; ++i) {
        mu.sample(rng, p);
        CHECK(std::abs(p[0] * p[0] + p[1] * p[1] - 1.0) <= 1e-9);
        sx += p[0];
        sy += p[1];
    }
    const double norm =
        std::hypot(sx, sy) / static_cast<double>(n);
    CHECK(norm <= 0.02);
}

TEST_CASE("exponential draws have unit mean") {
    auto alph = Alphabet::half_line();
    auto mu = AprioriMeasure::half_line_exponential(alph);
    RngStream rng = derive_stream(17, "exp-mean");
    const std::size_t n = 1000000;
    double s = 0.0;
    std::vector<double> p(1);
    for (std::size_t i = 0; i < n; ++i) {
        mu.sample(rng, p);
        CHECK(p[0] >= 0.0);
        s += p[0];
    }
    const double mean = s / static_cast<double>(n);
    CHECK(mean >= 0.99);
    CHECK(mean <= 1.01);
}

TEST_CASE("identical seeds reproduce identical draws") {
    auto alph = Alphabet::sphere(4);
    auto mu = AprioriMeasure::sphere_uniform(alph);
    RngStream a = derive_stream(99, "repro", 3);
    RngStream b = derive_stream(99, "repro", 3);
    for (int i = 0; i < 100; ++i) {
        const auto pa = mu.sample(a);
        const auto pb = mu.sample(b);
        CHECK(pa == pb);
    }
    RngStream c = derive_stream(99, "repro", 4);
    const auto pa = mu.sample(a);
    const auto pc = mu.sample(c);
    CHECK(pa != pc);
}

TEST_CASE("apriori measure invariants are enforced") {
    auto alph = Alphabet::finite({0.0, 1.0});
    CHECK_THROWS_AS(AprioriMeasure::finite(alph, {0.5, 0.6}),
                    std::invalid_argument);
    CHECK_THROWS_AS(AprioriMeasure::finite(alph, {1.0, 0.0}),
                    std::invalid_argument);
    CHECK_NOTHROW(AprioriMeasure::finite(alph, {0.25, 0.75}));
}

TEST_SUITE_END();
