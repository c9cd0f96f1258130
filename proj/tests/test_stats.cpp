#include <doctest.h>

#include <cmath>

#include "tklab/rng.hpp"
#include "tklab/stats.hpp"

using namespace tklab;

TEST_SUITE_BEGIN("stats");

TEST_CASE("normal cdf endpoints") {
    CHECK(stats::normal_cdf(0.0) == doctest::Approx(0.5));
    CHECK(stats::normal_cdf(1.959964) == doctest::Approx(0.975).epsilon(1e-4));
    CHECK(stats::normal_cdf(-8.0) < 1e-14);
}

TEST_CASE("ks statistic detects gaussian samples and rejects shifted ones") {
    RngStream rng = derive_stream(5, "ks");
    std::vector<double> good(2000), bad(2000);
    for (std::size_t i = 0; i < good.size(); ++i) {
        good[i] = rng.normal();
        bad[i] = rng.normal() + 1.0;
    }
    CHECK(stats::ks_vs_normal(good) < stats::ks_threshold(good.size()));
    CHECK(stats::ks_vs_normal(bad) > 0.3);
}

TEST_CASE("two-sample ks on equal and disjoint samples") {
    RngStream rng = derive_stream(6, "ks2");
    std::vector<double> a(1500), b(1500), c(1500);
    for (std::size_t i = 0; i < a.size(); ++i) {
        a[i] = rng.normal();
        b[i] = rng.normal();
        c[i] = rng.normal() + 2.0;
    }
    CHECK(stats::ks_two_sample(a, b) <
          stats::ks_two_sample_threshold(a.size()));
    CHECK(stats::ks_two_sample(a, c) > 0.5);
}

TEST_CASE("line fit recovers exact coefficients") {
    std::vector<double> x, y;
    for (int i = 1; i <= 20; ++i) {
        x.push_back(i);
        y.push_back(3.5 - 2.0 * i);
    }
    const auto fit = stats::fit_line(x, y);
    CHECK(fit.slope == doctest::Approx(-2.0).epsilon(1e-12));
    CHECK(fit.intercept == doctest::Approx(3.5).epsilon(1e-12));
    CHECK(fit.residual_rms < 1e-12);
}

TEST_CASE("batch means of iid data match the plain standard error") {
    RngStream rng = derive_stream(9, "bm");
    std::vector<double> x(32000);
    for (auto& v : x) v = rng.uniform();
    const auto bm = stats::batch_mean(x);
    CHECK(bm.mean == doctest::Approx(0.5).epsilon(0.01));
    const double plain_se = std::sqrt(1.0 / 12.0 / 32000.0);
    CHECK(bm.se == doctest::Approx(plain_se).epsilon(0.5));
}

TEST_CASE("sample correlation of independent and identical series") {
    RngStream rng = derive_stream(10, "corr");
    std::vector<double> x(4000), y(4000);
    for (std::size_t i = 0; i < x.size(); ++i) {
        x[i] = rng.normal();
        y[i] = rng.normal();
    }
    CHECK(std::abs(stats::sample_correlation(x, y)) < 0.05);
    CHECK(stats::sample_correlation(x, x) == doctest::Approx(1.0));
}

TEST_CASE("substreams are label and index separated") {
    RngStream a = derive_stream(1, "alpha", 0);
    RngStream b = derive_stream(1, "alpha", 1);
    RngStream c = derive_stream(1, "beta", 0);
    const double va = a.uniform(), vb = b.uniform(), vc = c.uniform();
    CHECK(va != vb);
    CHECK(va != vc);
    RngStream a2 = derive_stream(1, "alpha", 0);
    CHECK(a2.uniform() == va);
}

TEST_SUITE_END();
