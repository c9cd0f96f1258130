#include <doctest.h>

#include "tklab/par.hpp"
#include "tklab/rng.hpp"

using namespace tklab;

TEST_SUITE_BEGIN("par");

TEST_CASE("serial and parallel fills are bit-identical") {
    const std::size_t n = 5000;
    std::vector<double> serial(n), parallel(n);
    auto body = [](std::size_t i) {
        RngStream rng = derive_stream(77, "parfill", i);
        double s = 0.0;
        for (int k = 0; k < 50; ++k) s += rng.normal() * rng.uniform();
        return s;
    };
    par::set_mode(par::Mode::kSerial);
    par::fill_indexed(n, [&](std::size_t i) { serial[i] = body(i); });
    par::set_mode(par::Mode::kParallel);
    par::fill_indexed(n, [&](std::size_t i) { parallel[i] = body(i); });
    CHECK(serial == parallel);

    double m1, s1, m2, s2;
    par::mean_and_se(serial, m1, s1);
    par::mean_and_se(parallel, m2, s2);
    CHECK(m1 == m2);
    CHECK(s1 == s2);
}

TEST_CASE("ordered sum ignores the execution mode") {
    std::vector<double> v(10000);
    for (std::size_t i = 0; i < v.size(); ++i)
        v[i] = 1.0 / static_cast<double>(i + 1);
    par::set_mode(par::Mode::kSerial);
    const double a = par::ordered_sum(v);
    par::set_mode(par::Mode::kParallel);
    const double b = par::ordered_sum(v);
    CHECK(a == b);
}

TEST_SUITE_END();
