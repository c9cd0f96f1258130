#include <doctest.h>

#include <cmath>

#include "tklab/oracle.hpp"

using namespace tklab;
using namespace tklab::oracle;

namespace {

struct PairSystem {
    CylinderSpace space;
    TransferMatrix m;
    PerronData pd;
    TransferMatrix p;
    std::vector<double> pi;
};

// s = 2, k = 2, f = x1 x2 on {0,1}, uniform a priori.  The 4x4 matrix has
// entries (1/2) e^{a w1} from state (w1,w2) to (a,w1):
//   from (0,0): 1/2 -> (0,0), 1/2 -> (1,0)
//   from (1,0): 1/2 -> (0,1), (1/2)e -> (1,1)
//   from (0,1): 1/2 -> (0,0), 1/2 -> (1,0)
//   from (1,1): 1/2 -> (0,1), (1/2)e -> (1,1)
PairSystem make_pair_system() {
    PairSystem ps;
    auto alph = Alphabet::finite({0.0, 1.0});
    auto mu = AprioriMeasure::uniform_finite(alph);
    ps.space = make_cylinder_space(mu, 2);
    FiniteRangePotential f(alph, 2, {0.0, 0.0, 0.0, 1.0});
    ps.m = build_matrix(ps.space, f);
    ps.pd = perron(ps.m);
    ps.p = exact_normalize(ps.m, ps.pd);
    ps.pi = stationary_from_perron(ps.pd);
    return ps;
}

}  // namespace

TEST_SUITE_BEGIN("oracle");

TEST_CASE("pair transfer matrix entries match the hand enumeration") {
    const PairSystem ps = make_pair_system();
    const double e = std::exp(1.0);
    // index = w1 + 2 w2
    CHECK(ps.m.at(0, 0) == doctest::Approx(0.5));
    CHECK(ps.m.at(0, 1) == doctest::Approx(0.5));
    CHECK(ps.m.at(0, 2) == 0.0);
    CHECK(ps.m.at(1, 2) == doctest::Approx(0.5));
    CHECK(ps.m.at(1, 3) == doctest::Approx(0.5 * e));
    CHECK(ps.m.at(2, 0) == doctest::Approx(0.5));
    CHECK(ps.m.at(2, 1) == doctest::Approx(0.5));
    CHECK(ps.m.at(3, 2) == doctest::Approx(0.5));
    CHECK(ps.m.at(3, 3) == doctest::Approx(0.5 * e));
    // each row has exactly s nonzero entries
    for (std::size_t i = 0; i < 4; ++i) {
        int nz = 0;
        for (std::size_t j = 0; j < 4; ++j)
            if (ps.m.at(i, j) != 0.0) ++nz;
        CHECK(nz == 2);
    }
}

TEST_CASE("perron data of the pair system") {
    const PairSystem ps = make_pair_system();
    // frozen from an independent dense eigensolve
    CHECK(ps.pd.lambda == doctest::Approx(1.5887599424873549).epsilon(1e-10));
    CHECK(ps.pd.h[1] / ps.pd.h[0] == doctest::Approx(2.17751988).epsilon(1e-6));
    CHECK(ps.pd.h[3] / ps.pd.h[2] == doctest::Approx(2.17751988).epsilon(1e-6));
    CHECK(ps.pd.lambda2_modulus / ps.pd.lambda ==
          doctest::Approx(0.1701836536228755).epsilon(1e-6));
    double nu_sum = 0.0, nu_h = 0.0;
    for (std::size_t i = 0; i < 4; ++i) {
        CHECK(ps.pd.h[i] > 0.0);
        CHECK(ps.pd.nu[i] > 0.0);
        nu_sum += ps.pd.nu[i];
        nu_h += ps.pd.nu[i] * ps.pd.h[i];
    }
    CHECK(nu_sum == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(nu_h == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("constant potentials give lambda = e^c, flat h, uniform nu") {
    auto alph = Alphabet::finite({0.0, 1.0});
    auto mu = AprioriMeasure::uniform_finite(alph);
    const auto space = make_cylinder_space(mu, 1);
    FiniteRangePotential f(alph, 1, {0.4, 0.4});  // constant on cylinders
    const auto m = build_matrix(space, f);
    const auto pd = perron(m);
    CHECK(pd.lambda == doctest::Approx(std::exp(0.4)).epsilon(1e-12));
    CHECK(pd.h[0] == doctest::Approx(pd.h[1]).epsilon(1e-12));
    CHECK(pd.nu[0] == doctest::Approx(0.5).epsilon(1e-10));
}

TEST_CASE("linear potential with beta = 1 gives lambda = (1+e)/2") {
    auto alph = Alphabet::finite({0.0, 1.0});
    auto mu = AprioriMeasure::uniform_finite(alph);
    const auto space = make_cylinder_space(mu, 1);
    FiniteRangePotential f(alph, 1, {0.0, 1.0});
    const auto pd = perron(build_matrix(space, f));
    CHECK(pd.lambda ==
          doctest::Approx(0.5 * (1.0 + std::exp(1.0))).epsilon(1e-12));
}

TEST_CASE("potential shifts scale lambda and leave h unchanged") {
    auto alph = Alphabet::finite({0.0, 1.0});
    auto mu = AprioriMeasure::uniform_finite(alph);
    const auto space = make_cylinder_space(mu, 2);
    FiniteRangePotential f(alph, 2, {0.0, 0.0, 0.0, 1.0});
    FiniteRangePotential g(alph, 2, {0.7, 0.7, 0.7, 1.7});
    const auto pf = perron(build_matrix(space, f));
    const auto pg = perron(build_matrix(space, g));
    CHECK(pg.lambda == doctest::Approx(pf.lambda * std::exp(0.7)).epsilon(1e-10));
    for (std::size_t i = 0; i < 4; ++i)
        CHECK(pg.h[i] / pg.h[0] ==
              doctest::Approx(pf.h[i] / pf.h[0]).epsilon(1e-9));
}

TEST_CASE("exact normalization is stochastic with stationary h nu") {
    const PairSystem ps = make_pair_system();
    for (std::size_t i = 0; i < 4; ++i) {
        double rs = 0.0;
        for (std::size_t j = 0; j < 4; ++j) rs += ps.p.at(i, j);
        CHECK(std::abs(rs - 1.0) <= 1e-10);
    }
    // pi P = pi
    const auto piP = ps.p.apply_transposed(ps.pi);
    for (std::size_t i = 0; i < 4; ++i)
        CHECK(piP[i] == doctest::Approx(ps.pi[i]).epsilon(1e-9));
    // constant potential: P equals the a priori prepend structure
    auto alph = Alphabet::finite({0.0, 1.0});
    auto mu = AprioriMeasure::finite(alph, {0.25, 0.75});
    const auto space = make_cylinder_space(mu, 1);
    FiniteRangePotential c(alph, 1, {0.3, 0.3});
    const auto pd = perron(build_matrix(space, c));
    const auto p = exact_normalize(build_matrix(space, c), pd);
    CHECK(p.at(0, 0) == doctest::Approx(0.25).epsilon(1e-10));
    CHECK(p.at(1, 1) == doctest::Approx(0.75).epsilon(1e-10));
}

TEST_CASE("poisson solve: trivial cases and the residual contract") {
    const PairSystem ps = make_pair_system();
    std::vector<double> zero(4, 0.0);
    const auto u0 = exact_poisson(ps.p, zero, ps.pi);
    for (double v : u0) CHECK(std::abs(v) < 1e-12);

    // iid rows: P phi = 0 for centered phi, so upsilon = phi
    auto alph = Alphabet::finite({0.0, 1.0});
    auto mu = AprioriMeasure::uniform_finite(alph);
    const auto space = make_cylinder_space(mu, 1);
    FiniteRangePotential c(alph, 1, {0.0, 0.0});
    const auto pd = perron(build_matrix(space, c));
    const auto p_iid = exact_normalize(build_matrix(space, c), pd);
    const std::vector<double> pi_iid = stationary_from_perron(pd);
    std::vector<double> phi = {-0.5, 0.5};
    const auto ups = exact_poisson(p_iid, phi, pi_iid);
    CHECK(ups[0] == doctest::Approx(phi[0]).epsilon(1e-12));
    CHECK(ups[1] == doctest::Approx(phi[1]).epsilon(1e-12));

    // uncentered input refused
    std::vector<double> bad = {1.0, 0.0};
    CHECK_THROWS_AS((void)exact_poisson(p_iid, bad, pi_iid),
                    std::invalid_argument);
}

TEST_CASE("sigma2 from the poisson route equals the autocovariance series") {
    const PairSystem ps = make_pair_system();
    std::vector<double> phi(4);
    double mean = 0.0;
    for (std::size_t i = 0; i < 4; ++i) {
        phi[i] = ps.space.word(i)[0];
        mean += ps.pi[i] * phi[i];
    }
    for (auto& v : phi) v -= mean;
    const double s2 = exact_sigma2(ps.p, phi, ps.pi);
    // frozen from an independent linear solve
    CHECK(s2 == doctest::Approx(0.20282968493940162).epsilon(1e-9));
    const auto gamma = exact_correlations(ps.p, phi, ps.pi, 200);
    double gk = gamma[0];
    for (std::size_t n = 1; n < gamma.size(); ++n) gk += 2.0 * gamma[n];
    CHECK(std::abs(s2 - gk) <= 1e-6);
}

TEST_CASE("correlations: variance at lag zero, zero for iid, spectral rate") {
    const PairSystem ps = make_pair_system();
    std::vector<double> phi(4);
    double mean = 0.0;
    for (std::size_t i = 0; i < 4; ++i) {
        phi[i] = ps.space.word(i)[0];
        mean += ps.pi[i] * phi[i];
    }
    for (auto& v : phi) v -= mean;
    const auto gamma = exact_correlations(ps.p, phi, ps.pi, 24);
    double var = 0.0;
    for (std::size_t i = 0; i < 4; ++i) var += ps.pi[i] * phi[i] * phi[i];
    CHECK(gamma[0] == doctest::Approx(var).epsilon(1e-12));

    // the normalized decay rate approaches |lambda_2| / lambda_1; lag 24 is
    // the deepest point where repeated double-precision matrix application
    // still resolves the series (past ~1e-20 rounding noise takes over)
    const double rate =
        std::pow(std::abs(gamma[24]) / gamma[0], 1.0 / 24.0);
    CHECK(rate == doctest::Approx(ps.pd.lambda2_modulus / ps.pd.lambda)
                      .epsilon(1e-3));

    // iid chain: exact zero beyond lag zero
    auto alph = Alphabet::finite({0.0, 1.0});
    auto mu = AprioriMeasure::uniform_finite(alph);
    const auto space = make_cylinder_space(mu, 1);
    FiniteRangePotential c(alph, 1, {0.0, 0.0});
    const auto pd = perron(build_matrix(space, c));
    const auto p_iid = exact_normalize(build_matrix(space, c), pd);
    const auto pi_iid = stationary_from_perron(pd);
    const auto g2 = exact_correlations(p_iid, {-0.5, 0.5}, pi_iid, 10);
    for (std::size_t n = 1; n < g2.size(); ++n) CHECK(std::abs(g2[n]) < 1e-14);
}

TEST_CASE("state caps and primitivity guards") {
    auto alph = Alphabet::finite({0.0, 1.0});
    auto mu = AprioriMeasure::uniform_finite(alph);
    CHECK_THROWS_AS((void)make_cylinder_space(mu, 13), std::invalid_argument);
    TransferMatrix two_cycle;
    two_cycle.n = 2;
    two_cycle.data = {0.0, 1.0, 1.0, 0.0};
    CHECK_THROWS_AS((void)perron(two_cycle), std::invalid_argument);
}

TEST_SUITE_END();
