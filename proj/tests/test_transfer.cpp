#include <doctest.h>

#include <cmath>

#include "tklab/oracle.hpp"
#include "tklab/transfer.hpp"

using namespace tklab;

namespace {

struct FiniteSetup {
    AlphabetPtr alph;
    AprioriMeasure mu;
    KernelSpec kernel;
    Config probe;

    explicit FiniteSetup(std::size_t depth = 16)
        : alph(Alphabet::finite({0.0, 1.0})),
          mu(AprioriMeasure::uniform_finite(alph)),
          kernel(KernelSpec::full_shift(mu)) {
        RngStream rng = derive_stream(2024, "finite-probe");
        probe = sample_config(mu, depth, rng);
    }
};

PotentialPtr pair_potential(const AlphabetPtr& alph, double beta = 1.0) {
    return std::make_shared<FiniteRangePotential>(
        alph, 2, std::vector<double>{0.0, 0.0, 0.0, beta});
}

}  // namespace

TEST_SUITE_BEGIN("transfer");

TEST_CASE("one-step transfer: exact finite sums") {
    FiniteSetup fs;
    EstimatorOptions opt;

    const ConstantPotential c(0.8);
    const auto est = apply_transfer(fs.kernel, c, one_observable(), fs.probe, opt);
    CHECK(est.exact);
    CHECK(est.std_error == 0.0);
    CHECK(est.value == doctest::Approx(std::exp(0.8)).epsilon(1e-14));

    FiniteRangePotential lin(fs.alph, 1, {0.0, 1.3});
    const auto est2 =
        apply_transfer(fs.kernel, lin, one_observable(), fs.probe, opt);
    CHECK(est2.value ==
          doctest::Approx(0.5 * (1.0 + std::exp(1.3))).epsilon(1e-14));
}

TEST_CASE("positivity and linearity under common random numbers") {
    auto alph = Alphabet::sphere(2);
    auto mu = AprioriMeasure::sphere_uniform(alph);
    const KernelSpec kernel = KernelSpec::full_shift(mu);
    const DysonSpherePotential f(1.0, 2);
    RngStream rng = derive_stream(5, "lin");
    const Config x = sample_config(mu, 24, rng);
    EstimatorOptions opt;
    opt.samples = 2000;
    opt.seed = 99;
    opt.sampler = SamplerKind::kPlain;

    const Observable phi = first_coordinate();
    const Observable psi = pair_product();
    Observable combo{[&](const Config& c) { return 2.0 * phi(c) - 3.0 * psi(c); },
                     5.0, "combo"};
    const double ea = apply_transfer_n(kernel, f, phi, x, 4, opt).value;
    const double eb = apply_transfer_n(kernel, f, psi, x, 4, opt).value;
    const double ec = apply_transfer_n(kernel, f, combo, x, 4, opt).value;
    CHECK(ec == doctest::Approx(2.0 * ea - 3.0 * eb).epsilon(1e-12));

    Observable nonneg{[](const Config& c) { return std::abs(c.point(0)[0]); },
                      1.0, "abs"};
    CHECK(apply_transfer_n(kernel, f, nonneg, x, 6, opt).value >= 0.0);
}

TEST_CASE("iterates: constants, consistency, and a brute-force oracle") {
    FiniteSetup fs;
    EstimatorOptions opt;
    const ConstantPotential c(0.4);
    const auto est5 =
        apply_transfer_n(fs.kernel, c, one_observable(), fs.probe, 5, opt);
    CHECK(est5.exact);
    CHECK(est5.value == doctest::Approx(std::exp(2.0)).epsilon(1e-13));

    // n = 1 agrees with the one-step operator
    const auto e1 =
        apply_transfer_n(fs.kernel, c, first_coordinate(), fs.probe, 1, opt);
    const auto e0 = apply_transfer(fs.kernel, c, first_coordinate(), fs.probe, opt);
    CHECK(e1.value == doctest::Approx(e0.value).epsilon(1e-14));

    // independent brute force: sum over all words of length 3 by hand
    const PotentialPtr f = pair_potential(fs.alph);
    double brute = 0.0;
    for (int w = 0; w < 8; ++w) {
        Config cur = fs.probe;
        double fsum = 0.0;
        for (int i = 0; i < 3; ++i) {
            const double a = static_cast<double>((w >> i) & 1);
            prepend_in_place(cur, std::span<const double>(&a, 1));
            fsum += f->eval(cur);
        }
        brute += 0.125 * std::exp(fsum) * cur.point(0)[0];
    }
    const auto est3 =
        apply_transfer_n(fs.kernel, *f, first_coordinate(), fs.probe, 3, opt);
    CHECK(est3.exact);
    CHECK(est3.value == doctest::Approx(brute).epsilon(1e-13));
}

TEST_CASE("monte carlo iterate matches the oracle matrix power within 3 se") {
    FiniteSetup fs;
    const PotentialPtr f = pair_potential(fs.alph);
    EstimatorOptions opt;
    opt.samples = 100000;
    opt.seed = 31;
    opt.force_mc = true;
    const auto est =
        apply_transfer_n(fs.kernel, *f, one_observable(), fs.probe, 8, opt);
    CHECK_FALSE(est.exact);
    CHECK(est.std_error > 0.0);

    const auto space = oracle::make_cylinder_space(fs.mu, 2);
    const auto matrix = oracle::build_matrix(
        space, dynamic_cast<const FiniteRangePotential&>(*f));
    std::vector<double> v(space.state_count(), 1.0);
    for (int i = 0; i < 8; ++i) v = matrix.apply(v);
    const double truth = v[space.config_state(fs.probe)];
    CHECK(std::abs(est.value - truth) <= 3.0 * est.std_error);
}

TEST_CASE("exact and monte carlo agree for the tilted dyson sampler") {
    auto alph = Alphabet::sphere(2);
    auto mu = AprioriMeasure::sphere_uniform(alph);
    const KernelSpec kernel = KernelSpec::full_shift(mu);
    const DysonSpherePotential f(3.0, 2);
    RngStream rng = derive_stream(8, "tilt-check");
    const Config x = sample_config(mu, 64, rng);

    // the tilted identity: f(a x) = <a, field(x)> exactly
    std::vector<double> field(2);
    f.interaction_field(x, field);
    for (int t = 0; t < 50; ++t) {
        const auto a = mu.sample(rng);
        const Config ax = prepend(a, x);
        CHECK(f.eval(ax) ==
              doctest::Approx(a[0] * field[0] + a[1] * field[1]).epsilon(1e-12));
    }

    EstimatorOptions plain;
    plain.samples = 60000;
    plain.seed = 17;
    plain.sampler = SamplerKind::kPlain;
    EstimatorOptions tilted = plain;
    tilted.sampler = SamplerKind::kTilted;
    const auto ep = apply_transfer_n(kernel, f, one_observable(), x, 6, plain);
    const auto et = apply_transfer_n(kernel, f, one_observable(), x, 6, tilted);
    const double band =
        3.0 * std::sqrt(ep.std_error * ep.std_error +
                        et.std_error * et.std_error);
    CHECK(std::abs(ep.value - et.value) <= band);
    // the tilted route has far smaller error at equal sample counts
    CHECK(et.std_error < 0.2 * ep.std_error);
    CHECK_THROWS_AS(
        (void)apply_transfer_n(kernel, ConstantPotential(0.0),
                               one_observable(), x, 2, tilted),
        std::invalid_argument);
}

TEST_CASE("spectral radius: constants and exact finite systems") {
    FiniteSetup fs;
    EstimatorOptions opt;
    const ConstantPotential c(0.6);
    const auto rc = spectral_radius(fs.kernel, c, fs.probe, 10, opt);
    CHECK(rc.rho == doctest::Approx(std::exp(0.6)).epsilon(1e-10));

    FiniteRangePotential lin(fs.alph, 1, {0.0, 1.0});
    const auto rl = spectral_radius(fs.kernel, lin, fs.probe, 12, opt);
    CHECK(rl.rho ==
          doctest::Approx(0.5 * (1.0 + std::exp(1.0))).epsilon(1e-8));

    const PotentialPtr f = pair_potential(fs.alph);
    const auto rp = spectral_radius(fs.kernel, *f, fs.probe, 12, opt);
    CHECK(rp.rho == doctest::Approx(1.5887599424873549).epsilon(1e-4));

    CHECK_THROWS_AS(
        (void)spectral_radius(fs.kernel, c, fs.probe, 3, opt),
        std::invalid_argument);
}

TEST_CASE("spectral radius is probe independent within comparability") {
    auto alph = Alphabet::sphere(2);
    auto mu = AprioriMeasure::sphere_uniform(alph);
    const KernelSpec kernel = KernelSpec::full_shift(mu);
    const DysonSpherePotential f(3.0, 2);
    EstimatorOptions opt;
    opt.samples = 4096;
    RngStream rng = derive_stream(12, "probe-indep");
    const Config x = sample_config(mu, 64, rng);
    const Config y = sample_config(mu, 64, rng);
    opt.seed = 100;
    const auto rx = spectral_radius(kernel, f, x, 16, opt);
    opt.seed = 200;
    const auto ry = spectral_radius(kernel, f, y, 16, opt);
    CHECK(rx.rho == doctest::Approx(ry.rho).epsilon(0.01));
    // level ratios stay inside the comparability corridor e^{C omega(diam)}
    const auto omega = dyson_flatness_modulus(3.0);
    const auto flat = flatness_estimate(f, mu, omega, 32, 1000, 64, 7);
    const double corridor = std::exp(flat.estimate * omega(1.0)) * 1.5;
    for (std::size_t n = 4; n <= 16; n += 4) {
        const double ratio =
            std::exp(rx.log_levels[n - 1] - ry.log_levels[n - 1]);
        CHECK(ratio <= corridor);
        CHECK(ratio >= 1.0 / corridor);
    }
}

TEST_CASE("cesaro eigenfunction: constants give exactly one") {
    FiniteSetup fs;
    auto c = std::make_shared<ConstantPotential>(0.9);
    const CesaroEigenfunction h(fs.kernel, c, std::exp(0.9), 12, 64, 5,
                                SamplerKind::kAuto);
    CHECK(h.eval(fs.probe) == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("cesaro eigenfunction ratios match the perron eigenvector") {
    FiniteSetup fs;
    const PotentialPtr f = pair_potential(fs.alph);
    const auto space = oracle::make_cylinder_space(fs.mu, 2);
    const auto pd = oracle::perron(oracle::build_matrix(
        space, dynamic_cast<const FiniteRangePotential&>(*f)));

    const CesaroEigenfunction h(fs.kernel, f, pd.lambda, 64, 100000, 77,
                                SamplerKind::kAuto);
    RngStream rng = derive_stream(6, "h-ratio");
    const Config x = sample_config(fs.mu, 16, rng);
    const Config y = sample_config(fs.mu, 16, rng);
    const double got = h.eval(x) / h.eval(y);
    const double want =
        pd.h[space.config_state(x)] / pd.h[space.config_state(y)];
    CHECK(got == doctest::Approx(want).epsilon(0.02));
    // deterministic function of the seed
    CHECK(h.eval(x) == h.eval(x));
}

TEST_CASE("normalize: constants and already-normalized potentials") {
    FiniteSetup fs;
    NormalizeOptions opt;
    opt.depth = 16;
    opt.seed = 3;
    opt.h_bank = 256;
    const auto sys =
        normalize(fs.kernel, std::make_shared<ConstantPotential>(0.5), opt);
    CHECK(sys.accepted());
    CHECK(sys.lambda() == doctest::Approx(std::exp(0.5)).epsilon(1e-9));
    CHECK(sys.diagnostics().sup_deviation <= 1e-9);
    // fbar = 0 within tolerance
    CHECK(std::abs(sys.fbar(fs.probe)) <= 1e-9);
}

TEST_CASE("normalize matches the oracle normalization on cylinders") {
    FiniteSetup fs;
    const PotentialPtr f = pair_potential(fs.alph);
    NormalizeOptions opt;
    opt.depth = 16;
    opt.seed = 11;
    opt.h_bank = 65536;
    opt.h_levels = 64;
    const auto sys = normalize(fs.kernel, f, opt);
    CHECK(sys.accepted());

    const auto space = oracle::make_cylinder_space(fs.mu, 2);
    const auto matrix = oracle::build_matrix(
        space, dynamic_cast<const FiniteRangePotential&>(*f));
    const auto pd = oracle::perron(matrix);
    CHECK(sys.lambda() == doctest::Approx(pd.lambda).epsilon(0.003));

    for (std::size_t st = 0; st < 4; ++st) {
        const Config x = space.state_config(st, 16);
        const Config sx = shift(x);
        const double fbar_oracle =
            f->eval(x) + std::log(pd.h[space.config_state(x)]) -
            std::log(pd.h[space.config_state(sx)]) - std::log(pd.lambda);
        CHECK(std::abs(sys.fbar(x) - fbar_oracle) <= 0.01);
    }
}

TEST_CASE("weighted-shift kernels walk backward and forward consistently") {
    auto alph = Alphabet::real_line();
    auto mu = AprioriMeasure::real_line_gaussian(alph);
    auto ws = std::make_shared<const systems::WeightedShiftSystem>(
        std::vector<double>(8, 2.0), 1.0, 3.0, 1.0, mu);
    const KernelSpec kernel = KernelSpec::weighted_shift(ws);
    Config x;
    x.alphabet = alph;
    x.coords = {1.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0};
    Config cur = x;
    RngStream rng = derive_stream(1, "ws");
    kernel.step_backward(cur, rng);
    // forward recovers x up to the zero-padded last coordinate
    const Config fwd = kernel.forward(cur);
    for (std::size_t i = 0; i + 1 < 8; ++i)
        CHECK(fwd.coords[i] == doctest::Approx(x.coords[i]).epsilon(1e-12));
    CHECK(fwd.coords[7] == 0.0);
}

TEST_SUITE_END();
