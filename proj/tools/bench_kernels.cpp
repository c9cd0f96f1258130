// Times the OpenMP estimator kernels against the serial reference path.
// The two paths produce bit-identical numbers (asserted here as well), so
// the only difference is wall time.
#include <chrono>
#include <cstdio>
#include <functional>

#include "tklab/chains.hpp"
#include "tklab/coupling.hpp"
#include "tklab/par.hpp"
#include "tklab/transfer.hpp"

using namespace tklab;

namespace {

double time_ms(const std::function<void()>& fn) {
    const auto t0 = std::chrono::steady_clock::now();
    fn();
    const auto t1 = std::chrono::steady_clock::now();
    return std::chrono::duration<double, std::milli>(t1 - t0).count();
}

void report(const char* name, double serial_ms, double parallel_ms,
            bool identical) {
    std::printf("%-28s serial %8.1f ms   openmp %8.1f ms   speedup %.2fx   %s\n",
                name, serial_ms, parallel_ms, serial_ms / parallel_ms,
                identical ? "bit-identical" : "MISMATCH");
}

}  // namespace

int main() {
    std::printf("workers available: %d\n", par::worker_count());

    // Dyson sphere transfer iterate
    {
        auto alph = Alphabet::sphere(2);
        auto mu = AprioriMeasure::sphere_uniform(alph);
        const KernelSpec kernel = KernelSpec::full_shift(mu);
        auto f = std::make_shared<DysonSpherePotential>(3.0, 2);
        RngStream rng = derive_stream(7, "bench");
        const Config x = sample_config(mu, 64, rng);
        EstimatorOptions opt;
        opt.samples = 20000;
        opt.seed = 11;
        TransferEstimate a, b;
        par::set_mode(par::Mode::kSerial);
        const double ts = time_ms(
            [&] { a = apply_transfer_n(kernel, *f, one_observable(), x, 24, opt); });
        par::set_mode(par::Mode::kParallel);
        const double tp = time_ms(
            [&] { b = apply_transfer_n(kernel, *f, one_observable(), x, 24, opt); });
        report("transfer iterate (tilted)", ts, tp,
               a.value == b.value && a.std_error == b.std_error);
    }

    // coupled-cost series
    {
        auto alph = Alphabet::sphere(2);
        auto mu = AprioriMeasure::sphere_uniform(alph);
        const KernelSpec kernel = KernelSpec::full_shift(mu);
        auto f = std::make_shared<DysonSpherePotential>(3.0, 2);
        NormalizeOptions nopt;
        nopt.depth = 64;
        nopt.check_samples = 2000;
        nopt.seed = 3;
        const NormalizedSystem sys = normalize(kernel, f, nopt);
        RngStream rng = derive_stream(9, "bench-couple");
        const Config x = sample_config(mu, 64, rng);
        const Config y = sample_config(mu, 64, rng);
        const auto omega = ModulusOfContinuity::log_modulus(2.0);
        EstimatorOptions opt;
        opt.samples = 2000;
        opt.seed = 13;
        std::vector<std::size_t> ns = {2, 4, 8, 16, 32};
        std::vector<TransferEstimate> a, b;
        par::set_mode(par::Mode::kSerial);
        const double ts =
            time_ms([&] { a = coupling::coupling_cost_series(sys, omega, x, y, ns, opt); });
        par::set_mode(par::Mode::kParallel);
        const double tp =
            time_ms([&] { b = coupling::coupling_cost_series(sys, omega, x, y, ns, opt); });
        bool same = true;
        for (std::size_t i = 0; i < ns.size(); ++i)
            same = same && a[i].value == b[i].value;
        report("coupling cost series", ts, tp, same);
    }

    // finite-alphabet Breiman replicates
    {
        auto alph = Alphabet::finite({0.0, 1.0});
        auto mu = AprioriMeasure::uniform_finite(alph);
        const KernelSpec kernel = KernelSpec::full_shift(mu);
        RngStream rng = derive_stream(21, "bench-breiman");
        const Config start = sample_config(mu, 16, rng);
        const Observable phi = first_coordinate();
        const std::size_t seeds = 16;
        std::vector<double> va(seeds), vb(seeds);
        auto run = [&](std::vector<double>& out) {
            par::fill_indexed(seeds, [&](std::size_t s) {
                const auto res = chains::breiman_average(kernel, phi, 20000,
                                                         100, start, 100 + s);
                out[s] = res.partial_averages.back();
            });
        };
        par::set_mode(par::Mode::kSerial);
        const double ts = time_ms([&] { run(va); });
        par::set_mode(par::Mode::kParallel);
        const double tp = time_ms([&] { run(vb); });
        bool same = true;
        for (std::size_t s = 0; s < seeds; ++s) same = same && va[s] == vb[s];
        report("breiman replicate sweep", ts, tp, same);
    }

    par::set_mode(par::Mode::kParallel);
    return 0;
}
