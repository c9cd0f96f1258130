// Parallel kernel driver.
//
// All data-parallel estimator loops go through par::fill_indexed: each index
// computes its value from its own substream into a preallocated buffer, and
// reductions happen afterwards in fixed index order.  Results are therefore
// bit-identical between the OpenMP path and the serial reference path, and
// independent of the worker count.  The serial path is kept as the reference
// implementation for tests and benchmarks.
#pragma once

#include <cmath>
#include <cstddef>
#include <vector>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace tklab::par {

enum class Mode { kParallel, kSerial };

Mode mode();
void set_mode(Mode m);

int worker_count();

template <typename F>
void fill_indexed(std::size_t n, F&& body) {
#ifdef _OPENMP
    if (mode() == Mode::kParallel) {
#pragma omp parallel for schedule(static)
        for (long long i = 0; i < static_cast<long long>(n); ++i) {
            body(static_cast<std::size_t>(i));
        }
        return;
    }
#endif
    for (std::size_t i = 0; i < n; ++i) body(i);
}

// Fixed-order sum, used after fill_indexed so that reduction order never
// depends on the thread count.
inline double ordered_sum(const std::vector<double>& v) {
    double s = 0.0;
    for (double x : v) s += x;
    return s;
}

inline void mean_and_se(const std::vector<double>& v, double& mean, double& se) {
    const double n = static_cast<double>(v.size());
    mean = ordered_sum(v) / n;
    if (v.size() < 2) {
        se = 0.0;
        return;
    }
    double ss = 0.0;
    for (double x : v) ss += (x - mean) * (x - mean);
    se = std::sqrt(ss / (n - 1.0) / n);
}

}  // namespace tklab::par
