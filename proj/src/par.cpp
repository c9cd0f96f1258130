#include "tklab/par.hpp"

#include <atomic>

namespace tklab::par {

namespace {
std::atomic<Mode> g_mode{Mode::kParallel};
}

Mode mode() { return g_mode.load(std::memory_order_relaxed); }

void set_mode(Mode m) { g_mode.store(m, std::memory_order_relaxed); }

int worker_count() {
#ifdef _OPENMP
    if (mode() == Mode::kParallel) return omp_get_max_threads();
#endif
    return 1;
}

}  // namespace tklab::par
