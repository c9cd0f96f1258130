// Deterministic substream random number generation.
//
// Every stochastic routine in the library draws from an RngStream derived
// from (master seed, stable label, index...).  Substreams are independent
// xoshiro256** engines seeded through splitmix64, so results depend only on
// the seed and the label path, never on thread count or evaluation order.
#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>
#include <string_view>

namespace tklab {

inline constexpr std::uint64_t kFnvOffset = 0xcbf29ce484222325ULL;
inline constexpr std::uint64_t kFnvPrime = 0x100000001b3ULL;

inline std::uint64_t fnv1a(std::string_view s, std::uint64_t h = kFnvOffset) {
    for (unsigned char c : s) {
        h ^= c;
        h *= kFnvPrime;
    }
    return h;
}

inline std::uint64_t fnv1a_u64(std::uint64_t v, std::uint64_t h) {
    for (int i = 0; i < 8; ++i) {
        h ^= (v >> (8 * i)) & 0xff;
        h *= kFnvPrime;
    }
    return h;
}

inline std::uint64_t splitmix64(std::uint64_t& state) {
    std::uint64_t z = (state += 0x9e3779b97f4a7c15ULL);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

class RngStream {
public:
    RngStream() : RngStream(0) {}

    explicit RngStream(std::uint64_t seed) {
        std::uint64_t sm = seed;
        for (auto& w : state_) w = splitmix64(sm);
        spare_valid_ = false;
    }

    std::uint64_t next_u64() {
        const std::uint64_t result = rotl(state_[1] * 5, 7) * 9;
        const std::uint64_t t = state_[1] << 17;
        state_[2] ^= state_[0];
        state_[3] ^= state_[1];
        state_[1] ^= state_[2];
        state_[0] ^= state_[3];
        state_[2] ^= t;
        state_[3] = rotl(state_[3], 45);
        return result;
    }

    // uniform on [0, 1)
    double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    // uniform integer in [0, n)
    std::uint64_t below(std::uint64_t n) {
        // multiply-shift; bias < 2^-64, irrelevant at our sample counts
        return static_cast<std::uint64_t>(
            (static_cast<unsigned __int128>(next_u64()) * n) >> 64);
    }

    double normal() {
        if (spare_valid_) {
            spare_valid_ = false;
            return spare_;
        }
        // Box-Muller; uniform() is in [0,1), so 1-u is in (0,1]
        const double u = 1.0 - uniform();
        const double v = uniform();
        const double r = std::sqrt(-2.0 * std::log(u));
        const double ang = 2.0 * std::numbers::pi * v;
        spare_ = r * std::sin(ang);
        spare_valid_ = true;
        return r * std::cos(ang);
    }

    double exponential() { return -std::log(1.0 - uniform()); }

private:
    static std::uint64_t rotl(std::uint64_t x, int k) {
        return (x << k) | (x >> (64 - k));
    }

    std::uint64_t state_[4];
    double spare_ = 0.0;
    bool spare_valid_ = false;
};

// Label-keyed substream derivation.  derive(seed, "op", i, j) is a pure
// function of its arguments.
inline RngStream derive_stream(std::uint64_t seed, std::string_view label) {
    std::uint64_t h = fnv1a(label, fnv1a_u64(seed, kFnvOffset));
    return RngStream(h);
}

inline RngStream derive_stream(std::uint64_t seed, std::string_view label,
                               std::uint64_t i) {
    std::uint64_t h = fnv1a_u64(i, fnv1a(label, fnv1a_u64(seed, kFnvOffset)));
    return RngStream(h);
}

inline RngStream derive_stream(std::uint64_t seed, std::string_view label,
                               std::uint64_t i, std::uint64_t j) {
    std::uint64_t h = fnv1a_u64(
        j, fnv1a_u64(i, fnv1a(label, fnv1a_u64(seed, kFnvOffset))));
    return RngStream(h);
}

// Derive a fresh master-style seed for a sub-component.
inline std::uint64_t derive_seed(std::uint64_t seed, std::string_view label,
                                 std::uint64_t i = 0) {
    return fnv1a_u64(i, fnv1a(label, fnv1a_u64(seed, kFnvOffset)));
}

}  // namespace tklab
