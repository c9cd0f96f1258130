// Alphabets, a priori measures, and truncated configurations of the product
// space E^N with its 2^-n weighted metric and the shift/prepend dynamics.
//
// A Config holds the first D coordinates of a sequence.  prepend keeps the
// depth fixed by dropping the last coordinate, so every pipeline that uses n
// prepends or shifts carries a quantified truncation error of 2^-D against
// the infinite-depth object.
#pragma once

#include <cstddef>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "tklab/rng.hpp"

namespace tklab {

enum class AlphabetKind { kFinite, kSphere, kHalfLine, kRealLine };

class Alphabet {
public:
    static std::shared_ptr<const Alphabet> finite(std::vector<double> values);
    // Unit sphere S^{N-1} embedded in R^N, N >= 2.
    static std::shared_ptr<const Alphabet> sphere(int ambient_dim);
    static std::shared_ptr<const Alphabet> half_line();
    static std::shared_ptr<const Alphabet> real_line();

    AlphabetKind kind() const { return kind_; }
    // Number of reals used to store one alphabet point.
    int point_dim() const { return point_dim_; }
    std::size_t finite_size() const { return values_.size(); }
    const std::vector<double>& finite_values() const { return values_; }
    std::size_t finite_index(double value) const;

    // Intrinsic metric d_E: discrete 0/1 on finite alphabets, chordal on the
    // sphere, absolute difference on the lines.
    double point_distance(std::span<const double> a,
                          std::span<const double> b) const;

    bool contains(std::span<const double> p, double tol = 1e-9) const;
    bool same_as(const Alphabet& other) const;
    std::string describe() const;

private:
    Alphabet(AlphabetKind k, int dim, std::vector<double> values)
        : kind_(k), point_dim_(dim), values_(std::move(values)) {}

    AlphabetKind kind_;
    int point_dim_;
    std::vector<double> values_;  // finite alphabets only
};

using AlphabetPtr = std::shared_ptr<const Alphabet>;

// d capped at 1 at the configuration level; always on for unbounded
// alphabets so that diameters stay finite.
struct BoundedMetricPolicy {
    bool cap = true;
    double apply(double d) const { return cap ? (d < 1.0 ? d : 1.0) : d; }
    static BoundedMetricPolicy for_alphabet(const Alphabet& a) {
        BoundedMetricPolicy p;
        p.cap = (a.kind() == AlphabetKind::kHalfLine ||
                 a.kind() == AlphabetKind::kRealLine);
        return p;
    }
};

// Depth-truncated point of E^N.  Coordinates are stored flat, point_dim
// reals per coordinate, newest first.
struct Config {
    AlphabetPtr alphabet;
    std::vector<double> coords;

    std::size_t depth() const {
        return coords.size() / static_cast<std::size_t>(alphabet->point_dim());
    }
    std::span<const double> point(std::size_t i) const {
        const auto d = static_cast<std::size_t>(alphabet->point_dim());
        return {coords.data() + i * d, d};
    }
    std::span<double> mutable_point(std::size_t i) {
        const auto d = static_cast<std::size_t>(alphabet->point_dim());
        return {coords.data() + i * d, d};
    }
    void validate() const;  // throws on malformed coordinates
};

class AprioriMeasure {
public:
    // Finite alphabet with explicit weights (positive, summing to 1).
    static AprioriMeasure finite(AlphabetPtr alphabet,
                                 std::vector<double> weights);
    static AprioriMeasure uniform_finite(AlphabetPtr alphabet);
    // Uniform surface measure on the sphere.
    static AprioriMeasure sphere_uniform(AlphabetPtr alphabet);
    // Unit-rate exponential on the half line.
    static AprioriMeasure half_line_exponential(AlphabetPtr alphabet);
    // Standard normal on the real line.
    static AprioriMeasure real_line_gaussian(AlphabetPtr alphabet);

    const AlphabetPtr& alphabet() const { return alphabet_; }
    const std::vector<double>& weights() const { return weights_; }

    // Draws one point into out (size point_dim). Deterministic per stream.
    void sample(RngStream& rng, std::span<double> out) const;
    std::vector<double> sample(RngStream& rng) const;

private:
    AprioriMeasure(AlphabetPtr a, std::vector<double> w)
        : alphabet_(std::move(a)), weights_(std::move(w)) {}

    AlphabetPtr alphabet_;
    std::vector<double> weights_;  // finite only
};

// Sum_{n=1..D} 2^-n min{d_E(x_n, y_n), 1}.  Throws on mismatched alphabets
// or depths.  Truncation error against the infinite sum is <= 2^-D.
double config_distance(const Config& x, const Config& y);

// Distance restricted to the first `upto` coordinates (used after shared
// prefixes are known); still weighted from position 1.
double config_distance_prefix(const Config& x, const Config& y,
                              std::size_t upto);

inline double distance_truncation_bound(std::size_t depth) {
    return std::pow(2.0, -static_cast<double>(depth));
}

// (a, x_1, ..., x_{D-1}); depth preserved by dropping the last coordinate.
Config prepend(std::span<const double> a, const Config& x);

// In-place prepend for hot loops; identical result to prepend.
void prepend_in_place(Config& x, std::span<const double> a);

// (x_2, ..., x_D); depth D-1.  Throws at depth 1.
Config shift(const Config& x);

// (x_1, ..., x_{D-1}); depth D-1.  This is sigma(prepend(a, x)) for any a,
// the configuration the one-step normalizer h(sigma(a x)) is evaluated at.
Config drop_last(const Config& x);

std::vector<double> sample_point(const AprioriMeasure& mu, RngStream& rng);

// Random configuration with iid mu coordinates.
Config sample_config(const AprioriMeasure& mu, std::size_t depth,
                     RngStream& rng);

}  // namespace tklab
