#include "tklab/space.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <stdexcept>

namespace tklab {

std::shared_ptr<const Alphabet> Alphabet::finite(std::vector<double> values) {
    if (values.empty())
        throw std::invalid_argument("Alphabet::finite: empty value list");
    return std::shared_ptr<const Alphabet>(
        new Alphabet(AlphabetKind::kFinite, 1, std::move(values)));
}

std::shared_ptr<const Alphabet> Alphabet::sphere(int ambient_dim) {
    if (ambient_dim < 2)
        throw std::invalid_argument("Alphabet::sphere: need ambient dim >= 2");
    return std::shared_ptr<const Alphabet>(
        new Alphabet(AlphabetKind::kSphere, ambient_dim, {}));
}

std::shared_ptr<const Alphabet> Alphabet::half_line() {
    return std::shared_ptr<const Alphabet>(
        new Alphabet(AlphabetKind::kHalfLine, 1, {}));
}

std::shared_ptr<const Alphabet> Alphabet::real_line() {
    return std::shared_ptr<const Alphabet>(
        new Alphabet(AlphabetKind::kRealLine, 1, {}));
}

std::size_t Alphabet::finite_index(double value) const {
    for (std::size_t i = 0; i < values_.size(); ++i) {
        if (values_[i] == value) return i;
    }
    throw std::invalid_argument("Alphabet::finite_index: value not in alphabet");
}

double Alphabet::point_distance(std::span<const double> a,
                                std::span<const double> b) const {
    switch (kind_) {
        case AlphabetKind::kFinite:
            return a[0] == b[0] ? 0.0 : 1.0;
        case AlphabetKind::kSphere: {
            // chordal distance, equivalent to geodesic within constants
            double s = 0.0;
            for (int i = 0; i < point_dim_; ++i) {
                const double d = a[i] - b[i];
                s += d * d;
            }
            return std::sqrt(s);
        }
        case AlphabetKind::kHalfLine:
        case AlphabetKind::kRealLine:
            return std::abs(a[0] - b[0]);
    }
    return 0.0;
}

bool Alphabet::contains(std::span<const double> p, double tol) const {
    if (p.size() != static_cast<std::size_t>(point_dim_)) return false;
    switch (kind_) {
        case AlphabetKind::kFinite:
            return std::any_of(values_.begin(), values_.end(),
                               [&](double v) { return v == p[0]; });
        case AlphabetKind::kSphere: {
            double s = 0.0;
            for (int i = 0; i < point_dim_; ++i) s += p[i] * p[i];
            return std::abs(std::sqrt(s) - 1.0) <= tol;
        }
        case AlphabetKind::kHalfLine:
            return p[0] >= 0.0;
        case AlphabetKind::kRealLine:
            return std::isfinite(p[0]);
    }
    return false;
}

bool Alphabet::same_as(const Alphabet& other) const {
    if (this == &other) return true;
    return kind_ == other.kind_ && point_dim_ == other.point_dim_ &&
           values_ == other.values_;
}

std::string Alphabet::describe() const {
    switch (kind_) {
        case AlphabetKind::kFinite:
            return "finite(" + std::to_string(values_.size()) + ")";
        case AlphabetKind::kSphere:
            return "sphere(S^" + std::to_string(point_dim_ - 1) + ")";
        case AlphabetKind::kHalfLine:
            return "half-line";
        case AlphabetKind::kRealLine:
            return "real-line";
    }
    return "?";
}

void Config::validate() const {
    if (!alphabet) throw std::invalid_argument("Config: null alphabet");
    const auto dim = static_cast<std::size_t>(alphabet->point_dim());
    if (coords.empty() || coords.size() % dim != 0)
        throw std::invalid_argument("Config: coordinate count not a multiple "
                                    "of the alphabet point dimension");
    for (std::size_t i = 0; i < depth(); ++i) {
        if (!alphabet->contains(point(i)))
            throw std::invalid_argument("Config: coordinate " +
                                        std::to_string(i + 1) +
                                        " not in alphabet");
    }
}

AprioriMeasure AprioriMeasure::finite(AlphabetPtr alphabet,
                                      std::vector<double> weights) {
    if (!alphabet || alphabet->kind() != AlphabetKind::kFinite)
        throw std::invalid_argument("AprioriMeasure::finite: wrong alphabet");
    if (weights.size() != alphabet->finite_size())
        throw std::invalid_argument("AprioriMeasure::finite: weight count");
    double sum = 0.0;
    for (double w : weights) {
        if (w <= 0.0)
            throw std::invalid_argument(
                "AprioriMeasure::finite: weights must be strictly positive");
        sum += w;
    }
    if (std::abs(sum - 1.0) > 1e-12)
        throw std::invalid_argument(
            "AprioriMeasure::finite: weights must sum to 1 within 1e-12");
    return AprioriMeasure(std::move(alphabet), std::move(weights));
}

AprioriMeasure AprioriMeasure::uniform_finite(AlphabetPtr alphabet) {
    if (!alphabet || alphabet->kind() != AlphabetKind::kFinite)
        throw std::invalid_argument("uniform_finite: wrong alphabet");
    const std::size_t s = alphabet->finite_size();
    std::vector<double> w(s, 1.0 / static_cast<double>(s));
    // renormalize exactly so the invariant check is bitwise sound for any s
    double sum = 0.0;
    for (double v : w) sum += v;
    for (double& v : w) v /= sum;
    return AprioriMeasure(std::move(alphabet), std::move(w));
}

AprioriMeasure AprioriMeasure::sphere_uniform(AlphabetPtr alphabet) {
    if (!alphabet || alphabet->kind() != AlphabetKind::kSphere)
        throw std::invalid_argument("sphere_uniform: wrong alphabet");
    return AprioriMeasure(std::move(alphabet), {});
}

AprioriMeasure AprioriMeasure::half_line_exponential(AlphabetPtr alphabet) {
    if (!alphabet || alphabet->kind() != AlphabetKind::kHalfLine)
        throw std::invalid_argument("half_line_exponential: wrong alphabet");
    return AprioriMeasure(std::move(alphabet), {});
}

AprioriMeasure AprioriMeasure::real_line_gaussian(AlphabetPtr alphabet) {
    if (!alphabet || alphabet->kind() != AlphabetKind::kRealLine)
        throw std::invalid_argument("real_line_gaussian: wrong alphabet");
    return AprioriMeasure(std::move(alphabet), {});
}

void AprioriMeasure::sample(RngStream& rng, std::span<double> out) const {
    switch (alphabet_->kind()) {
        case AlphabetKind::kFinite: {
            const double u = rng.uniform();
            double acc = 0.0;
            std::size_t pick = weights_.size() - 1;
            for (std::size_t i = 0; i < weights_.size(); ++i) {
                acc += weights_[i];
                if (u < acc) {
                    pick = i;
                    break;
                }
            }
            out[0] = alphabet_->finite_values()[pick];
            return;
        }
        case AlphabetKind::kSphere: {
            // normalize a standard normal vector; exact uniformity
            const int n = alphabet_->point_dim();
            double norm2 = 0.0;
            do {
                norm2 = 0.0;
                for (int i = 0; i < n; ++i) {
                    out[i] = rng.normal();
                    norm2 += out[i] * out[i];
                }
            } while (norm2 < 1e-24);
            const double inv = 1.0 / std::sqrt(norm2);
            for (int i = 0; i < n; ++i) out[i] *= inv;
            return;
        }
        case AlphabetKind::kHalfLine:
            out[0] = rng.exponential();
            return;
        case AlphabetKind::kRealLine:
            out[0] = rng.normal();
            return;
    }
}

std::vector<double> AprioriMeasure::sample(RngStream& rng) const {
    std::vector<double> out(static_cast<std::size_t>(alphabet_->point_dim()));
    sample(rng, out);
    return out;
}

namespace {

void require_compatible(const Config& x, const Config& y) {
    if (!x.alphabet || !y.alphabet || !x.alphabet->same_as(*y.alphabet))
        throw std::invalid_argument("config_distance: mismatched alphabets");
    if (x.depth() != y.depth())
        throw std::invalid_argument("config_distance: mismatched depths");
}

}  // namespace

double config_distance(const Config& x, const Config& y) {
    require_compatible(x, y);
    return config_distance_prefix(x, y, x.depth());
}

double config_distance_prefix(const Config& x, const Config& y,
                              std::size_t upto) {
    const Alphabet& a = *x.alphabet;
    double sum = 0.0;
    double w = 1.0;
    for (std::size_t n = 0; n < upto; ++n) {
        w *= 0.5;
        const double d = a.point_distance(x.point(n), y.point(n));
        sum += w * (d < 1.0 ? d : 1.0);
    }
    return sum;
}

Config prepend(std::span<const double> a, const Config& x) {
    Config out = x;
    prepend_in_place(out, a);
    return out;
}

void prepend_in_place(Config& x, std::span<const double> a) {
    const auto dim = static_cast<std::size_t>(x.alphabet->point_dim());
    if (a.size() != dim)
        throw std::invalid_argument("prepend: point has wrong dimension");
    if (!x.alphabet->contains(a))
        throw std::invalid_argument("prepend: point not in alphabet");
    double* data = x.coords.data();
    std::memmove(data + dim, data, (x.coords.size() - dim) * sizeof(double));
    std::copy(a.begin(), a.end(), data);
}

Config shift(const Config& x) {
    if (x.depth() < 2)
        throw std::invalid_argument("shift: depth must be >= 2");
    const auto dim = static_cast<std::size_t>(x.alphabet->point_dim());
    Config out;
    out.alphabet = x.alphabet;
    out.coords.assign(x.coords.begin() + static_cast<std::ptrdiff_t>(dim),
                      x.coords.end());
    return out;
}

Config drop_last(const Config& x) {
    if (x.depth() < 2)
        throw std::invalid_argument("drop_last: depth must be >= 2");
    const auto dim = static_cast<std::size_t>(x.alphabet->point_dim());
    Config out;
    out.alphabet = x.alphabet;
    out.coords.assign(x.coords.begin(),
                      x.coords.end() - static_cast<std::ptrdiff_t>(dim));
    return out;
}

std::vector<double> sample_point(const AprioriMeasure& mu, RngStream& rng) {
    return mu.sample(rng);
}

Config sample_config(const AprioriMeasure& mu, std::size_t depth,
                     RngStream& rng) {
    if (depth == 0) throw std::invalid_argument("sample_config: depth 0");
    Config out;
    out.alphabet = mu.alphabet();
    const auto dim = static_cast<std::size_t>(out.alphabet->point_dim());
    out.coords.resize(depth * dim);
    for (std::size_t i = 0; i < depth; ++i) mu.sample(rng, out.mutable_point(i));
    return out;
}

}  // namespace tklab
