// Bounded test observables on configurations, with declared sup-norm bounds
// (the tolerance formulas need them).
#pragma once

#include <functional>
#include <string>
#include <utility>

#include "tklab/space.hpp"

namespace tklab {

struct Observable {
    std::function<double(const Config&)> fn;
    double sup_norm = 1.0;
    std::string name = "phi";

    double operator()(const Config& x) const { return fn(x); }
};

inline Observable constant_observable(double c) {
    return {[c](const Config&) { return c; }, std::abs(c), "const"};
}

inline Observable one_observable() { return constant_observable(1.0); }

// Value of the first coordinate (finite/line alphabets) or its first
// component (sphere).
inline Observable first_coordinate() {
    return {[](const Config& x) { return x.point(0)[0]; }, 1.0, "x1"};
}

// <x_1, x_2> for sphere alphabets, x_1 * x_2 otherwise.
inline Observable pair_product() {
    return {[](const Config& x) {
                const auto a = x.point(0);
                const auto b = x.point(1);
                double s = 0.0;
                for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
                return s;
            },
            1.0, "x1x2"};
}

// min{d(x, x0), 1} against a reference configuration.
inline Observable radial_observable(Config x0) {
    auto ref = std::make_shared<Config>(std::move(x0));
    return {[ref](const Config& x) {
                const double d = config_distance(x, *ref);
                return d < 1.0 ? d : 1.0;
            },
            1.0, "radial"};
}

inline Observable shifted(Observable phi, double offset) {
    auto inner = phi.fn;
    return {[inner, offset](const Config& x) { return inner(x) - offset; },
            phi.sup_norm + std::abs(offset), phi.name + "-centered"};
}

}  // namespace tklab
