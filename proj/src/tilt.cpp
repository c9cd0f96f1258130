#include "tklab/tilt.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>

namespace tklab {

namespace {

constexpr double kPi = std::numbers::pi;

// Gamma(a, 1) by Marsaglia-Tsang, with the boost for a < 1.
double sample_gamma(double a, RngStream& rng) {
    if (a < 1.0) {
        const double u = rng.uniform();
        return sample_gamma(a + 1.0, rng) * std::pow(1.0 - u, 1.0 / a);
    }
    const double d = a - 1.0 / 3.0;
    const double c = 1.0 / std::sqrt(9.0 * d);
    for (;;) {
        double x, v;
        do {
            x = rng.normal();
            v = 1.0 + c * x;
        } while (v <= 0.0);
        v = v * v * v;
        const double u = rng.uniform();
        if (u < 1.0 - 0.0331 * x * x * x * x) return d * v;
        if (std::log(1.0 - u) < 0.5 * x * x + d * (1.0 - v + std::log(v)))
            return d * v;
    }
}

double sample_beta(double a, double b, RngStream& rng) {
    const double x = sample_gamma(a, rng);
    const double y = sample_gamma(b, rng);
    return x / (x + y);
}

// von Mises angle around 0 by Best-Fisher rejection.
double sample_von_mises_angle(double kappa, RngStream& rng) {
    if (kappa < 1e-10) return rng.uniform(-kPi, kPi);
    const double tau = 1.0 + std::sqrt(1.0 + 4.0 * kappa * kappa);
    const double rho = (tau - std::sqrt(2.0 * tau)) / (2.0 * kappa);
    const double r = (1.0 + rho * rho) / (2.0 * rho);
    for (;;) {
        const double u1 = rng.uniform();
        const double z = std::cos(kPi * u1);
        const double fr = (1.0 + r * z) / (r + z);
        const double c = kappa * (r - fr);
        const double u2 = rng.uniform();
        if (c * (2.0 - c) - u2 > 0.0 ||
            std::log(c / u2) + 1.0 - c >= 0.0) {
            const double u3 = rng.uniform();
            return (u3 < 0.5 ? -1.0 : 1.0) * std::acos(fr);
        }
    }
}

}  // namespace

double log_sphere_tilt_normalizer(double kappa, int ambient_dim) {
    if (ambient_dim < 2)
        throw std::invalid_argument("log_sphere_tilt_normalizer: N >= 2");
    if (kappa < 1e-12) return 0.0;
    const double nu = ambient_dim / 2.0 - 1.0;
    const double iv = std::cyl_bessel_i(nu, kappa);
    return std::lgamma(ambient_dim / 2.0) - nu * std::log(kappa / 2.0) +
           std::log(iv);
}

double sphere_tilt_mean_cosine(double kappa, int ambient_dim) {
    if (kappa < 1e-12) return 0.0;
    const double nu = ambient_dim / 2.0 - 1.0;
    return std::cyl_bessel_i(nu + 1.0, kappa) / std::cyl_bessel_i(nu, kappa);
}

void sample_sphere_tilted(std::span<const double> direction, double kappa,
                          RngStream& rng, std::span<double> out) {
    const int n = static_cast<int>(out.size());
    if (n < 2) throw std::invalid_argument("sample_sphere_tilted: N >= 2");
    if (kappa < 1e-10) {
        // uniform on the sphere
        double norm2;
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
    double dn = 0.0;
    for (int i = 0; i < n; ++i) dn += direction[i] * direction[i];
    dn = std::sqrt(dn);

    if (n == 2) {
        const double base = std::atan2(direction[1], direction[0]);
        const double th = base + sample_von_mises_angle(kappa, rng);
        out[0] = std::cos(th);
        out[1] = std::sin(th);
        return;
    }

    // Wood's algorithm: cosine w against the mean direction, then a uniform
    // tangential component.
    const double p = static_cast<double>(n - 1);
    const double b = (-2.0 * kappa + std::sqrt(4.0 * kappa * kappa + p * p)) / p;
    const double x0 = (1.0 - b) / (1.0 + b);
    const double c = kappa * x0 + p * std::log(1.0 - x0 * x0);
    double w;
    for (;;) {
        const double z = sample_beta(p / 2.0, p / 2.0, rng);
        const double u = rng.uniform();
        w = (1.0 - (1.0 + b) * z) / (1.0 - (1.0 - b) * z);
        if (kappa * w + p * std::log(1.0 - x0 * w) - c >= std::log(1.0 - u))
            break;
    }
    // tangent vector orthogonal to the direction
    std::vector<double> t(static_cast<std::size_t>(n));
    double tn2;
    do {
        for (int i = 0; i < n; ++i) t[static_cast<std::size_t>(i)] = rng.normal();
        double proj = 0.0;
        for (int i = 0; i < n; ++i)
            proj += t[static_cast<std::size_t>(i)] * direction[i];
        proj /= dn * dn;
        tn2 = 0.0;
        for (int i = 0; i < n; ++i) {
            t[static_cast<std::size_t>(i)] -= proj * direction[i];
            tn2 += t[static_cast<std::size_t>(i)] * t[static_cast<std::size_t>(i)];
        }
    } while (tn2 < 1e-24);
    const double s = std::sqrt(1.0 - w * w) / std::sqrt(tn2);
    for (int i = 0; i < n; ++i)
        out[i] = w * direction[i] / dn + s * t[static_cast<std::size_t>(i)];
}

TiltNormalizerTable::TiltNormalizerTable(int ambient_dim, double kappa_max,
                                         std::size_t points)
    : dim_(ambient_dim), kappa_max_(kappa_max) {
    if (points < 2) throw std::invalid_argument("TiltNormalizerTable: points");
    step_ = kappa_max_ / static_cast<double>(points - 1);
    table_.resize(points);
    for (std::size_t i = 0; i < points; ++i)
        table_[i] =
            log_sphere_tilt_normalizer(static_cast<double>(i) * step_, dim_);
}

double TiltNormalizerTable::log_z(double kappa) const {
    if (kappa <= 0.0) return 0.0;
    if (kappa >= kappa_max_) return log_sphere_tilt_normalizer(kappa, dim_);
    const double pos = kappa / step_;
    const auto i = static_cast<std::size_t>(pos);
    const double frac = pos - static_cast<double>(i);
    return table_[i] * (1.0 - frac) + table_[i + 1] * frac;
}

}  // namespace tklab
