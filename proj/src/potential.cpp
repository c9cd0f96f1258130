#include "tklab/potential.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "tklab/par.hpp"

namespace tklab {

namespace {

// sum_{n > depth} n^{-2-eps} <= depth^{-1-eps} / (1+eps)  (integral bound)
double coupling_tail(double eps, std::size_t depth) {
    return std::pow(static_cast<double>(depth), -1.0 - eps) / (1.0 + eps);
}

double coupling_series_upper(double eps, std::size_t terms = 100000) {
    double s = 0.0;
    for (std::size_t n = 1; n <= terms; ++n)
        s += std::pow(static_cast<double>(n), -2.0 - eps);
    return s + coupling_tail(eps, terms);
}

}  // namespace

FiniteRangePotential::FiniteRangePotential(AlphabetPtr alphabet,
                                           std::size_t range,
                                           std::vector<double> table)
    : alphabet_(std::move(alphabet)), range_(range), table_(std::move(table)) {
    if (!alphabet_ || alphabet_->kind() != AlphabetKind::kFinite)
        throw std::invalid_argument("FiniteRangePotential: finite alphabet required");
    if (range_ == 0) throw std::invalid_argument("FiniteRangePotential: range 0");
    std::size_t expect = 1;
    for (std::size_t i = 0; i < range_; ++i) expect *= alphabet_->finite_size();
    if (table_.size() != expect)
        throw std::invalid_argument("FiniteRangePotential: table size must be s^k");
    sup_ = *std::max_element(table_.begin(), table_.end());
    inf_ = *std::min_element(table_.begin(), table_.end());
}

std::size_t FiniteRangePotential::word_index(const Config& x) const {
    const std::size_t s = alphabet_->finite_size();
    std::size_t idx = 0, mult = 1;
    for (std::size_t i = 0; i < range_; ++i) {
        idx += alphabet_->finite_index(x.point(i)[0]) * mult;
        mult *= s;
    }
    return idx;
}

double FiniteRangePotential::eval(const Config& x) const {
    if (x.depth() < range_)
        throw std::invalid_argument("FiniteRangePotential: config too shallow");
    return table_[word_index(x)];
}

DysonSpherePotential::DysonSpherePotential(double eps, int ambient_dim)
    : eps_(eps), ambient_dim_(ambient_dim) {
    if (eps <= 0.0) throw std::invalid_argument("DysonSpherePotential: eps > 0");
    if (ambient_dim < 2)
        throw std::invalid_argument("DysonSpherePotential: N >= 2 required");
    sup_ = coupling_series_upper(eps);
}

void DysonSpherePotential::ensure_couplings(std::size_t n) const {
    while (j_.size() < n)
        j_.push_back(std::pow(static_cast<double>(j_.size() + 1), -2.0 - eps_));
}

double DysonSpherePotential::eval(const Config& x) const {
    const std::size_t d = x.depth();
    if (d < 2) throw std::invalid_argument("dyson-sphere: depth >= 2 required");
    ensure_couplings(d - 1);
    const auto x1 = x.point(0);
    double sum = 0.0;
    for (std::size_t n = 1; n < d; ++n) {
        const auto xn1 = x.point(n);
        double dot = 0.0;
        for (int i = 0; i < ambient_dim_; ++i) dot += x1[i] * xn1[i];
        sum += j_[n - 1] * dot;
    }
    return sum;
}

double DysonSpherePotential::tail_bound(std::size_t depth) const {
    if (depth < 2) return sup_ - inf_bound();
    return coupling_tail(eps_, depth - 1);
}

void DysonSpherePotential::interaction_field(const Config& x,
                                             std::span<double> v) const {
    const std::size_t d = x.depth();
    ensure_couplings(d);
    std::fill(v.begin(), v.end(), 0.0);
    for (std::size_t n = 1; n < d; ++n) {
        const auto xn = x.point(n - 1);
        const double jn = j_[n - 1];
        for (int i = 0; i < ambient_dim_; ++i) v[i] += jn * xn[i];
    }
}

DysonHalfLinePotential::DysonHalfLinePotential(double eps) : eps_(eps) {
    if (eps <= 0.0) throw std::invalid_argument("DysonHalfLinePotential: eps > 0");
    sup_ = coupling_series_upper(eps);
}

void DysonHalfLinePotential::ensure_couplings(std::size_t n) const {
    while (j_.size() < n)
        j_.push_back(std::pow(static_cast<double>(j_.size() + 1), -2.0 - eps_));
}

double DysonHalfLinePotential::eval(const Config& x) const {
    const std::size_t d = x.depth();
    ensure_couplings(d);
    const double p1 = x.point(0)[0] / (1.0 + x.point(0)[0]);
    double sum = 0.0;
    for (std::size_t n = 1; n <= d; ++n) {
        const double xn = x.point(n - 1)[0];
        sum += j_[n - 1] * xn / (1.0 + xn);
    }
    return p1 * sum;
}

double DysonHalfLinePotential::tail_bound(std::size_t depth) const {
    return coupling_tail(eps_, depth);
}

ModulusOfContinuity ModulusOfContinuity::power(double alpha) {
    if (alpha <= 0.0 || alpha > 1.0)
        throw std::invalid_argument("ModulusOfContinuity: alpha in (0,1]");
    ModulusOfContinuity m;
    m.is_log_ = false;
    m.alpha_ = alpha;
    return m;
}

ModulusOfContinuity ModulusOfContinuity::log_modulus(double eps, double r0) {
    if (eps <= 0.0) throw std::invalid_argument("ModulusOfContinuity: eps > 0");
    ModulusOfContinuity m;
    m.is_log_ = true;
    m.eps_ = eps;
    m.r0_ = r0 > 0.0 ? r0 : std::exp(2.0) * 2.0;  // e^2 (1 + diam), diam = 1
    if (m.r0_ <= 1.0)
        throw std::invalid_argument(
            "ModulusOfContinuity: r0 must exceed the space diameter");
    return m;
}

double ModulusOfContinuity::operator()(double r) const {
    if (r <= 0.0) return 0.0;
    if (!is_log_) return std::pow(r, alpha_);
    return std::pow(std::log(r0_ / r), -eps_);
}

double ModulusOfContinuity::linear_domination_constant() const {
    double best = 0.0;
    for (int i = 1; i <= 4096; ++i) {
        const double t = static_cast<double>(i) / 4096.0;
        best = std::max(best, t / (*this)(t));
    }
    return best;
}

double eval_potential(const Potential& f, const Config& x) {
    if (x.depth() < f.min_depth())
        throw std::invalid_argument("eval_potential: config shallower than the "
                                    "potential's minimum depth");
    return f.eval(x);
}

double birkhoff_sum(const Potential& f, std::span<const Config> path) {
    if (path.empty()) throw std::invalid_argument("birkhoff_sum: empty path");
    double s = 0.0;
    for (const Config& x : path) s += eval_potential(f, x);
    return s;
}

RegularityReport estimate_holder(const Potential& f,
                                 const ModulusOfContinuity& omega,
                                 const AprioriMeasure& mu, std::size_t depth,
                                 std::size_t pairs, std::uint64_t seed) {
    if (pairs == 0) throw std::invalid_argument("estimate_holder: pairs >= 1");
    std::vector<double> ratios(pairs, 0.0);
    par::fill_indexed(pairs, [&](std::size_t i) {
        RngStream rng = derive_stream(seed, "holder", i);
        const Config x = sample_config(mu, depth, rng);
        const Config y = sample_config(mu, depth, rng);
        const double d = config_distance(x, y);
        if (d <= 0.0) return;
        ratios[i] = std::abs(f.eval(x) - f.eval(y)) / omega(d);
    });
    RegularityReport rep;
    rep.samples = pairs;
    std::size_t best = 0;
    for (std::size_t i = 0; i < pairs; ++i) {
        if (ratios[i] > rep.estimate) {
            rep.estimate = ratios[i];
            best = i;
        }
    }
    // regenerate the max-attaining pair from its substream
    RngStream rng = derive_stream(seed, "holder", best);
    rep.max_x = sample_config(mu, depth, rng);
    rep.max_y = sample_config(mu, depth, rng);
    return rep;
}

RegularityReport flatness_estimate(const Potential& f,
                                   const AprioriMeasure& mu,
                                   const ModulusOfContinuity& omega_tilde,
                                   std::size_t n_max, std::size_t trials,
                                   std::size_t depth, std::uint64_t seed) {
    if (trials == 0 || n_max == 0)
        throw std::invalid_argument("flatness_estimate: trials, n_max >= 1");
    std::vector<double> full(trials, 0.0), half(trials, 0.0);
    par::fill_indexed(trials, [&](std::size_t t) {
        RngStream rng = derive_stream(seed, "flatness", t);
        Config x = sample_config(mu, depth, rng);
        Config y = sample_config(mu, depth, rng);
        const double wd = omega_tilde(config_distance(x, y));
        if (wd <= 0.0) return;
        std::vector<double> a(static_cast<std::size_t>(mu.alphabet()->point_dim()));
        double fx = 0.0, fy = 0.0, best = 0.0, best_half = 0.0;
        for (std::size_t n = 1; n <= n_max; ++n) {
            mu.sample(rng, a);
            prepend_in_place(x, a);
            prepend_in_place(y, a);
            fx += f.eval(x);
            fy += f.eval(y);
            best = std::max(best, std::abs(fx - fy) / wd);
            if (n == n_max / 2) best_half = best;
        }
        full[t] = best;
        half[t] = best_half;
    });
    RegularityReport rep;
    rep.samples = trials;
    double max_full = 0.0, max_half = 0.0;
    for (std::size_t t = 0; t < trials; ++t) {
        max_full = std::max(max_full, full[t]);
        max_half = std::max(max_half, half[t]);
    }
    rep.estimate = max_full;
    rep.stability_ratio = max_half > 0.0 ? max_full / max_half : 1.0;
    return rep;
}

ModulusOfContinuity dyson_flatness_modulus(double eps) {
    if (eps <= 2.0)
        throw std::invalid_argument(
            "dyson_flatness_modulus: the omega_{eps-1} flatness route requires "
            "eps > 2; construct a modulus explicitly to override");
    return ModulusOfContinuity::log_modulus(eps - 1.0);
}

}  // namespace tklab
