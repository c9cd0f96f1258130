// Potentials on configurations, moduli of continuity, and empirical
// regularity (Holder / flatness) estimators.
#pragma once

#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "tklab/space.hpp"

namespace tklab {

class Potential {
public:
    virtual ~Potential() = default;
    // Requires depth(x) >= min_depth(); value lies in [inf_bound, sup_bound].
    virtual double eval(const Config& x) const = 0;
    virtual double sup_bound() const = 0;
    virtual double inf_bound() const = 0;
    // Bound on |f(x) - f(x truncated to `depth`)|.
    virtual double tail_bound(std::size_t depth) const = 0;
    virtual std::size_t min_depth() const { return 1; }
    virtual std::string name() const = 0;
};

using PotentialPtr = std::shared_ptr<const Potential>;

class ConstantPotential final : public Potential {
public:
    explicit ConstantPotential(double c) : c_(c) {}
    double eval(const Config&) const override { return c_; }
    double sup_bound() const override { return c_; }
    double inf_bound() const override { return c_; }
    double tail_bound(std::size_t) const override { return 0.0; }
    std::string name() const override { return "constant"; }
    double value() const { return c_; }

private:
    double c_;
};

// f(x) = table[word(x_1..x_k)] on a finite alphabet; word index is
// little-endian in the coordinates (x_1 fastest).
class FiniteRangePotential final : public Potential {
public:
    FiniteRangePotential(AlphabetPtr alphabet, std::size_t range,
                         std::vector<double> table);
    double eval(const Config& x) const override;
    double sup_bound() const override { return sup_; }
    double inf_bound() const override { return inf_; }
    double tail_bound(std::size_t depth) const override {
        return depth >= range_ ? 0.0 : sup_ - inf_;
    }
    std::size_t min_depth() const override { return range_; }
    std::string name() const override { return "finite-range"; }
    std::size_t range() const { return range_; }
    std::size_t word_index(const Config& x) const;
    const std::vector<double>& table() const { return table_; }
    const AlphabetPtr& alphabet() const { return alphabet_; }

private:
    AlphabetPtr alphabet_;
    std::size_t range_;
    std::vector<double> table_;
    double sup_, inf_;
};

// Long-range pair interaction sum_{n>=1} J(n) <x_1, x_{n+1}> on the sphere
// S^{N-1}, J(n) = n^{-2-eps}.  The series is summed over n = 1..depth-1; the
// dropped tail is bounded by tail_bound(depth).
class DysonSpherePotential final : public Potential {
public:
    DysonSpherePotential(double eps, int ambient_dim);
    double eval(const Config& x) const override;
    double sup_bound() const override { return sup_; }
    double inf_bound() const override { return -sup_; }
    double tail_bound(std::size_t depth) const override;
    std::size_t min_depth() const override { return 2; }
    std::string name() const override { return "dyson-sphere"; }

    double eps() const { return eps_; }
    int ambient_dim() const { return ambient_dim_; }
    double coupling(std::size_t n) const {
        return n <= j_.size() ? j_[n - 1] : 0.0;
    }
    // v(x) = sum_{n=1..depth-1} J(n) x_n, so that f(a x) = <a, v(x)> for the
    // depth-preserving prepend.  Used by the tilted samplers.
    void interaction_field(const Config& x, std::span<double> v) const;

private:
    void ensure_couplings(std::size_t n) const;

    double eps_;
    int ambient_dim_;
    double sup_;
    mutable std::vector<double> j_;
};

// f(x) = x_1/(1+x_1) * sum_{n>=1} J(n) x_n/(1+x_n) on the half line,
// J(n) = n^{-2-eps}; summed over n = 1..depth.
class DysonHalfLinePotential final : public Potential {
public:
    explicit DysonHalfLinePotential(double eps);
    double eval(const Config& x) const override;
    double sup_bound() const override { return sup_; }
    double inf_bound() const override { return 0.0; }
    double tail_bound(std::size_t depth) const override;
    std::string name() const override { return "dyson-halfline"; }
    double eps() const { return eps_; }

private:
    double eps_;
    double sup_;
    mutable std::vector<double> j_;
    void ensure_couplings(std::size_t n) const;
};

// Moduli of continuity: r^alpha and log(r0/r)^-eps.
class ModulusOfContinuity {
public:
    static ModulusOfContinuity power(double alpha);
    // r0 defaults to e^2 (1 + diam) with diam = 1, keeping log(r0/r) >= 2 on
    // the whole domain.
    static ModulusOfContinuity log_modulus(double eps, double r0 = 0.0);

    double operator()(double r) const;
    bool is_log() const { return is_log_; }
    double eps() const { return eps_; }
    double alpha() const { return alpha_; }
    double r0() const { return r0_; }
    // sup_{t in (0,1]} t / omega(t), evaluated numerically on a grid.
    double linear_domination_constant() const;

private:
    bool is_log_ = false;
    double alpha_ = 1.0;
    double eps_ = 1.0;
    double r0_ = 0.0;
};

struct RegularityReport {
    double estimate = 0.0;      // lower bound on Hol_omega(f) or flatness C
    double stability_ratio = 1.0;  // estimate at n_max over estimate at n_max/2
    std::size_t samples = 0;
    std::optional<Config> max_x;
    std::optional<Config> max_y;
};

double eval_potential(const Potential& f, const Config& x);

// f^n over a prepend path (x_1, ..., x_n).
double birkhoff_sum(const Potential& f, std::span<const Config> path);

// Randomized lower bound on Hol_omega(f) over `pairs` sampled pairs.
RegularityReport estimate_holder(const Potential& f,
                                 const ModulusOfContinuity& omega,
                                 const AprioriMeasure& mu, std::size_t depth,
                                 std::size_t pairs, std::uint64_t seed);

// Flatness constant of f along naturally coupled prepend paths:
// max |f^n(xbar_w) - f^n(ybar_w)| / omega(d(x,y)) over trials and n <= n_max.
RegularityReport flatness_estimate(const Potential& f,
                                   const AprioriMeasure& mu,
                                   const ModulusOfContinuity& omega_tilde,
                                   std::size_t n_max, std::size_t trials,
                                   std::size_t depth, std::uint64_t seed);

// Target modulus for the automatic Dyson flatness route; requires eps > 2
// (the omega_{eps-1} argument needs it), otherwise throws.  Callers may
// build a modulus by hand to override.
ModulusOfContinuity dyson_flatness_modulus(double eps);

}  // namespace tklab
