// The natural coupling of paired backward orbits, weighted coupling costs,
// omega-Wasserstein distances between empirical measures, and decay fitting.
#pragma once

#include <optional>
#include <vector>

#include "tklab/chains.hpp"
#include "tklab/transfer.hpp"

namespace tklab::coupling {

struct CoupledPath {
    Config x_base, y_base;
    Config x_end, y_end;
    std::size_t n = 0;
    // shared prefix word, flat (point_dim reals per symbol, newest last)
    std::vector<double> word;
};

// One word w ~ mu^n prepended to both anchors.  The endpoints share their
// first n coordinates exactly and satisfy
// d(x_n, y_n) <= 2^-n d(x, y) + 2^-D deterministically.
CoupledPath sample_coupled(const KernelSpec& full_shift, const Config& x,
                           const Config& y, std::size_t n, RngStream& rng);

// F(n, r) = B r / (n r^alpha + b)^{1/alpha}.
struct DecayFunction {
    double B = 1.0;
    double b = 0.5;
    double alpha = 1.0;

    double operator()(double n, double r) const;
    // grid checks of the decay-function properties: monotone in each
    // argument, linear domination, and the composition rule
    // F(k+n, r) <= F(k, F(n, r)).
    bool check_properties(double r_max = 1.0, std::size_t grid = 24) const;
};

struct DecayFit {
    double exponent = 0.0;   // log-log slope
    double constant = 0.0;   // e^{intercept}
    double residual_rms = 0.0;
    double n_lo = 0.0, n_hi = 0.0;
    std::size_t dropped = 0;  // nonpositive points removed before fitting
};

// Least-squares slope of log value against log n; nonpositive values are
// dropped with a warning count, < 5 surviving points is refused.
DecayFit fit_polynomial_decay(const std::vector<std::pair<double, double>>& series);

// int omega(d(x_n, y_n)) e^{f^n(xbar)} dPi^n_{x,y} over K coupled words with
// the raw potential f.
TransferEstimate weighted_coupling_cost(const KernelSpec& kernel,
                                        const Potential& f,
                                        const ModulusOfContinuity& omega,
                                        const Config& x, const Config& y,
                                        std::size_t n,
                                        const EstimatorOptions& opt);

// Same with the normalized potential fbar of `sys`, evaluated at every
// checkpoint n in one pass (the fbar path sums telescope to two
// eigenfunction evaluations per checkpoint).
std::vector<TransferEstimate> coupling_cost_series(
    const NormalizedSystem& sys, const ModulusOfContinuity& omega,
    const Config& x, const Config& y, const std::vector<std::size_t>& ns,
    const EstimatorOptions& opt);

struct WassersteinResult {
    double value = 0.0;
    bool exact = false;  // optimal assignment (m <= threshold) vs greedy bound
};

inline constexpr std::size_t kAssignmentThreshold = 256;

// Upper bound on W_omega between two equal-size atom clouds: exact optimal
// assignment up to kAssignmentThreshold atoms, greedy matching beyond.
WassersteinResult wasserstein_estimate(const chains::EmpiricalMeasure& a,
                                       const chains::EmpiricalMeasure& b,
                                       const ModulusOfContinuity& omega);

struct ContractionProbe {
    std::vector<std::size_t> ns;
    std::vector<double> w_values;
    std::vector<double> noise_floor;  // same-law cloud distance per n
    DecayFit fit;
    bool bounded = true;      // W(n) <= C W(0) across the range
    bool decreasing = true;   // downward trend over the checkpoints
};

// Pushes two atom clouds forward with Psi steps (the particle realization of
// the normalized dual), measuring W_omega at each checkpoint.
ContractionProbe dual_contraction_probe(const chains::PsiSampler& psi,
                                        const chains::EmpiricalMeasure& seed_a,
                                        const chains::EmpiricalMeasure& seed_b,
                                        const std::vector<std::size_t>& ns,
                                        const ModulusOfContinuity& omega,
                                        std::uint64_t seed);

}  // namespace tklab::coupling
