// Poisson-equation solver by truncated Neumann series, the FCLT variance
// (paper formula and Green-Kubo cross-check), path simulation of Y_n(t), and
// Donsker-style statistical tests.
#pragma once

#include <array>
#include <optional>
#include <vector>

#include "tklab/chains.hpp"
#include "tklab/coupling.hpp"

namespace tklab::limits {

struct CenteredObservable {
    Observable phi;            // phi - mu_hat(phi)
    double mean_estimate = 0.0;
    double error_bound = 0.0;  // 4 |phi|_inf / sqrt(n_est)
};

// phi - mu_hat(phi) with the long-run Psi average over n_est steps.
CenteredObservable center_observable(const chains::PsiSampler& psi,
                                     const Observable& phi, std::size_t n_est,
                                     const Config& start, std::uint64_t seed);

// upsilon_N = sum_{n=0}^{N} P^n phi, satisfying (I - P) upsilon = phi up to
// the truncated tail P^{N+1} phi.  Levels are estimated through the chain
// kernel itself: exact path enumeration on finite alphabets, otherwise
// Monte Carlo chains with frozen substreams (common random numbers) split
// into two independent halves so that products of evaluations stay unbiased.
class PoissonSolution {
public:
    struct Pair {
        double a = 0.0, b = 0.0;
        double mean() const { return 0.5 * (a + b); }
    };

    // upsilon_N(x) as two half-bank estimates.
    Pair eval_pair(const Config& x) const;
    // (P upsilon_N)(x) = sum_{n=1}^{N+1} P^n phi (x).
    Pair eval_P_pair(const Config& x) const;
    double eval(const Config& x) const { return eval_pair(x).mean(); }

    // P^{N+1} phi (x): the exact residual of the truncated solution.
    double tail_term(const Config& x) const;

    std::size_t truncation() const { return N_; }
    double residual_bound() const { return residual_bound_; }
    bool exact_levels() const { return exact_; }

    friend PoissonSolution solve_poisson(
        const chains::PsiSampler& psi, const Observable& phi_centered,
        std::size_t N, std::size_t chains_per_eval, std::uint64_t seed,
        const std::optional<coupling::DecayFit>& correlation_fit);

private:
    PoissonSolution() = default;
    std::array<double, 2> chain_halves(const Config& x, std::size_t upto,
                                       std::size_t from) const;
    double exact_level_sum(const Config& x, std::size_t from,
                           std::size_t upto) const;

    const chains::PsiSampler* psi_ = nullptr;
    Observable phi_;
    std::size_t N_ = 0;
    std::size_t chains_ = 32;
    std::uint64_t seed_ = 0;
    double residual_bound_ = 0.0;
    bool exact_ = false;
};

// Builds upsilon_N.  When a correlation-decay fit is supplied its exponent
// must be < -1 (otherwise the series is not summable and the solve is
// refused); the fitted tail sum past N becomes the residual bound.
PoissonSolution solve_poisson(
    const chains::PsiSampler& psi, const Observable& phi_centered,
    std::size_t N, std::size_t chains_per_eval, std::uint64_t seed,
    const std::optional<coupling::DecayFit>& correlation_fit = std::nullopt);

struct VarianceEstimate {
    double sigma2 = 0.0;       // mu(ups^2) - mu((P ups)^2)
    double sigma2_se = 0.0;
    double sigma2_gk = 0.0;    // mu(phi^2) + 2 sum_n mu(phi P^n phi)
    double sigma2_gk_se = 0.0;
    double sigma2_alt = 0.0;   // mu(ups^2) - (mu(P ups))^2, logged only
    bool routes_agree = false;
    bool rejected = false;     // sigma2 <= 0 (degenerate observable)
};

// sigma^2 along a stationary Psi run of n_est thinned states, with the
// Green-Kubo autocovariance cross-check on gk_steps chain steps.
VarianceEstimate variance(const chains::PsiSampler& psi,
                          const PoissonSolution& ups, const Observable& phi,
                          std::size_t n_est, std::size_t thin,
                          std::size_t gk_steps, const Config& start,
                          std::uint64_t seed);

// Autocovariance series gamma(n) = cov(phi(Psi_0), phi(Psi_n)) for
// n = 0..n_max, pooled over `chains` parallel runs of `steps` each.
struct CorrelationSeries {
    std::vector<double> gamma;
    std::vector<double> se;
    double mean = 0.0;
};
CorrelationSeries chain_correlations(const chains::PsiSampler& psi,
                                     const Observable& phi, std::size_t n_max,
                                     std::size_t steps, std::size_t n_chains,
                                     std::size_t burn, const Config& start,
                                     std::uint64_t seed);

// R x |t_grid| matrix of Y_n(t) = S_{[nt]} / (sigma sqrt n) values.
struct PathMatrix {
    std::vector<double> t_grid;
    std::size_t replicates = 0;
    std::vector<double> values;  // row-major, replicate x t

    double at(std::size_t r, std::size_t t) const {
        return values[r * t_grid.size() + t];
    }
};

// Stationary Psi replicates; the residual mean drift is removed with the
// pooled grand mean across replicates (two-stage centering).
PathMatrix simulate_fclt_paths(const chains::PsiSampler& psi,
                               const Observable& phi_centered, double sigma,
                               std::size_t n, std::size_t R,
                               const std::vector<double>& t_grid,
                               std::size_t burn, std::size_t depth,
                               std::uint64_t seed);

// Synthetic calibration paths on the same grid.
PathMatrix synthetic_brownian(std::size_t R, const std::vector<double>& t_grid,
                              std::uint64_t seed);
PathMatrix synthetic_constant(std::size_t R, const std::vector<double>& t_grid);
PathMatrix synthetic_stable(std::size_t R, std::size_t n, double alpha,
                            const std::vector<double>& t_grid,
                            std::uint64_t seed);

struct FcltReport {
    double sigma2 = 0.0;
    double sigma2_gk = 0.0;
    std::vector<double> t_checked;
    std::vector<double> ks;          // KS of Y(t)/sqrt(t) vs standard normal
    double ks_threshold = 0.0;       // 1.63 / sqrt(R)
    double variance_linearity = 0.0; // |Var Y(1/2) / (0.5 Var Y(1)) - 1|
    double increment_correlation = 0.0;
    double increment_threshold = 0.0;  // 6 / sqrt(R)
    std::size_t replicates = 0;
    std::size_t path_length = 0;
    bool accept = false;
};

// Marginal KS at t in {0.25, 0.5, 1}, variance linearity <= 0.15, and the
// disjoint-increment correlation band.  The grid must contain
// {0.25, 0.5, 0.75, 1}.
FcltReport fclt_test(const PathMatrix& paths, std::size_t R);

}  // namespace tklab::limits
