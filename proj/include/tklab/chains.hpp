// Simulators for the backward-walk chain Phi and the normalized chain Psi,
// Breiman averages, empirical stationarity checks, and support probes.
#pragma once

#include <functional>
#include <memory>
#include <vector>

#include "tklab/transfer.hpp"

namespace tklab::chains {

struct ChainState {
    Config current;
    std::size_t step = 0;
    RngStream rng;
    // rejection diagnostics (Psi only)
    std::size_t proposals = 0;
    std::size_t envelope_clamps = 0;
};

ChainState make_state(Config start, std::uint64_t seed,
                      std::string_view label = "chain");

// One step of the raw backward walk Phi.
void step_phi(const KernelSpec& kernel, ChainState& state);

// Exact sampler for the normalized chain Psi: draws the next symbol with
// density proportional to e^{fbar(a . x)} with respect to the a priori
// measure, by rejection.  Finite alphabets use per-cylinder transition rows
// computed once from the same densities.
class PsiSampler {
public:
    explicit PsiSampler(std::shared_ptr<const NormalizedSystem> sys,
                        bool allow_unaccepted = false);

    void step(ChainState& state) const;
    const NormalizedSystem& system() const { return *sys_; }

    // Acceptance lower bound e^{-(sup fbar - inf fbar)} from the system's
    // declared envelope.
    double acceptance_lower_bound() const;

    // Finite-alphabet chains expose their cached transition rows so exact
    // expectations can enumerate the same kernel the sampler steps.
    bool has_finite_rows() const { return !row_cdf_.empty(); }
    double row_probability(const Config& x, std::size_t symbol) const;

    static constexpr std::size_t kProposalCap = 1000000;

private:
    std::shared_ptr<const NormalizedSystem> sys_;
    bool tilted_proposal_ = false;
    std::shared_ptr<const TiltNormalizerTable> tilt_table_;
    const DysonSpherePotential* dyson_ = nullptr;
    double h_envelope_ = 0.0;  // upper bound used by the tilted proposal
    // finite-alphabet transition cache: rows of cumulative probabilities
    std::size_t state_len_ = 0;
    std::vector<double> row_cdf_;  // [state][symbol]
    std::size_t symbols_ = 0;

    std::size_t finite_state_index(const Config& x) const;
};

// Runs `burn_in` Psi steps; used to approximate stationary starts.
void burn_in(const PsiSampler& psi, ChainState& state, std::size_t steps);

struct BreimanResult {
    std::vector<double> partial_averages;  // A_m, m = 1..n
    double sup_norm = 1.0;
    // contract bound 4 |phi|_inf / sqrt(m)
    double tolerance(std::size_t m) const;
};

// Partial averages A_m = (1/m) sum_{k<m} (P phi(X_k) - phi(X_k)) along the
// Phi chain; P phi is estimated with `p_samples` fresh draws per state
// (exact on finite alphabets).
BreimanResult breiman_average(const KernelSpec& kernel, const Observable& phi,
                              std::size_t n, std::size_t p_samples,
                              const Config& start, std::uint64_t seed);

// Same along the Psi chain of a normalized system.
BreimanResult breiman_average(const PsiSampler& psi, const Observable& phi,
                              std::size_t n, std::size_t p_samples,
                              const Config& start, std::uint64_t seed);

struct TwoSampleReport {
    double ks = 0.0;
    double threshold = 0.0;
    bool accept = false;
    std::size_t replicates = 0;
};

// Compares the law of sum_{j=1..n} phi(Psi_j) (stationary start by burn-in)
// against the law of sum_{j=0..n-1} phi(sigma^j x) along Psi-sampled
// configurations; the two agree for the exact chain.
TwoSampleReport birkhoff_vs_chain_check(const PsiSampler& psi,
                                        const Observable& phi, std::size_t n,
                                        std::size_t replicates,
                                        std::size_t burn_in_steps,
                                        std::size_t depth, std::uint64_t seed);

struct StationarityEntry {
    std::string name;
    double nu_P_phi = 0.0;
    double nu_phi = 0.0;
    double discrepancy = 0.0;
    double tolerance = 0.0;
};

struct StationarityReport {
    std::vector<StationarityEntry> entries;
    std::size_t n = 0;
    bool accept = false;
};

// Builds nu_n = (1/n) sum delta_{Psi_i} and reports |nu_n(P phi) - nu_n(phi)|
// for each test function.
StationarityReport empirical_stationarity(const PsiSampler& psi,
                                          const std::vector<Observable>& phis,
                                          std::size_t n, std::size_t p_samples,
                                          const Config& start,
                                          std::uint64_t seed);

// Atom cloud standing in for a sampled measure; integrates test functions
// with equal weights.
struct EmpiricalMeasure {
    std::vector<Config> atoms;

    std::size_t count() const { return atoms.size(); }
    double integrate(const Observable& phi) const {
        double s = 0.0;
        for (const auto& a : atoms) s += phi(a);
        return s / static_cast<double>(atoms.size());
    }
};

// Collects every `thin`-th state of the chain into an atom cloud.
EmpiricalMeasure collect_psi_samples(const PsiSampler& psi, ChainState state,
                                     std::size_t atoms, std::size_t thin);

struct BallSpec {
    Config center;
    double radius = 0.0;
};

struct HitTable {
    std::vector<std::size_t> hits;
    std::size_t steps = 0;
    bool all_hit = false;
};

using Stepper = std::function<void(ChainState&)>;
using Metric = std::function<double(const Config&, const Config&)>;

// Counts chain visits to each ball over n_steps (the start counts as step 0).
HitTable support_probe(const Stepper& stepper, ChainState state,
                       const Metric& metric, const std::vector<BallSpec>& balls,
                       std::size_t n_steps);

}  // namespace tklab::chains
