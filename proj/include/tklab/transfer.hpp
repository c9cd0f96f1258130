// The transfer operator L_{M,f} for each kernel variant: Monte Carlo
// iterates via the Birkhoff path formula, exact evaluation on finite
// alphabets, spectral radius by regression, the Cesaro eigenfunction, and
// potential normalization.
#pragma once

#include <memory>
#include <optional>
#include <variant>
#include <vector>

#include "tklab/observables.hpp"
#include "tklab/potential.hpp"
#include "tklab/space.hpp"
#include "tklab/stats.hpp"
#include "tklab/systems.hpp"
#include "tklab/tilt.hpp"

namespace tklab {

struct FullShiftKernel {
    AprioriMeasure mu;
};

// Backward walk of the weighted shift: m_x = delta_{S(x)} x mu, i.e. one
// step maps x to (r, x_1/alpha_1, ..., x_{dim-1}/alpha_{dim-1}).
struct WeightedShiftKernel {
    std::shared_ptr<const systems::WeightedShiftSystem> system;
};

struct IfsKernel {
    std::shared_ptr<const systems::IfsSystem> system;
};

class KernelSpec {
public:
    static KernelSpec full_shift(AprioriMeasure mu);
    static KernelSpec weighted_shift(
        std::shared_ptr<const systems::WeightedShiftSystem> sys);
    static KernelSpec ifs(std::shared_ptr<const systems::IfsSystem> sys);

    bool is_full_shift() const;
    bool is_weighted_shift() const;
    bool is_ifs() const;
    const FullShiftKernel& full_shift_kernel() const;
    const WeightedShiftKernel& weighted_shift_kernel() const;
    const IfsKernel& ifs_kernel() const;

    // Finite alphabet full shift admits exact sums.
    bool finite_alphabet() const;
    std::size_t branch_count() const;  // s for finite full shift, m for IFS

    // One backward-walk step (the Phi dynamics), in place.
    void step_backward(Config& x, RngStream& rng) const;
    // Deterministic branch step for finite/IFS enumeration.
    void apply_branch(Config& x, std::size_t branch) const;
    double branch_weight(const Config& x, std::size_t branch) const;

    // Forward dynamics T (sigma for the full shift, L for the weighted
    // shift); depth drops by one for the full shift.  Throws for IFS.
    Config forward(const Config& x) const;

    // T(prepend(a, x)) for any symbol a at fixed truncation: the last
    // coordinate is dropped (full shift) or zeroed (weighted shift).  The
    // one-step normalizer h(T(a x)) is evaluated here.
    Config backward_then_forward(const Config& x) const;

    std::string describe() const;

private:
    std::variant<FullShiftKernel, WeightedShiftKernel, IfsKernel> v_;
    explicit KernelSpec(std::variant<FullShiftKernel, WeightedShiftKernel,
                                     IfsKernel>
                            v)
        : v_(std::move(v)) {}
};

struct TransferEstimate {
    double value = 0.0;
    double std_error = 0.0;
    std::size_t samples = 0;
    bool exact = false;
};

enum class SamplerKind {
    kAuto,    // tilted where an exact conditional normalizer exists
    kPlain,   // words drawn from mu^n, weight e^{f^n}
    kTilted,  // sequentially tilted proposal with per-step normalizers
};

struct EstimatorOptions {
    std::size_t samples = 10000;
    std::uint64_t seed = 0;
    const char* label = "xfer";
    bool force_mc = false;  // skip the exact finite-alphabet route
    SamplerKind sampler = SamplerKind::kAuto;
};

// One weighted backward-path sampler, shared by every Monte Carlo estimator.
// Each step advances the configuration along the backward walk and returns
// the shifted log-weight increment (log weight minus sup f, never positive).
// In tilted mode the next symbol is drawn from the exact one-step
// conditional e^{f(a x)} dmu(a) / Z and the increment is the deterministic
// normalizer log Z: finite alphabets use the branch sum, Dyson sphere
// potentials the von Mises-Fisher normalizer.  Estimates stay unbiased; only
// the variance changes.
class PathSampler {
public:
    PathSampler(KernelSpec kernel, PotentialPtr f, SamplerKind sampler,
                std::size_t expected_steps = 0);

    struct Workspace {
        std::vector<double> field;
        Config scratch;
    };
    Workspace make_workspace(const Config& proto) const;

    // Advances cur; optionally records the prepended symbol (full-shift
    // kernels only) so coupled paths can replay it.
    double step(Config& cur, RngStream& rng, Workspace& ws,
                std::vector<double>* symbol = nullptr) const;

    double sup_f() const { return sup_f_; }
    bool tilted() const { return tilted_; }
    const KernelSpec& kernel() const { return kernel_; }

private:
    KernelSpec kernel_;
    PotentialPtr f_;
    double sup_f_ = 0.0;
    bool tilted_ = false;
    bool finite_tilt_ = false;
    const DysonSpherePotential* dyson_ = nullptr;
    std::shared_ptr<const TiltNormalizerTable> table_;
};

// Monte Carlo / exact estimate of L_{M,f} phi (x) = int e^{f(y)} phi(y) dm_x.
TransferEstimate apply_transfer(const KernelSpec& kernel, const Potential& f,
                                const Observable& phi, const Config& x,
                                const EstimatorOptions& opt);

// L^n phi(x) by single-path word sampling of the Birkhoff form; exact word
// enumeration on finite alphabets when s^n stays below 2^20.
TransferEstimate apply_transfer_n(const KernelSpec& kernel, const Potential& f,
                                  const Observable& phi, const Config& x,
                                  std::size_t n, const EstimatorOptions& opt);

struct SpectralRadiusEstimate {
    double rho = 0.0;
    double log_rho_se = 0.0;
    stats::LineFit fit;
    std::vector<double> log_levels;  // log Lhat^n 1(probe), n = 1..n_max
    std::vector<double> level_rel_se;
};

// rho from the regression of log L^n 1(probe) against n; the bounded
// comparability prefactor cancels in the slope.  Computed with the potential
// shifted by -sup f internally so the weights cannot overflow.
SpectralRadiusEstimate spectral_radius(const KernelSpec& kernel,
                                       const Potential& f, const Config& probe,
                                       std::size_t n_max,
                                       const EstimatorOptions& opt);

// Cesaro eigenfunction: the average of rho^-j Lhat^j 1(x) over the settled
// level window (n/2, n].  Early levels carry the transient of the bounded
// comparability corridor, so averaging the stabilized window converges much
// faster than the full 0..n mean at the same cost; constant potentials give
// exactly 1 either way.  Levels are estimated by a particle population of
// bank_paths backward walkers resampled each step (product of per-step
// normalizer means), which keeps the weight variance linear in the depth.
// All substreams are frozen and keyed by the seed alone (common random
// numbers), so h is a deterministic function of x given the seed.
class CesaroEigenfunction {
public:
    // max_walk_depth > 0 truncates the internal walks to that depth; the
    // induced error is bounded by n_levels times the potential's tail bound
    // there, and h stays a deterministic function of the argument.
    CesaroEigenfunction(KernelSpec kernel, PotentialPtr f, double rho,
                        std::size_t n_levels, std::size_t bank_paths,
                        std::uint64_t seed, SamplerKind sampler,
                        std::size_t max_walk_depth = 0);
    double eval(const Config& x) const;
    double log_eval(const Config& x) const;
    std::size_t levels() const { return n_levels_; }
    std::size_t bank_paths() const { return bank_paths_; }

private:
    double eval_uncached(const Config& x) const;

    KernelSpec kernel_;
    PotentialPtr f_;
    double rho_;
    std::size_t n_levels_;
    std::size_t bank_paths_;
    std::uint64_t seed_;
    std::size_t max_walk_depth_ = 0;
    std::shared_ptr<const PathSampler> sampler_;
    // finite alphabets: h depends on the leading range-1 coordinates only,
    // so the values are precomputed per cylinder word
    std::size_t cache_word_len_ = 0;
    std::vector<double> cache_;
};

struct NormalizeOptions {
    std::size_t depth = 64;
    std::size_t rho_levels = 16;        // regression range for lambda
    std::size_t rho_samples = 4096;
    std::size_t h_levels = 12;          // Cesaro truncation
    std::size_t h_bank = 32;            // paths in the frozen bank
    std::size_t h_walk_depth = 0;       // 0 = full depth inside h
    std::size_t probes = 32;
    std::size_t check_samples = 100000;  // K for the L_fbar 1 probe check
    double tolerance = 0.02;
    std::uint64_t seed = 1;
    SamplerKind sampler = SamplerKind::kAuto;
    // Flatness evidence is required for Dyson potentials before normalizing;
    // setting this skips it (user override).
    bool skip_flatness_check = false;
    std::size_t flatness_trials = 256;
    std::size_t flatness_n_max = 32;
};

struct NormalizeDiagnostics {
    double sup_deviation = 0.0;          // sup over probes |L_fbar 1 - 1|
    std::vector<double> probe_values;    // L_fbar 1 per probe
    std::vector<double> probe_se;
    double h_min = 0.0, h_max = 0.0;     // observed envelope over probes
    stats::LineFit rho_fit;
    std::optional<RegularityReport> flatness;
    bool accepted = false;
    double tolerance = 0.0;
};

class NormalizedSystem {
public:
    const KernelSpec& kernel() const { return kernel_; }
    const PotentialPtr& base_potential() const { return f_; }
    double lambda() const { return lambda_; }
    double log_lambda() const { return log_lambda_; }
    double h(const Config& x) const { return h_->eval(x); }
    double log_h(const Config& x) const { return h_->log_eval(x); }
    const CesaroEigenfunction& eigenfunction() const { return *h_; }

    // fbar = f + log h - log h o T - log lambda
    double fbar(const Config& x) const;
    // Birkhoff sum of fbar along a backward path from x0 to endpoint xn in n
    // steps, telescoped to two eigenfunction evaluations.
    double fbar_path_sum(double f_path_sum, const Config& x0,
                         const Config& xn, std::size_t n) const;

    double sup_fbar() const { return sup_fbar_; }
    double inf_fbar() const { return inf_fbar_; }
    bool accepted() const { return diag_.accepted; }
    const NormalizeDiagnostics& diagnostics() const { return diag_; }
    std::uint64_t seed() const { return seed_; }
    SamplerKind sampler() const { return sampler_; }

    friend NormalizedSystem normalize(KernelSpec kernel, PotentialPtr f,
                                      const NormalizeOptions& opt);

private:
    NormalizedSystem(KernelSpec k, PotentialPtr f)
        : kernel_(std::move(k)), f_(std::move(f)) {}

    KernelSpec kernel_;
    PotentialPtr f_;
    double lambda_ = 1.0, log_lambda_ = 0.0;
    std::shared_ptr<const CesaroEigenfunction> h_;
    double sup_fbar_ = 0.0, inf_fbar_ = 0.0;
    NormalizeDiagnostics diag_;
    std::uint64_t seed_ = 0;
    SamplerKind sampler_ = SamplerKind::kAuto;
};

// Assembles lambda, h, fbar and runs the probe check sup |L_fbar 1 - 1|.
// A system whose diagnostics exceed the tolerance is returned flagged
// non-accepting rather than thrown away.
NormalizedSystem normalize(KernelSpec kernel, PotentialPtr f,
                           const NormalizeOptions& opt);

// True when the (kernel, potential) pair supports the tilted proposal.
bool tilted_sampler_available(const KernelSpec& kernel, const Potential& f);

}  // namespace tklab
