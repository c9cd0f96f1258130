// The two non-shift example systems: backward weighted shifts on truncated
// ell^p and nonexpansive iterated function systems, with transitivity and
// attractor probes.
#pragma once

#include <functional>
#include <memory>
#include <optional>
#include <span>
#include <vector>

#include "tklab/rng.hpp"
#include "tklab/space.hpp"

namespace tklab::systems {

// Backward weighted shift L(x) = (alpha_n x_{n+1})_n on ell^p, truncated to
// `dim` coordinates with zero padding.
class WeightedShiftSystem {
public:
    WeightedShiftSystem(std::vector<double> alpha, double c_lo, double c_hi,
                        double p, AprioriMeasure apriori);

    std::size_t dim() const { return alpha_.size(); }
    double p() const { return p_; }
    double c_lo() const { return c_lo_; }
    double c_hi() const { return c_hi_; }
    const std::vector<double>& alpha() const { return alpha_; }
    const AprioriMeasure& apriori() const { return apriori_; }

    // beta_k^n = alpha_k ... alpha_{k+n-1}; requires k >= 1, k+n-1 <= dim.
    double beta(std::size_t k, std::size_t n) const;
    // d_n = inf over valid k of beta_k^n (truncated to k+n-1 <= dim).
    double d_n(std::size_t n) const;

private:
    std::vector<double> alpha_;
    double c_lo_, c_hi_, p_;
    AprioriMeasure apriori_;
};

// L(x) = (alpha_1 x_2, ..., alpha_{dim-1} x_dim, 0).
std::vector<double> weighted_shift_apply(const WeightedShiftSystem& sys,
                                         std::span<const double> x);

// S(x) = (x_1/alpha_1, x_2/alpha_2, ...).
std::vector<double> s_map(const WeightedShiftSystem& sys,
                          std::span<const double> x);

double lp_norm(double p, std::span<const double> x);

struct SummabilityReport {
    std::vector<double> partial_sums;  // partial sums of d_n^-alpha
    double tail_ratio = 0.0;           // last-term ratio estimate
    bool summable_evidence = false;
};

// Partial sums of d_n^-alpha for n = 1..N with a ratio-test verdict.
SummabilityReport summability_check(const WeightedShiftSystem& sys,
                                    double alpha_exponent, std::size_t N);

struct TransitivityWitness {
    bool found = false;
    std::size_t n = 0;
    std::vector<double> free_block;     // r_1..r_n
    double tail_distance = 0.0;         // achieved ell^p distance to the ball
};

// Constructive witness for L^{-n}(x) intersecting the ball B(center, radius):
// the n-th preimage is (r_1..r_n, x_1/beta_1^n, x_2/beta_2^n, ...); the free
// block is set from the target directly, so feasibility reduces to the tail
// coordinates fitting the radius budget.  Returns the smallest n <= n_max.
TransitivityWitness strong_transitivity_witness(const WeightedShiftSystem& sys,
                                                std::span<const double> x,
                                                std::span<const double> center,
                                                double radius,
                                                std::size_t n_max);

// Nonexpansive IFS on a compact subset of R^d.
class IfsSystem {
public:
    using Map = std::function<void(std::span<const double>, std::span<double>)>;
    using ProbFn =
        std::function<void(std::span<const double>, std::span<double>)>;

    IfsSystem(int dim, std::vector<Map> maps, ProbFn probabilities,
              double contraction_factor);

    // The dyadic interval pair T_1 = x/2, T_2 = x/2 + 1/2 with equal
    // probabilities; attractor [0, 1].
    static std::shared_ptr<const IfsSystem> dyadic_interval();

    int dim() const { return dim_; }
    std::size_t map_count() const { return maps_.size(); }
    void apply_map(std::size_t i, std::span<const double> x,
                   std::span<double> out) const;
    void probabilities(std::span<const double> x, std::span<double> out) const;
    double contraction_factor() const { return contraction_; }
    // Checks sum p_i(x) = 1 within 1e-12 at x, throws otherwise.
    void check_probabilities(std::span<const double> x) const;
    std::size_t sample_branch(std::span<const double> x, RngStream& rng) const;

private:
    int dim_;
    std::vector<Map> maps_;
    ProbFn probs_;
    double contraction_;
};

// sum_i p_i(x) phi(T_i(x)).
double ifs_transfer(const IfsSystem& sys,
                    const std::function<double(std::span<const double>)>& phi,
                    std::span<const double> x);

// n-fold iterate by exhaustive multi-index expansion (m^n capped).
double ifs_transfer_n(const IfsSystem& sys,
                      const std::function<double(std::span<const double>)>& phi,
                      std::span<const double> x, std::size_t n);

struct PointCloud {
    int dim = 1;
    std::vector<double> flat;  // dim reals per point
    std::size_t size() const { return flat.size() / static_cast<std::size_t>(dim); }
    std::span<const double> point(std::size_t i) const {
        return {flat.data() + i * static_cast<std::size_t>(dim),
                static_cast<std::size_t>(dim)};
    }
};

inline constexpr std::size_t kCloudCap = 1u << 16;

// Hutchinson iteration from the seeds; the cloud is subsampled to kCloudCap.
PointCloud attractor_iterate(const IfsSystem& sys, const PointCloud& seeds,
                             std::size_t n, std::uint64_t seed);

// Symmetric Hausdorff distance between clouds (subsampled above `cap`).
double hausdorff_distance(const PointCloud& a, const PointCloud& b,
                          std::size_t cap = 2048);

struct IrreducibilityWitness {
    bool found = false;
    std::vector<std::size_t> multi_index;  // J, outermost first
    double nearest_distance = 0.0;
};

// Breadth-first search over multi-indices |J| <= k_max for T_J(x) inside the
// ball (center, radius); witnesses L^k phi(x) > 0 for phi supported there.
IrreducibilityWitness ifs_irreducibility_witness(const IfsSystem& sys,
                                                 std::span<const double> x,
                                                 std::span<const double> center,
                                                 double radius,
                                                 std::size_t k_max,
                                                 std::size_t expansion_cap =
                                                     1u << 20);

}  // namespace tklab::systems
