// Exact finite-alphabet, finite-range ground truth: dense transfer matrices
// on cylinder words, Perron data, normalization, Poisson solves, variance and
// correlation series.  Every Monte Carlo estimator is cross-checked against
// this module.
#pragma once

#include <cstddef>
#include <vector>

#include "tklab/potential.hpp"
#include "tklab/space.hpp"

namespace tklab::oracle {

inline constexpr std::size_t kStateCap = 4096;

// States are words w in E^k, index = sum_i index(w_i) s^i (w_1 fastest).
struct CylinderSpace {
    AlphabetPtr alphabet;
    std::size_t range = 1;
    std::vector<double> weights;  // a priori weights, size s

    std::size_t state_count() const;
    // coordinates of state `idx` as alphabet values, w_1 first
    std::vector<double> word(std::size_t idx) const;
    std::size_t prepend_state(std::size_t idx, std::size_t symbol) const;
    // Config of depth >= range whose leading word is state idx; the tail is
    // filled by cycling the word.
    Config state_config(std::size_t idx, std::size_t depth) const;
    std::size_t config_state(const Config& x) const;
};

CylinderSpace make_cylinder_space(const AprioriMeasure& mu, std::size_t range);

// Dense nonnegative matrix with M[w -> w'] = mu(a) e^{f(a w)} for the
// prepend transitions w' = (a, w_1..w_{k-1}); exactly s nonzero entries per
// row.  L phi on cylinder functions is the matrix-vector product.
struct TransferMatrix {
    std::size_t n = 0;
    std::vector<double> data;  // row-major, data[i*n + j]

    double& at(std::size_t i, std::size_t j) { return data[i * n + j]; }
    double at(std::size_t i, std::size_t j) const { return data[i * n + j]; }
    std::vector<double> apply(const std::vector<double>& v) const;
    std::vector<double> apply_transposed(const std::vector<double>& v) const;
};

TransferMatrix build_matrix(const CylinderSpace& space,
                            const FiniteRangePotential& f);

struct PerronData {
    double lambda = 0.0;
    std::vector<double> h;   // right eigenvector, positive
    std::vector<double> nu;  // left eigenvector, sums to 1, nu . h = 1
    double lambda2_modulus = 0.0;  // second eigenvalue modulus (deflated)
};

// Power iteration to 1e-12 relative tolerance; requires a primitive matrix
// (some small power strictly positive).
PerronData perron(const TransferMatrix& m);

// P[w -> w'] = M[w -> w'] h(w') / (lambda h(w)); rows sum to 1.
TransferMatrix exact_normalize(const TransferMatrix& m, const PerronData& pd);

// Stationary law of the normalized chain: h .* nu, normalized.
std::vector<double> stationary_from_perron(const PerronData& pd);

// Solves (I - P) upsilon = phi with nu_stationary . phi = 0; the returned
// upsilon satisfies nu . upsilon = 0 and the residual is <= 1e-8.
std::vector<double> exact_poisson(const TransferMatrix& p,
                                  const std::vector<double>& phi,
                                  const std::vector<double>& nu_stationary);

// sigma^2 = pi(ups^2) - pi((P ups)^2) for centered phi.
double exact_sigma2(const TransferMatrix& p, const std::vector<double>& phi,
                    const std::vector<double>& pi);

// Series nu(phi . P^n phi), n = 0..n_max, for centered phi.
std::vector<double> exact_correlations(const TransferMatrix& p,
                                       const std::vector<double>& phi,
                                       const std::vector<double>& pi,
                                       std::size_t n_max);

}  // namespace tklab::oracle
