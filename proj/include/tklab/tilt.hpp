// Exponentially tilted sampling on spheres.
//
// For potentials whose one-step weight is e^{<a, v>} in the prepended point
// a, transfer iterates can be estimated by drawing a from the von
// Mises-Fisher density e^{<a,v>}/Z(|v|) and accumulating the deterministic
// per-step normalizer Z.  The estimator stays unbiased and its variance
// comes only from the path dependence of |v|, which removes the e^{Var(f^n)}
// blowup of plain word sampling.
#pragma once

#include <span>
#include <vector>

#include "tklab/rng.hpp"

namespace tklab {

// log integral over S^{N-1} (uniform surface measure) of e^{kappa <a, e>}:
// log[ Gamma(N/2) (2/kappa)^{N/2-1} I_{N/2-1}(kappa) ].
double log_sphere_tilt_normalizer(double kappa, int ambient_dim);

// Mean resultant length A_N(kappa) = I_{N/2}(kappa) / I_{N/2-1}(kappa);
// equals E[<a, e>] under the tilted density.  Used by tests.
double sphere_tilt_mean_cosine(double kappa, int ambient_dim);

// Draws a ~ vMF(direction mu_dir, concentration kappa) on S^{N-1}.
// mu_dir need not be normalized unless kappa == 0 (then uniform).
void sample_sphere_tilted(std::span<const double> direction, double kappa,
                          RngStream& rng, std::span<double> out);

// Table of log normalizers against kappa for a fixed ambient dimension,
// linearly interpolated; falls back to the exact evaluation out of range.
class TiltNormalizerTable {
public:
    TiltNormalizerTable(int ambient_dim, double kappa_max,
                        std::size_t points = 4096);
    double log_z(double kappa) const;
    int ambient_dim() const { return dim_; }

private:
    int dim_;
    double kappa_max_;
    double step_;
    std::vector<double> table_;
};

}  // namespace tklab
