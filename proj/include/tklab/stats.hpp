// Shared statistics helpers: KS statistics, least squares, batch means.
#pragma once

#include <cmath>
#include <cstddef>
#include <vector>

namespace tklab::stats {

double normal_cdf(double z);

// One-sample Kolmogorov-Smirnov statistic against the standard normal.
double ks_vs_normal(std::vector<double> sample);

// Two-sample KS statistic.
double ks_two_sample(std::vector<double> a, std::vector<double> b);

struct LineFit {
    double slope = 0.0;
    double intercept = 0.0;
    double slope_se = 0.0;
    double residual_rms = 0.0;
};

// Ordinary least squares of y against x.
LineFit fit_line(const std::vector<double>& x, const std::vector<double>& y);

// Mean of a correlated sequence with a batch-means standard error.
struct BatchMean {
    double mean = 0.0;
    double se = 0.0;
    std::size_t batches = 0;
};
BatchMean batch_mean(const std::vector<double>& x, std::size_t n_batches = 32);

double sample_variance(const std::vector<double>& x);
double sample_correlation(const std::vector<double>& x,
                          const std::vector<double>& y);

// Asymptotic one-sample KS acceptance threshold at alpha ~ 0.01.
inline double ks_threshold(std::size_t n) {
    return 1.63 / std::sqrt(static_cast<double>(n));
}

// Two-sample threshold for equal sizes n, alpha ~ 0.01.
inline double ks_two_sample_threshold(std::size_t n) {
    return 1.63 * std::sqrt(2.0 / static_cast<double>(n));
}

}  // namespace tklab::stats
