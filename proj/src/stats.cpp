#include "tklab/stats.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace tklab::stats {

double normal_cdf(double z) { return 0.5 * std::erfc(-z / std::sqrt(2.0)); }

double ks_vs_normal(std::vector<double> sample) {
    if (sample.empty()) throw std::invalid_argument("ks_vs_normal: empty sample");
    std::sort(sample.begin(), sample.end());
    const double n = static_cast<double>(sample.size());
    double d = 0.0;
    for (std::size_t i = 0; i < sample.size(); ++i) {
        const double f = normal_cdf(sample[i]);
        d = std::max(d, std::abs(f - static_cast<double>(i) / n));
        d = std::max(d, std::abs(static_cast<double>(i + 1) / n - f));
    }
    return d;
}

double ks_two_sample(std::vector<double> a, std::vector<double> b) {
    if (a.empty() || b.empty())
        throw std::invalid_argument("ks_two_sample: empty sample");
    std::sort(a.begin(), a.end());
    std::sort(b.begin(), b.end());
    const double na = static_cast<double>(a.size());
    const double nb = static_cast<double>(b.size());
    std::size_t i = 0, j = 0;
    double d = 0.0;
    while (i < a.size() && j < b.size()) {
        const double v = std::min(a[i], b[j]);
        while (i < a.size() && a[i] <= v) ++i;
        while (j < b.size() && b[j] <= v) ++j;
        d = std::max(d, std::abs(static_cast<double>(i) / na -
                                 static_cast<double>(j) / nb));
    }
    return d;
}

LineFit fit_line(const std::vector<double>& x, const std::vector<double>& y) {
    if (x.size() != y.size() || x.size() < 2)
        throw std::invalid_argument("fit_line: need >= 2 paired points");
    const double n = static_cast<double>(x.size());
    double mx = 0.0, my = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        mx += x[i];
        my += y[i];
    }
    mx /= n;
    my /= n;
    double sxx = 0.0, sxy = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        sxx += (x[i] - mx) * (x[i] - mx);
        sxy += (x[i] - mx) * (y[i] - my);
    }
    if (sxx == 0.0) throw std::invalid_argument("fit_line: degenerate x");
    LineFit fit;
    fit.slope = sxy / sxx;
    fit.intercept = my - fit.slope * mx;
    double ss_res = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double r = y[i] - (fit.intercept + fit.slope * x[i]);
        ss_res += r * r;
    }
    fit.residual_rms = std::sqrt(ss_res / n);
    if (x.size() > 2) fit.slope_se = std::sqrt(ss_res / (n - 2.0) / sxx);
    return fit;
}

BatchMean batch_mean(const std::vector<double>& x, std::size_t n_batches) {
    BatchMean out;
    if (x.empty()) return out;
    n_batches = std::min(n_batches, x.size());
    const std::size_t len = x.size() / n_batches;
    if (len == 0 || n_batches < 2) {
        double s = 0.0;
        for (double v : x) s += v;
        out.mean = s / static_cast<double>(x.size());
        out.batches = 1;
        return out;
    }
    std::vector<double> means(n_batches, 0.0);
    for (std::size_t b = 0; b < n_batches; ++b) {
        double s = 0.0;
        for (std::size_t i = b * len; i < (b + 1) * len; ++i) s += x[i];
        means[b] = s / static_cast<double>(len);
    }
    double m = 0.0;
    for (double v : means) m += v;
    m /= static_cast<double>(n_batches);
    double ss = 0.0;
    for (double v : means) ss += (v - m) * (v - m);
    out.mean = m;
    out.se = std::sqrt(ss / static_cast<double>(n_batches - 1) /
                       static_cast<double>(n_batches));
    out.batches = n_batches;
    return out;
}

double sample_variance(const std::vector<double>& x) {
    if (x.size() < 2) return 0.0;
    double m = 0.0;
    for (double v : x) m += v;
    m /= static_cast<double>(x.size());
    double ss = 0.0;
    for (double v : x) ss += (v - m) * (v - m);
    return ss / static_cast<double>(x.size() - 1);
}

double sample_correlation(const std::vector<double>& x,
                          const std::vector<double>& y) {
    if (x.size() != y.size() || x.size() < 2)
        throw std::invalid_argument("sample_correlation: bad sizes");
    double mx = 0.0, my = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        mx += x[i];
        my += y[i];
    }
    mx /= static_cast<double>(x.size());
    my /= static_cast<double>(x.size());
    double sxx = 0.0, syy = 0.0, sxy = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        sxx += (x[i] - mx) * (x[i] - mx);
        syy += (y[i] - my) * (y[i] - my);
        sxy += (x[i] - mx) * (y[i] - my);
    }
    if (sxx == 0.0 || syy == 0.0) return 0.0;
    return sxy / std::sqrt(sxx * syy);
}

}  // namespace tklab::stats
