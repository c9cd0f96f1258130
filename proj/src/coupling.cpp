#include "tklab/coupling.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

#include "tklab/par.hpp"

namespace tklab::coupling {

CoupledPath sample_coupled(const KernelSpec& full_shift, const Config& x,
                           const Config& y, std::size_t n, RngStream& rng) {
    if (!full_shift.is_full_shift())
        throw std::invalid_argument("sample_coupled: full-shift kernel required");
    if (!x.alphabet->same_as(*y.alphabet) || x.depth() != y.depth())
        throw std::invalid_argument("sample_coupled: mismatched anchors");
    const auto& mu = full_shift.full_shift_kernel().mu;
    CoupledPath path;
    path.x_base = x;
    path.y_base = y;
    path.x_end = x;
    path.y_end = y;
    path.n = n;
    const auto dim = static_cast<std::size_t>(x.alphabet->point_dim());
    std::vector<double> a(dim);
    for (std::size_t i = 0; i < n; ++i) {
        mu.sample(rng, a);
        prepend_in_place(path.x_end, a);
        prepend_in_place(path.y_end, a);
        path.word.insert(path.word.end(), a.begin(), a.end());
    }
    return path;
}

double DecayFunction::operator()(double n, double r) const {
    if (r <= 0.0) return 0.0;
    return B * r / std::pow(n * std::pow(r, alpha) + b, 1.0 / alpha);
}

bool DecayFunction::check_properties(double r_max, std::size_t grid) const {
    if (!(B >= 1.0) || !(b > 0.0 && b < 1.0) || !(alpha > 0.0)) return false;
    const auto& F = *this;
    for (std::size_t i = 1; i <= grid; ++i) {
        const double r = r_max * static_cast<double>(i) / static_cast<double>(grid);
        // (a) nonincreasing in n; (b) -> 0 in n
        double prev = F(1.0, r);
        for (std::size_t k = 2; k <= grid; ++k) {
            const double cur = F(static_cast<double>(k), r);
            if (cur > prev * (1.0 + 1e-12)) return false;
            prev = cur;
        }
        // (c) linear domination F(n, r) <= (B / b^{1/alpha}) r
        const double cmax = B / std::pow(b, 1.0 / alpha);
        for (std::size_t k = 1; k <= grid; ++k)
            if (F(static_cast<double>(k), r) > cmax * r * (1.0 + 1e-12))
                return false;
    }
    for (std::size_t k = 1; k <= 8; ++k) {
        for (std::size_t m = 1; m <= 8; ++m) {
            for (std::size_t i = 1; i <= grid; ++i) {
                const double r =
                    r_max * static_cast<double>(i) / static_cast<double>(grid);
                // (d) composition
                const double lhs = F(static_cast<double>(k + m), r);
                const double rhs =
                    F(static_cast<double>(k), F(static_cast<double>(m), r));
                if (lhs > rhs * (1.0 + 1e-9)) return false;
            }
        }
    }
    // (a) monotone nondecreasing in r
    for (std::size_t k = 1; k <= grid; ++k) {
        double prev = 0.0;
        for (std::size_t i = 1; i <= grid; ++i) {
            const double r =
                r_max * static_cast<double>(i) / static_cast<double>(grid);
            const double cur = F(static_cast<double>(k), r);
            if (cur + 1e-15 < prev) return false;
            prev = cur;
        }
    }
    return true;
}

DecayFit fit_polynomial_decay(
    const std::vector<std::pair<double, double>>& series) {
    std::vector<double> lx, ly;
    DecayFit fit;
    for (const auto& [n, v] : series) {
        if (v <= 0.0 || n <= 0.0) {
            ++fit.dropped;
            continue;
        }
        lx.push_back(std::log(n));
        ly.push_back(std::log(v));
    }
    if (lx.size() < 5)
        throw std::invalid_argument(
            "fit_polynomial_decay: need >= 5 positive points");
    const stats::LineFit lf = stats::fit_line(lx, ly);
    fit.exponent = lf.slope;
    fit.constant = std::exp(lf.intercept);
    fit.residual_rms = lf.residual_rms;
    const auto [mn, mx] = std::minmax_element(lx.begin(), lx.end());
    fit.n_lo = std::exp(*mn);
    fit.n_hi = std::exp(*mx);
    return fit;
}

TransferEstimate weighted_coupling_cost(const KernelSpec& kernel,
                                        const Potential& f,
                                        const ModulusOfContinuity& omega,
                                        const Config& x, const Config& y,
                                        std::size_t n,
                                        const EstimatorOptions& opt) {
    if (!kernel.is_full_shift())
        throw std::invalid_argument("weighted_coupling_cost: full shift only");
    const auto& mu = kernel.full_shift_kernel().mu;
    const double sup_f = f.sup_bound();
    const std::size_t K = std::max<std::size_t>(1, opt.samples);
    std::vector<double> vals(K, 0.0);
    const auto dim = static_cast<std::size_t>(x.alphabet->point_dim());
    par::fill_indexed(K, [&](std::size_t i) {
        RngStream rng = derive_stream(opt.seed, opt.label, i);
        Config cx = x, cy = y;
        std::vector<double> a(dim);
        double logw = 0.0;
        for (std::size_t s = 0; s < n; ++s) {
            mu.sample(rng, a);
            prepend_in_place(cx, a);
            prepend_in_place(cy, a);
            logw += f.eval(cx) - sup_f;
        }
        vals[i] = std::exp(logw) * omega(config_distance(cx, cy));
    });
    double mean, se;
    par::mean_and_se(vals, mean, se);
    const double scale = std::exp(static_cast<double>(n) * sup_f);
    return {mean * scale, se * scale, K, false};
}

std::vector<TransferEstimate> coupling_cost_series(
    const NormalizedSystem& sys, const ModulusOfContinuity& omega,
    const Config& x, const Config& y, const std::vector<std::size_t>& ns,
    const EstimatorOptions& opt) {
    const KernelSpec& kernel = sys.kernel();
    if (!kernel.is_full_shift())
        throw std::invalid_argument("coupling_cost_series: full shift only");
    if (ns.empty()) return {};
    const std::size_t n_max = *std::max_element(ns.begin(), ns.end());
    const std::size_t K = std::max<std::size_t>(2, opt.samples);
    const PathSampler sampler(kernel, sys.base_potential(), opt.sampler,
                              n_max * K);
    const double sup_f = sampler.sup_f();
    const double log_h_x = sys.log_h(x);

    // per-sample cost value at every checkpoint
    std::vector<std::vector<double>> vals(ns.size(),
                                          std::vector<double>(K, 0.0));
    par::fill_indexed(K, [&](std::size_t i) {
        RngStream rng = derive_stream(opt.seed, opt.label, i);
        Config cx = x, cy = y;
        auto ws = sampler.make_workspace(x);
        std::vector<double> a;
        double logw = 0.0;  // shifted log of e^{f^n} along the x path
        std::size_t next = 0;
        for (std::size_t s = 1; s <= n_max && next < ns.size(); ++s) {
            logw += sampler.step(cx, rng, ws, &a);
            prepend_in_place(cy, a);
            if (s == ns[next]) {
                const double fsum = logw + static_cast<double>(s) * sup_f;
                const double fbar_sum =
                    fsum + sys.log_h(cx) - log_h_x -
                    static_cast<double>(s) * sys.log_lambda();
                vals[next][i] =
                    std::exp(fbar_sum) * omega(config_distance(cx, cy));
                ++next;
            }
        }
    });
    std::vector<TransferEstimate> out(ns.size());
    for (std::size_t q = 0; q < ns.size(); ++q) {
        double mean, se;
        par::mean_and_se(vals[q], mean, se);
        out[q] = {mean, se, K, false};
    }
    return out;
}

namespace {

// Assignment by the standard potentials (Hungarian) algorithm on a square
// cost matrix; returns the minimal total cost.
double hungarian_min_cost(const std::vector<double>& cost, std::size_t m) {
    const double inf = std::numeric_limits<double>::infinity();
    std::vector<double> u(m + 1, 0.0), v(m + 1, 0.0);
    std::vector<std::size_t> p(m + 1, 0), way(m + 1, 0);
    for (std::size_t i = 1; i <= m; ++i) {
        p[0] = i;
        std::size_t j0 = 0;
        std::vector<double> minv(m + 1, inf);
        std::vector<char> used(m + 1, 0);
        do {
            used[j0] = 1;
            const std::size_t i0 = p[j0];
            double delta = inf;
            std::size_t j1 = 0;
            for (std::size_t j = 1; j <= m; ++j) {
                if (used[j]) continue;
                const double cur = cost[(i0 - 1) * m + (j - 1)] - u[i0] - v[j];
                if (cur < minv[j]) {
                    minv[j] = cur;
                    way[j] = j0;
                }
                if (minv[j] < delta) {
                    delta = minv[j];
                    j1 = j;
                }
            }
            for (std::size_t j = 0; j <= m; ++j) {
                if (used[j]) {
                    u[p[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
        } while (p[j0] != 0);
        do {
            const std::size_t j1 = way[j0];
            p[j0] = p[j1];
            j0 = j1;
        } while (j0 != 0);
    }
    double total = 0.0;
    for (std::size_t j = 1; j <= m; ++j)
        total += cost[(p[j] - 1) * m + (j - 1)];
    return total;
}

double greedy_match_cost(const std::vector<double>& cost, std::size_t m) {
    std::vector<char> used(m, 0);
    double total = 0.0;
    for (std::size_t i = 0; i < m; ++i) {
        double best = std::numeric_limits<double>::infinity();
        std::size_t pick = 0;
        for (std::size_t j = 0; j < m; ++j) {
            if (!used[j] && cost[i * m + j] < best) {
                best = cost[i * m + j];
                pick = j;
            }
        }
        used[pick] = 1;
        total += best;
    }
    return total;
}

}  // namespace

WassersteinResult wasserstein_estimate(const chains::EmpiricalMeasure& a,
                                       const chains::EmpiricalMeasure& b,
                                       const ModulusOfContinuity& omega) {
    if (a.count() == 0 || b.count() == 0)
        throw std::invalid_argument("wasserstein_estimate: empty measure");
    // equal atom counts: subsample the larger by stride
    const std::size_t m = std::min(a.count(), b.count());
    auto pick = [m](const chains::EmpiricalMeasure& e,
                    std::size_t i) -> const Config& {
        return e.atoms[i * e.count() / m];
    };
    std::vector<double> cost(m * m);
    par::fill_indexed(m, [&](std::size_t i) {
        for (std::size_t j = 0; j < m; ++j)
            cost[i * m + j] = omega(config_distance(pick(a, i), pick(b, j)));
    });
    WassersteinResult res;
    if (m <= kAssignmentThreshold) {
        res.value = hungarian_min_cost(cost, m) / static_cast<double>(m);
        res.exact = true;
    } else {
        res.value = greedy_match_cost(cost, m) / static_cast<double>(m);
        res.exact = false;
    }
    return res;
}

ContractionProbe dual_contraction_probe(const chains::PsiSampler& psi,
                                        const chains::EmpiricalMeasure& seed_a,
                                        const chains::EmpiricalMeasure& seed_b,
                                        const std::vector<std::size_t>& ns,
                                        const ModulusOfContinuity& omega,
                                        std::uint64_t seed) {
    if (seed_a.count() != seed_b.count() || seed_a.count() == 0)
        throw std::invalid_argument(
            "dual_contraction_probe: equal nonempty atom counts required");
    ContractionProbe probe;
    probe.ns = ns;
    const std::size_t m = seed_a.count();
    const std::size_t n_max =
        ns.empty() ? 0 : *std::max_element(ns.begin(), ns.end());

    // independent Psi substream per atom; clouds c (noise twin of a) share
    // the law of a but use fresh randomness
    std::vector<chains::ChainState> sa, sb, sc;
    sa.reserve(m);
    sb.reserve(m);
    sc.reserve(m);
    for (std::size_t i = 0; i < m; ++i) {
        sa.push_back(chains::make_state(seed_a.atoms[i],
                                        derive_seed(seed, "push-a", i), "dc"));
        sb.push_back(chains::make_state(seed_b.atoms[i],
                                        derive_seed(seed, "push-b", i), "dc"));
        sc.push_back(chains::make_state(seed_a.atoms[i],
                                        derive_seed(seed, "push-c", i), "dc"));
    }
    chains::EmpiricalMeasure ca = seed_a, cb = seed_b, cc = seed_a;
    std::size_t step = 0;
    std::vector<std::pair<double, double>> series;
    for (std::size_t q = 0; q < ns.size(); ++q) {
        while (step < ns[q]) {
            par::fill_indexed(m, [&](std::size_t i) {
                psi.step(sa[i]);
                psi.step(sb[i]);
                psi.step(sc[i]);
            });
            ++step;
        }
        for (std::size_t i = 0; i < m; ++i) {
            ca.atoms[i] = sa[i].current;
            cb.atoms[i] = sb[i].current;
            cc.atoms[i] = sc[i].current;
        }
        const double w = wasserstein_estimate(ca, cb, omega).value;
        const double floor = wasserstein_estimate(ca, cc, omega).value;
        probe.w_values.push_back(w);
        probe.noise_floor.push_back(floor);
        if (ns[q] >= 2 && w > floor * 1.5)
            series.emplace_back(static_cast<double>(ns[q]), w);
    }
    const double w0 =
        wasserstein_estimate(seed_a, seed_b, omega).value;
    for (double w : probe.w_values) {
        if (w > std::max(1.05 * w0, w0 + 3.0 * probe.noise_floor.back()))
            probe.bounded = false;
    }
    for (std::size_t q = 1; q < probe.w_values.size(); ++q) {
        // trend check against the noise floor
        if (probe.w_values[q] >
            probe.w_values[q - 1] + 2.0 * probe.noise_floor[q])
            probe.decreasing = false;
    }
    if (series.size() >= 5) probe.fit = fit_polynomial_decay(series);
    return probe;
}

}  // namespace tklab::coupling
