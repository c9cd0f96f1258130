#include "tklab/limits.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>

#include "tklab/par.hpp"

namespace tklab::limits {

CenteredObservable center_observable(const chains::PsiSampler& psi,
                                     const Observable& phi, std::size_t n_est,
                                     const Config& start, std::uint64_t seed) {
    chains::ChainState st = chains::make_state(start, seed, "center");
    double acc = 0.0;
    for (std::size_t i = 0; i < n_est; ++i) {
        psi.step(st);
        acc += phi(st.current);
    }
    CenteredObservable out;
    out.mean_estimate = acc / static_cast<double>(n_est);
    out.error_bound =
        4.0 * phi.sup_norm / std::sqrt(static_cast<double>(n_est));
    out.phi = shifted(phi, out.mean_estimate);
    return out;
}

std::array<double, 2> PoissonSolution::chain_halves(const Config& x,
                                                    std::size_t upto,
                                                    std::size_t from) const {
    // mean over chains of sum_{n=from..upto} phi(Psi_n^x), split into halves
    std::array<double, 2> halves{0.0, 0.0};
    const std::size_t half = chains_ / 2;
    for (std::size_t c = 0; c < chains_; ++c) {
        chains::ChainState st =
            chains::make_state(x, derive_seed(seed_, "poisson-crn", c), "ups");
        double s = from == 0 ? phi_(st.current) : 0.0;
        for (std::size_t n = 1; n <= upto; ++n) {
            psi_->step(st);
            if (n >= from) s += phi_(st.current);
        }
        halves[c < half ? 0 : 1] += s;
    }
    halves[0] /= static_cast<double>(half);
    halves[1] /= static_cast<double>(chains_ - half);
    return halves;
}

double PoissonSolution::exact_level_sum(const Config& x, std::size_t from,
                                        std::size_t upto) const {
    // exact expectation over the sampler's cached transition rows: enumerate
    // all chain paths of length `upto`
    const KernelSpec& k = psi_->system().kernel();
    const std::size_t s = k.branch_count();
    double total = from == 0 ? phi_(x) : 0.0;
    struct Frame {
        Config cfg;
        double prob;
        std::size_t level;
    };
    std::vector<Frame> stack;
    stack.push_back({x, 1.0, 0});
    while (!stack.empty()) {
        Frame fr = std::move(stack.back());
        stack.pop_back();
        if (fr.level == upto) continue;
        for (std::size_t a = 0; a < s; ++a) {
            Frame next;
            next.cfg = fr.cfg;
            const double p = psi_->row_probability(fr.cfg, a);
            k.apply_branch(next.cfg, a);
            next.prob = fr.prob * p;
            next.level = fr.level + 1;
            if (next.level >= from) total += next.prob * phi_(next.cfg);
            if (p > 0.0) stack.push_back(std::move(next));
        }
    }
    return total;
}

PoissonSolution::Pair PoissonSolution::eval_pair(const Config& x) const {
    if (exact_) {
        const double v = exact_level_sum(x, 0, N_);
        return {v, v};
    }
    const auto h = chain_halves(x, N_, 0);
    return {h[0], h[1]};
}

PoissonSolution::Pair PoissonSolution::eval_P_pair(const Config& x) const {
    if (exact_) {
        const double v = exact_level_sum(x, 1, N_ + 1);
        return {v, v};
    }
    const auto h = chain_halves(x, N_ + 1, 1);
    return {h[0], h[1]};
}

double PoissonSolution::tail_term(const Config& x) const {
    if (exact_) return exact_level_sum(x, N_ + 1, N_ + 1);
    const auto h = chain_halves(x, N_ + 1, N_ + 1);
    return 0.5 * (h[0] + h[1]);
}

PoissonSolution solve_poisson(
    const chains::PsiSampler& psi, const Observable& phi_centered,
    std::size_t N, std::size_t chains_per_eval, std::uint64_t seed,
    const std::optional<coupling::DecayFit>& correlation_fit) {
    PoissonSolution sol;
    sol.psi_ = &psi;
    sol.phi_ = phi_centered;
    sol.N_ = N;
    sol.chains_ = std::max<std::size_t>(2, chains_per_eval);
    sol.seed_ = seed;
    if (correlation_fit) {
        if (correlation_fit->exponent >= -1.0)
            throw std::invalid_argument(
                "solve_poisson: fitted correlation exponent >= -1, the "
                "Neumann series is not summable");
        // sum_{n > N} C n^e <= C N^{e+1} / |e+1|
        const double e = correlation_fit->exponent;
        sol.residual_bound_ = correlation_fit->constant *
                              std::pow(static_cast<double>(N), e + 1.0) /
                              (-e - 1.0);
    }
    const KernelSpec& k = psi.system().kernel();
    if (k.finite_alphabet() && psi.has_finite_rows()) {
        double leaves = 1.0;
        bool ok = true;
        for (std::size_t i = 0; i <= N; ++i) {
            leaves *= static_cast<double>(k.branch_count());
            if (leaves > static_cast<double>(1u << 20)) {
                ok = false;
                break;
            }
        }
        sol.exact_ = ok;
    }
    return sol;
}

VarianceEstimate variance(const chains::PsiSampler& psi,
                          const PoissonSolution& ups, const Observable& phi,
                          std::size_t n_est, std::size_t thin,
                          std::size_t gk_steps, const Config& start,
                          std::uint64_t seed) {
    // collect thinned stationary states
    chains::ChainState st = chains::make_state(start, seed, "variance");
    std::vector<Config> states;
    states.reserve(n_est);
    for (std::size_t i = 0; i < n_est; ++i) {
        for (std::size_t t = 0; t < std::max<std::size_t>(1, thin); ++t)
            psi.step(st);
        states.push_back(st.current);
    }
    // products of independent halves keep mu(ups^2) unbiased
    std::vector<double> u2(n_est), pu2(n_est), pu_mean(n_est);
    par::fill_indexed(n_est, [&](std::size_t i) {
        const auto u = ups.eval_pair(states[i]);
        const auto pu = ups.eval_P_pair(states[i]);
        u2[i] = u.a * u.b;
        pu2[i] = pu.a * pu.b;
        pu_mean[i] = 0.5 * (pu.a + pu.b);
    });
    const auto bm_u2 = stats::batch_mean(u2);
    const auto bm_pu2 = stats::batch_mean(pu2);
    const auto bm_pu = stats::batch_mean(pu_mean);

    VarianceEstimate est;
    est.sigma2 = bm_u2.mean - bm_pu2.mean;
    est.sigma2_se = std::sqrt(bm_u2.se * bm_u2.se + bm_pu2.se * bm_pu2.se);
    est.sigma2_alt = bm_u2.mean - bm_pu.mean * bm_pu.mean;

    // Green-Kubo: mu(phi^2) + 2 sum_{n=1..N} gamma(n) from chain segments
    const std::size_t n_max = ups.truncation() + 1;
    const std::size_t segments = 8;
    std::vector<double> seg_gk(segments, 0.0);
    par::fill_indexed(segments, [&](std::size_t g) {
        chains::ChainState cs = chains::make_state(
            start, derive_seed(seed, "gk-seg", g), "gk");
        const std::size_t len = gk_steps / segments;
        std::vector<double> vals(len);
        for (std::size_t i = 0; i < len; ++i) {
            psi.step(cs);
            vals[i] = phi(cs.current);
        }
        double mean = 0.0;
        for (double v : vals) mean += v;
        mean /= static_cast<double>(len);
        double gk = 0.0;
        for (std::size_t lag = 0; lag <= n_max; ++lag) {
            double c = 0.0;
            for (std::size_t i = 0; i + lag < len; ++i)
                c += (vals[i] - mean) * (vals[i + lag] - mean);
            c /= static_cast<double>(len - lag);
            gk += lag == 0 ? c : 2.0 * c;
        }
        seg_gk[g] = gk;
    });
    double gk_mean = 0.0;
    for (double v : seg_gk) gk_mean += v;
    gk_mean /= static_cast<double>(segments);
    double gk_ss = 0.0;
    for (double v : seg_gk) gk_ss += (v - gk_mean) * (v - gk_mean);
    est.sigma2_gk = gk_mean;
    est.sigma2_gk_se = std::sqrt(gk_ss / static_cast<double>(segments - 1) /
                                 static_cast<double>(segments));

    est.rejected = est.sigma2 <= 0.0;
    const double band =
        3.0 * std::sqrt(est.sigma2_se * est.sigma2_se +
                        est.sigma2_gk_se * est.sigma2_gk_se) +
        2.0 * ups.residual_bound() * phi.sup_norm;
    est.routes_agree = std::abs(est.sigma2 - est.sigma2_gk) <= band;
    return est;
}

CorrelationSeries chain_correlations(const chains::PsiSampler& psi,
                                     const Observable& phi, std::size_t n_max,
                                     std::size_t steps, std::size_t n_chains,
                                     std::size_t burn, const Config& start,
                                     std::uint64_t seed) {
    std::vector<std::vector<double>> gam(n_chains);
    std::vector<double> means(n_chains, 0.0);
    par::fill_indexed(n_chains, [&](std::size_t c) {
        chains::ChainState st = chains::make_state(
            start, derive_seed(seed, "corr-chain", c), "corr");
        chains::burn_in(psi, st, burn);
        std::vector<double> vals(steps);
        for (std::size_t i = 0; i < steps; ++i) {
            psi.step(st);
            vals[i] = phi(st.current);
        }
        double mean = 0.0;
        for (double v : vals) mean += v;
        mean /= static_cast<double>(steps);
        means[c] = mean;
        gam[c].assign(n_max + 1, 0.0);
        for (std::size_t lag = 0; lag <= n_max; ++lag) {
            double s = 0.0;
            for (std::size_t i = 0; i + lag < steps; ++i)
                s += (vals[i] - mean) * (vals[i + lag] - mean);
            gam[c][lag] = s / static_cast<double>(steps - lag);
        }
    });
    CorrelationSeries cs;
    cs.gamma.assign(n_max + 1, 0.0);
    cs.se.assign(n_max + 1, 0.0);
    for (std::size_t lag = 0; lag <= n_max; ++lag) {
        double m = 0.0;
        for (std::size_t c = 0; c < n_chains; ++c) m += gam[c][lag];
        m /= static_cast<double>(n_chains);
        double ss = 0.0;
        for (std::size_t c = 0; c < n_chains; ++c)
            ss += (gam[c][lag] - m) * (gam[c][lag] - m);
        cs.gamma[lag] = m;
        cs.se[lag] = n_chains > 1
                         ? std::sqrt(ss / static_cast<double>(n_chains - 1) /
                                     static_cast<double>(n_chains))
                         : 0.0;
    }
    double mm = 0.0;
    for (double v : means) mm += v;
    cs.mean = mm / static_cast<double>(n_chains);
    return cs;
}

PathMatrix simulate_fclt_paths(const chains::PsiSampler& psi,
                               const Observable& phi_centered, double sigma,
                               std::size_t n, std::size_t R,
                               const std::vector<double>& t_grid,
                               std::size_t burn, std::size_t depth,
                               std::uint64_t seed) {
    if (sigma <= 0.0)
        throw std::invalid_argument("simulate_fclt_paths: sigma > 0 required");
    PathMatrix pm;
    pm.t_grid = t_grid;
    pm.replicates = R;
    pm.values.assign(R * t_grid.size(), 0.0);
    const auto& mu_opt = psi.system().kernel();
    std::vector<double> totals(R, 0.0);
    std::vector<std::vector<double>> partials(R);
    par::fill_indexed(R, [&](std::size_t r) {
        RngStream srng = derive_stream(seed, "fclt-start", r);
        Config start;
        if (mu_opt.is_full_shift()) {
            start = sample_config(mu_opt.full_shift_kernel().mu, depth, srng);
        } else {
            throw std::invalid_argument(
                "simulate_fclt_paths: full-shift systems only");
        }
        chains::ChainState st =
            chains::make_state(start, derive_seed(seed, "fclt", r), "fclt");
        chains::burn_in(psi, st, burn);
        partials[r].assign(t_grid.size(), 0.0);
        double s = 0.0;
        std::size_t next = 0;
        for (std::size_t j = 1; j <= n; ++j) {
            psi.step(st);
            s += phi_centered(st.current);
            while (next < t_grid.size() &&
                   j == static_cast<std::size_t>(
                            t_grid[next] * static_cast<double>(n))) {
                partials[r][next] = s;
                ++next;
            }
        }
        totals[r] = s;
    });
    // pooled residual drift removal
    double grand = 0.0;
    for (double t : totals) grand += t;
    const double drift_per_step =
        grand / (static_cast<double>(R) * static_cast<double>(n));
    const double scale = 1.0 / (sigma * std::sqrt(static_cast<double>(n)));
    for (std::size_t r = 0; r < R; ++r) {
        for (std::size_t t = 0; t < t_grid.size(); ++t) {
            const double steps_t = t_grid[t] * static_cast<double>(n);
            pm.values[r * t_grid.size() + t] =
                (partials[r][t] - drift_per_step * steps_t) * scale;
        }
    }
    return pm;
}

PathMatrix synthetic_brownian(std::size_t R, const std::vector<double>& t_grid,
                              std::uint64_t seed) {
    PathMatrix pm;
    pm.t_grid = t_grid;
    pm.replicates = R;
    pm.values.assign(R * t_grid.size(), 0.0);
    par::fill_indexed(R, [&](std::size_t r) {
        RngStream rng = derive_stream(seed, "brownian", r);
        double prev_t = 0.0, w = 0.0;
        for (std::size_t t = 0; t < t_grid.size(); ++t) {
            w += std::sqrt(t_grid[t] - prev_t) * rng.normal();
            prev_t = t_grid[t];
            pm.values[r * t_grid.size() + t] = w;
        }
    });
    return pm;
}

PathMatrix synthetic_constant(std::size_t R,
                              const std::vector<double>& t_grid) {
    PathMatrix pm;
    pm.t_grid = t_grid;
    pm.replicates = R;
    pm.values.assign(R * t_grid.size(), 1.0);
    return pm;
}

namespace {

// Chambers-Mallows-Stuck symmetric alpha-stable variate.
double sample_stable(double alpha, RngStream& rng) {
    const double v =
        std::numbers::pi * (rng.uniform() - 0.5);  // U(-pi/2, pi/2)
    const double w = rng.exponential();
    const double t = std::sin(alpha * v) /
                     std::pow(std::cos(v), 1.0 / alpha);
    const double s =
        std::pow(std::cos(v - alpha * v) / w, (1.0 - alpha) / alpha);
    return t * s;
}

}  // namespace

PathMatrix synthetic_stable(std::size_t R, std::size_t n, double alpha,
                            const std::vector<double>& t_grid,
                            std::uint64_t seed) {
    PathMatrix pm;
    pm.t_grid = t_grid;
    pm.replicates = R;
    pm.values.assign(R * t_grid.size(), 0.0);
    std::vector<std::vector<double>> raw(R);
    std::vector<double> var(R, 0.0);
    par::fill_indexed(R, [&](std::size_t r) {
        RngStream rng = derive_stream(seed, "stable", r);
        raw[r].assign(t_grid.size(), 0.0);
        double s = 0.0, ss = 0.0;
        std::size_t next = 0;
        for (std::size_t j = 1; j <= n; ++j) {
            const double x = sample_stable(alpha, rng);
            s += x;
            ss += x * x;
            while (next < t_grid.size() &&
                   j == static_cast<std::size_t>(
                            t_grid[next] * static_cast<double>(n))) {
                raw[r][next] = s;
                ++next;
            }
        }
        var[r] = ss / static_cast<double>(n);
    });
    // normalize with the pooled empirical increment deviation, mimicking how
    // a practitioner would studentize; heavy tails survive the scaling
    double pooled = 0.0;
    for (double v : var) pooled += v;
    pooled = std::sqrt(pooled / static_cast<double>(R));
    const double scale = 1.0 / (pooled * std::sqrt(static_cast<double>(n)));
    for (std::size_t r = 0; r < R; ++r)
        for (std::size_t t = 0; t < t_grid.size(); ++t)
            pm.values[r * t_grid.size() + t] = raw[r][t] * scale;
    return pm;
}

FcltReport fclt_test(const PathMatrix& paths, std::size_t R) {
    if (R < 200) throw std::invalid_argument("fclt_test: R >= 200 required");
    if (paths.replicates != R)
        throw std::invalid_argument("fclt_test: replicate mismatch");
    auto index_of = [&](double t) {
        for (std::size_t i = 0; i < paths.t_grid.size(); ++i)
            if (std::abs(paths.t_grid[i] - t) < 1e-12) return i;
        throw std::invalid_argument("fclt_test: grid must contain t");
    };
    const std::size_t i25 = index_of(0.25), i50 = index_of(0.5),
                      i75 = index_of(0.75), i100 = index_of(1.0);

    FcltReport rep;
    rep.replicates = R;
    rep.ks_threshold = stats::ks_threshold(R);
    for (double t : {0.25, 0.5, 1.0}) {
        const std::size_t it = index_of(t);
        std::vector<double> z(R);
        for (std::size_t r = 0; r < R; ++r)
            z[r] = paths.at(r, it) / std::sqrt(t);
        rep.t_checked.push_back(t);
        rep.ks.push_back(stats::ks_vs_normal(std::move(z)));
    }
    std::vector<double> y50(R), y100(R), inc_a(R), inc_b(R);
    for (std::size_t r = 0; r < R; ++r) {
        y50[r] = paths.at(r, i50);
        y100[r] = paths.at(r, i100);
        inc_a[r] = paths.at(r, i50) - paths.at(r, i25);
        inc_b[r] = paths.at(r, i100) - paths.at(r, i75);
    }
    const double v50 = stats::sample_variance(y50);
    const double v100 = stats::sample_variance(y100);
    rep.variance_linearity =
        v100 > 0.0 ? std::abs(v50 / (0.5 * v100) - 1.0)
                   : std::numeric_limits<double>::infinity();
    rep.increment_correlation = stats::sample_correlation(inc_a, inc_b);
    rep.increment_threshold = 6.0 / std::sqrt(static_cast<double>(R));

    bool ok = rep.variance_linearity <= 0.15 &&
              std::abs(rep.increment_correlation) <= rep.increment_threshold;
    for (double k : rep.ks) ok = ok && k <= rep.ks_threshold;
    rep.accept = ok;
    return rep;
}

}  // namespace tklab::limits
