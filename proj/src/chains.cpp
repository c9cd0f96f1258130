#include "tklab/chains.hpp"

#include <cmath>
#include <stdexcept>

#include "tklab/par.hpp"

namespace tklab::chains {

ChainState make_state(Config start, std::uint64_t seed,
                      std::string_view label) {
    ChainState st;
    st.current = std::move(start);
    st.rng = derive_stream(seed, label);
    return st;
}

void step_phi(const KernelSpec& kernel, ChainState& state) {
    kernel.step_backward(state.current, state.rng);
    ++state.step;
}

PsiSampler::PsiSampler(std::shared_ptr<const NormalizedSystem> sys,
                       bool allow_unaccepted)
    : sys_(std::move(sys)) {
    if (!sys_) throw std::invalid_argument("PsiSampler: null system");
    if (!sys_->accepted() && !allow_unaccepted)
        throw std::invalid_argument(
            "PsiSampler: normalization diagnostics exceed tolerance (pass "
            "allow_unaccepted to proceed anyway)");
    const KernelSpec& k = sys_->kernel();
    const Potential& f = *sys_->base_potential();

    if (k.finite_alphabet()) {
        // One transition row per cylinder word of the potential-relevant
        // length; the rows are the same normalized densities the rejection
        // sampler targets.
        const auto& mu = k.full_shift_kernel().mu;
        symbols_ = mu.alphabet()->finite_size();
        std::size_t k_dep = 1;
        if (const auto* fr = dynamic_cast<const FiniteRangePotential*>(&f))
            k_dep = fr->range();
        state_len_ = k_dep > 1 ? k_dep - 1 : 0;
        std::size_t states = 1;
        for (std::size_t i = 0; i < state_len_; ++i) states *= symbols_;
        row_cdf_.assign(states * symbols_, 0.0);
        const std::size_t probe_depth =
            std::max<std::size_t>(k_dep + 2, state_len_ + 2);
        for (std::size_t s = 0; s < states; ++s) {
            // representative config with the state word in front, padded by
            // the first alphabet value (deeper coordinates cannot matter)
            Config x;
            x.alphabet = mu.alphabet();
            x.coords.assign(probe_depth, mu.alphabet()->finite_values()[0]);
            std::size_t idx = s;
            for (std::size_t i = 0; i < state_len_; ++i) {
                x.coords[i] = mu.alphabet()->finite_values()[idx % symbols_];
                idx /= symbols_;
            }
            double acc = 0.0;
            for (std::size_t a = 0; a < symbols_; ++a) {
                Config ax = x;
                k.apply_branch(ax, a);
                acc += mu.weights()[a] * std::exp(sys_->fbar(ax));
                row_cdf_[s * symbols_ + a] = acc;
            }
            for (std::size_t a = 0; a < symbols_; ++a)
                row_cdf_[s * symbols_ + a] /= acc;
        }
        return;
    }

    if (tilted_sampler_available(k, f)) {
        tilted_proposal_ = true;
        dyson_ = dynamic_cast<const DysonSpherePotential*>(&f);
        tilt_table_ = std::make_shared<const TiltNormalizerTable>(
            dyson_->ambient_dim(), f.sup_bound() * 1.01);
        // envelope for h along proposals, from the observed range with margin
        h_envelope_ = sys_->diagnostics().h_max * 1.2;
    }
}

std::size_t PsiSampler::finite_state_index(const Config& x) const {
    const auto& alph = *x.alphabet;
    std::size_t idx = 0, mult = 1;
    for (std::size_t i = 0; i < state_len_; ++i) {
        idx += alph.finite_index(x.point(i)[0]) * mult;
        mult *= symbols_;
    }
    return idx;
}

void PsiSampler::step(ChainState& state) const {
    const KernelSpec& k = sys_->kernel();
    if (!row_cdf_.empty()) {
        const std::size_t s = finite_state_index(state.current);
        const double u = state.rng.uniform();
        std::size_t pick = symbols_ - 1;
        for (std::size_t a = 0; a < symbols_; ++a) {
            if (u < row_cdf_[s * symbols_ + a]) {
                pick = a;
                break;
            }
        }
        k.apply_branch(state.current, pick);
        ++state.step;
        ++state.proposals;
        return;
    }

    const Potential& f = *sys_->base_potential();

    if (tilted_proposal_) {
        // propose a ~ vMF(field(x)); the e^{f} factor and the constant-in-a
        // denominator h(sigma(a x)) are absorbed by the proposal, so
        // acceptance reduces to h(a x) against its envelope
        const auto pdim =
            static_cast<std::size_t>(state.current.alphabet->point_dim());
        std::vector<double> field(pdim);
        dyson_->interaction_field(state.current, field);
        double k2 = 0.0;
        for (double v : field) k2 += v * v;
        const double kappa = std::sqrt(k2);
        std::vector<double> a(pdim);
        for (std::size_t trial = 0; trial < kProposalCap; ++trial) {
            sample_sphere_tilted(field, kappa, state.rng, a);
            Config ax = state.current;
            prepend_in_place(ax, a);
            const double h_ax = sys_->h(ax);
            double p = h_ax / h_envelope_;
            ++state.proposals;
            if (p > 1.0) {
                p = 1.0;
                ++state.envelope_clamps;
            }
            if (state.rng.uniform() < p) {
                state.current = std::move(ax);
                ++state.step;
                return;
            }
        }
        throw std::runtime_error(
            "PsiSampler: rejection loop exceeded 1e6 proposals; the declared "
            "eigenfunction envelope looks wrong");
    }

    // generic rejection from the a priori proposal with envelope
    // e^{sup fbar - inf fbar}
    const double log_h_down =
        sys_->log_h(k.backward_then_forward(state.current));
    const double sup_fbar = sys_->sup_fbar();
    for (std::size_t trial = 0; trial < kProposalCap; ++trial) {
        Config ax = state.current;
        k.step_backward(ax, state.rng);
        const double fb = f.eval(ax) + sys_->log_h(ax) - log_h_down -
                          sys_->log_lambda();
        double p = std::exp(fb - sup_fbar);
        ++state.proposals;
        if (p > 1.0) {
            p = 1.0;
            ++state.envelope_clamps;
        }
        if (state.rng.uniform() < p) {
            state.current = std::move(ax);
            ++state.step;
            return;
        }
    }
    throw std::runtime_error(
        "PsiSampler: rejection loop exceeded 1e6 proposals; the declared sup "
        "fbar bound looks wrong");
}

double PsiSampler::acceptance_lower_bound() const {
    return std::exp(-(sys_->sup_fbar() - sys_->inf_fbar()));
}

double PsiSampler::row_probability(const Config& x, std::size_t symbol) const {
    if (row_cdf_.empty())
        throw std::logic_error("row_probability: no finite transition rows");
    const std::size_t s = finite_state_index(x);
    const double hi = row_cdf_[s * symbols_ + symbol];
    const double lo = symbol == 0 ? 0.0 : row_cdf_[s * symbols_ + symbol - 1];
    return hi - lo;
}

void burn_in(const PsiSampler& psi, ChainState& state, std::size_t steps) {
    for (std::size_t i = 0; i < steps; ++i) psi.step(state);
}

double BreimanResult::tolerance(std::size_t m) const {
    return 4.0 * sup_norm / std::sqrt(static_cast<double>(m));
}

namespace {

// P phi for the raw walk: transfer with f = 0.
double feller_apply_phi(const KernelSpec& kernel, const Observable& phi,
                        const Config& x, std::size_t p_samples,
                        std::uint64_t seed, std::uint64_t index) {
    static const ConstantPotential zero(0.0);
    EstimatorOptions opt;
    opt.samples = p_samples;
    opt.seed = derive_seed(seed, "pphi", index);
    opt.label = "pphi";
    return apply_transfer(kernel, zero, phi, x, opt).value;
}

// P phi for the normalized chain: L_fbar phi.
double feller_apply_psi(const NormalizedSystem& sys, const Observable& phi,
                        const Config& x, std::size_t p_samples,
                        std::uint64_t seed, std::uint64_t index) {
    const KernelSpec& k = sys.kernel();
    const Potential& f = *sys.base_potential();
    const Config x_down = k.backward_then_forward(x);
    const double log_denom = sys.log_h(x_down) + sys.log_lambda();
    if (k.finite_alphabet()) {
        const auto& mu = k.full_shift_kernel().mu;
        double acc = 0.0;
        for (std::size_t a = 0; a < mu.weights().size(); ++a) {
            Config ax = x;
            k.apply_branch(ax, a);
            acc += mu.weights()[a] *
                   std::exp(f.eval(ax) + sys.log_h(ax) - log_denom) * phi(ax);
        }
        return acc;
    }
    RngStream rng = derive_stream(seed, "pphi-psi", index);
    double acc = 0.0;
    for (std::size_t i = 0; i < p_samples; ++i) {
        Config ax = x;
        k.step_backward(ax, rng);
        acc += std::exp(f.eval(ax) + sys.log_h(ax) - log_denom) * phi(ax);
    }
    return acc / static_cast<double>(p_samples);
}

template <typename PPhi, typename Step>
BreimanResult breiman_impl(const Observable& phi, std::size_t n,
                           const Config& start, std::uint64_t seed,
                           PPhi&& p_phi, Step&& step) {
    if (n == 0) throw std::invalid_argument("breiman_average: n >= 1");
    BreimanResult res;
    res.sup_norm = phi.sup_norm;
    res.partial_averages.resize(n);
    ChainState st = make_state(start, seed, "breiman");
    double acc = 0.0;
    for (std::size_t m = 0; m < n; ++m) {
        acc += p_phi(st.current, m) - phi(st.current);
        res.partial_averages[m] = acc / static_cast<double>(m + 1);
        step(st);
    }
    return res;
}

}  // namespace

BreimanResult breiman_average(const KernelSpec& kernel, const Observable& phi,
                              std::size_t n, std::size_t p_samples,
                              const Config& start, std::uint64_t seed) {
    return breiman_impl(
        phi, n, start, seed,
        [&](const Config& x, std::size_t m) {
            return feller_apply_phi(kernel, phi, x, p_samples, seed, m);
        },
        [&](ChainState& st) { step_phi(kernel, st); });
}

BreimanResult breiman_average(const PsiSampler& psi, const Observable& phi,
                              std::size_t n, std::size_t p_samples,
                              const Config& start, std::uint64_t seed) {
    return breiman_impl(
        phi, n, start, seed,
        [&](const Config& x, std::size_t m) {
            return feller_apply_psi(psi.system(), phi, x, p_samples, seed, m);
        },
        [&](ChainState& st) { psi.step(st); });
}

TwoSampleReport birkhoff_vs_chain_check(const PsiSampler& psi,
                                        const Observable& phi, std::size_t n,
                                        std::size_t replicates,
                                        std::size_t burn_in_steps,
                                        std::size_t depth, std::uint64_t seed) {
    if (replicates < 8)
        throw std::invalid_argument("birkhoff_vs_chain_check: replicates >= 8");
    const KernelSpec& k = psi.system().kernel();
    if (!k.is_full_shift())
        throw std::invalid_argument(
            "birkhoff_vs_chain_check: full-shift systems only (sigma-paths)");
    const auto& mu = k.full_shift_kernel().mu;

    std::vector<double> chain_sums(replicates, 0.0);
    std::vector<double> birkhoff_sums(replicates, 0.0);
    par::fill_indexed(replicates, [&](std::size_t r) {
        // chain side: sum phi(Psi_j), j = 1..n, from a burned-in start
        {
            RngStream rng = derive_stream(seed, "bvc-chain-start", r);
            ChainState st =
                make_state(sample_config(mu, depth, rng),
                           derive_seed(seed, "bvc-chain", r), "bvc");
            burn_in(psi, st, burn_in_steps);
            double s = 0.0;
            for (std::size_t j = 0; j < n; ++j) {
                psi.step(st);
                s += phi(st.current);
            }
            chain_sums[r] = s;
        }
        // dynamics side: sum phi(sigma^j x) on an independently sampled
        // stationary-ish configuration of depth depth + n
        {
            RngStream rng = derive_stream(seed, "bvc-dyn-start", r);
            ChainState st =
                make_state(sample_config(mu, depth + n, rng),
                           derive_seed(seed, "bvc-dyn", r), "bvc");
            burn_in(psi, st, burn_in_steps);
            Config x = st.current;
            double s = phi(x);
            for (std::size_t j = 1; j < n; ++j) {
                x = shift(x);
                s += phi(x);
            }
            birkhoff_sums[r] = s;
        }
    });
    TwoSampleReport rep;
    rep.replicates = replicates;
    rep.ks = stats::ks_two_sample(chain_sums, birkhoff_sums);
    rep.threshold = stats::ks_two_sample_threshold(replicates);
    rep.accept = rep.ks <= rep.threshold;
    return rep;
}

StationarityReport empirical_stationarity(const PsiSampler& psi,
                                          const std::vector<Observable>& phis,
                                          std::size_t n, std::size_t p_samples,
                                          const Config& start,
                                          std::uint64_t seed) {
    StationarityReport rep;
    rep.n = n;
    ChainState st = make_state(start, seed, "stationarity");
    std::vector<double> sum_phi(phis.size(), 0.0);
    std::vector<double> sum_pphi(phis.size(), 0.0);
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t q = 0; q < phis.size(); ++q) {
            sum_phi[q] += phis[q](st.current);
            sum_pphi[q] += feller_apply_psi(psi.system(), phis[q], st.current,
                                            p_samples, seed, i);
        }
        psi.step(st);
    }
    rep.accept = true;
    for (std::size_t q = 0; q < phis.size(); ++q) {
        StationarityEntry e;
        e.name = phis[q].name;
        e.nu_phi = sum_phi[q] / static_cast<double>(n);
        e.nu_P_phi = sum_pphi[q] / static_cast<double>(n);
        e.discrepancy = std::abs(e.nu_P_phi - e.nu_phi);
        const double mc_tol =
            psi.system().kernel().finite_alphabet()
                ? 0.0
                : 3.0 * phis[q].sup_norm /
                      std::sqrt(static_cast<double>(p_samples * n));
        e.tolerance =
            4.0 * phis[q].sup_norm / std::sqrt(static_cast<double>(n)) + mc_tol;
        if (e.discrepancy > e.tolerance) rep.accept = false;
        rep.entries.push_back(std::move(e));
    }
    return rep;
}

EmpiricalMeasure collect_psi_samples(const PsiSampler& psi, ChainState state,
                                     std::size_t atoms, std::size_t thin) {
    EmpiricalMeasure m;
    m.atoms.reserve(atoms);
    for (std::size_t i = 0; i < atoms; ++i) {
        for (std::size_t t = 0; t < std::max<std::size_t>(1, thin); ++t)
            psi.step(state);
        m.atoms.push_back(state.current);
    }
    return m;
}

HitTable support_probe(const Stepper& stepper, ChainState state,
                       const Metric& metric, const std::vector<BallSpec>& balls,
                       std::size_t n_steps) {
    for (const auto& b : balls) {
        if (b.radius <= distance_truncation_bound(b.center.depth()))
            throw std::invalid_argument(
                "support_probe: ball radius below the truncation resolution");
    }
    HitTable table;
    table.hits.assign(balls.size(), 0);
    table.steps = n_steps;
    for (std::size_t s = 0; s <= n_steps; ++s) {
        for (std::size_t b = 0; b < balls.size(); ++b) {
            if (metric(state.current, balls[b].center) <= balls[b].radius)
                ++table.hits[b];
        }
        if (s < n_steps) stepper(state);
    }
    table.all_hit = true;
    for (auto h : table.hits)
        if (h == 0) table.all_hit = false;
    return table;
}

}  // namespace tklab::chains
