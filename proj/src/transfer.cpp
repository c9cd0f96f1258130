#include "tklab/transfer.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

#include "tklab/par.hpp"

namespace tklab {

KernelSpec KernelSpec::full_shift(AprioriMeasure mu) {
    return KernelSpec(FullShiftKernel{std::move(mu)});
}

KernelSpec KernelSpec::weighted_shift(
    std::shared_ptr<const systems::WeightedShiftSystem> sys) {
    if (!sys) throw std::invalid_argument("KernelSpec: null weighted shift");
    return KernelSpec(WeightedShiftKernel{std::move(sys)});
}

KernelSpec KernelSpec::ifs(std::shared_ptr<const systems::IfsSystem> sys) {
    if (!sys) throw std::invalid_argument("KernelSpec: null IFS");
    return KernelSpec(IfsKernel{std::move(sys)});
}

bool KernelSpec::is_full_shift() const {
    return std::holds_alternative<FullShiftKernel>(v_);
}
bool KernelSpec::is_weighted_shift() const {
    return std::holds_alternative<WeightedShiftKernel>(v_);
}
bool KernelSpec::is_ifs() const { return std::holds_alternative<IfsKernel>(v_); }

const FullShiftKernel& KernelSpec::full_shift_kernel() const {
    return std::get<FullShiftKernel>(v_);
}
const WeightedShiftKernel& KernelSpec::weighted_shift_kernel() const {
    return std::get<WeightedShiftKernel>(v_);
}
const IfsKernel& KernelSpec::ifs_kernel() const {
    return std::get<IfsKernel>(v_);
}

bool KernelSpec::finite_alphabet() const {
    return is_full_shift() &&
           full_shift_kernel().mu.alphabet()->kind() == AlphabetKind::kFinite;
}

std::size_t KernelSpec::branch_count() const {
    if (finite_alphabet())
        return full_shift_kernel().mu.alphabet()->finite_size();
    if (is_ifs()) return ifs_kernel().system->map_count();
    return 0;
}

void KernelSpec::step_backward(Config& x, RngStream& rng) const {
    if (is_full_shift()) {
        const auto& mu = full_shift_kernel().mu;
        double buf[8];
        const auto dim = static_cast<std::size_t>(mu.alphabet()->point_dim());
        if (dim <= 8) {
            std::span<double> a(buf, dim);
            mu.sample(rng, a);
            prepend_in_place(x, a);
        } else {
            auto a = mu.sample(rng);
            prepend_in_place(x, a);
        }
        return;
    }
    if (is_weighted_shift()) {
        const auto& sys = *weighted_shift_kernel().system;
        double r[1];
        sys.apriori().sample(rng, r);
        const std::size_t d = x.depth();
        for (std::size_t i = d; i-- > 1;)
            x.coords[i] = x.coords[i - 1] / sys.alpha()[i - 1];
        x.coords[0] = r[0];
        return;
    }
    const auto& sys = *ifs_kernel().system;
    const std::size_t branch = sys.sample_branch(x.coords, rng);
    std::vector<double> y(x.coords.size());
    sys.apply_map(branch, x.coords, y);
    x.coords = std::move(y);
}

void KernelSpec::apply_branch(Config& x, std::size_t branch) const {
    if (finite_alphabet()) {
        const double v =
            full_shift_kernel().mu.alphabet()->finite_values()[branch];
        prepend_in_place(x, std::span<const double>(&v, 1));
        return;
    }
    if (is_ifs()) {
        const auto& sys = *ifs_kernel().system;
        std::vector<double> y(x.coords.size());
        sys.apply_map(branch, x.coords, y);
        x.coords = std::move(y);
        return;
    }
    throw std::logic_error("apply_branch: kernel has no finite branches");
}

double KernelSpec::branch_weight(const Config& x, std::size_t branch) const {
    if (finite_alphabet()) return full_shift_kernel().mu.weights()[branch];
    if (is_ifs()) {
        const auto& sys = *ifs_kernel().system;
        std::vector<double> p(sys.map_count());
        sys.probabilities(x.coords, p);
        return p[branch];
    }
    throw std::logic_error("branch_weight: kernel has no finite branches");
}

Config KernelSpec::forward(const Config& x) const {
    if (is_full_shift()) return shift(x);
    if (is_weighted_shift()) {
        const auto& sys = *weighted_shift_kernel().system;
        Config out = x;
        const std::size_t d = x.depth();
        for (std::size_t i = 0; i + 1 < d; ++i)
            out.coords[i] = sys.alpha()[i] * x.coords[i + 1];
        out.coords[d - 1] = 0.0;
        return out;
    }
    throw std::logic_error("forward: the IFS maps are not jointly invertible");
}

Config KernelSpec::backward_then_forward(const Config& x) const {
    if (is_full_shift()) return drop_last(x);
    if (is_weighted_shift()) {
        Config out = x;
        out.coords[x.depth() - 1] = 0.0;
        return out;
    }
    throw std::logic_error("backward_then_forward: full shift or weighted "
                           "shift kernels only");
}

std::string KernelSpec::describe() const {
    if (is_full_shift())
        return "full-shift(" + full_shift_kernel().mu.alphabet()->describe() + ")";
    if (is_weighted_shift()) return "weighted-shift";
    return "ifs";
}

bool tilted_sampler_available(const KernelSpec& kernel, const Potential& f) {
    if (!kernel.is_full_shift()) return false;
    const auto& mu = kernel.full_shift_kernel().mu;
    // finite alphabets: the conditional normalizer is the branch sum itself
    if (mu.alphabet()->kind() == AlphabetKind::kFinite) return true;
    // spheres: available when the one-step weight is linear in the new
    // point, i.e. e^{<a, v(x)>} with a von Mises-Fisher normalizer
    if (mu.alphabet()->kind() != AlphabetKind::kSphere) return false;
    return dynamic_cast<const DysonSpherePotential*>(&f) != nullptr;
}

namespace {

constexpr std::size_t kEnumCap = 1u << 20;

bool exact_enumerable(const KernelSpec& kernel, std::size_t n) {
    const std::size_t b = kernel.branch_count();
    if (b == 0) return false;
    double leaves = 1.0;
    for (std::size_t i = 0; i < n; ++i) {
        leaves *= static_cast<double>(b);
        if (leaves > static_cast<double>(kEnumCap)) return false;
    }
    return true;
}

// Exact L^n(e^f ; phi)(x) over all branch words; weights are shifted by
// -n sup_f during accumulation and corrected on return.
double enumerate_exact(const KernelSpec& kernel, const Potential& f,
                       const Observable& phi, const Config& x, std::size_t n) {
    const std::size_t b = kernel.branch_count();
    const double sup_f = f.sup_bound();
    double acc = 0.0;
    // iterative DFS with explicit stack of (config, level, logw)
    struct Frame {
        Config cfg;
        std::size_t level;
        double logw;
        double prob;
    };
    std::vector<Frame> stack;
    stack.push_back({x, 0, 0.0, 1.0});
    while (!stack.empty()) {
        Frame fr = std::move(stack.back());
        stack.pop_back();
        if (fr.level == n) {
            acc += fr.prob * std::exp(fr.logw) * phi(fr.cfg);
            continue;
        }
        for (std::size_t br = 0; br < b; ++br) {
            Frame next;
            next.cfg = fr.cfg;
            const double w = kernel.branch_weight(next.cfg, br);
            kernel.apply_branch(next.cfg, br);
            next.level = fr.level + 1;
            next.logw = fr.logw + f.eval(next.cfg) - sup_f;
            next.prob = fr.prob * w;
            stack.push_back(std::move(next));
        }
    }
    return acc * std::exp(static_cast<double>(n) * sup_f);
}

}  // namespace

PathSampler::PathSampler(KernelSpec kernel, PotentialPtr f, SamplerKind sampler,
                         std::size_t expected_steps)
    : kernel_(std::move(kernel)), f_(std::move(f)) {
    if (!f_) throw std::invalid_argument("PathSampler: null potential");
    sup_f_ = f_->sup_bound();
    const bool can_tilt = tilted_sampler_available(kernel_, *f_);
    if (sampler == SamplerKind::kTilted && !can_tilt)
        throw std::invalid_argument(
            "tilted sampler requested but no exact conditional normalizer is "
            "available for this kernel/potential pair");
    tilted_ = can_tilt && sampler != SamplerKind::kPlain;
    if (!tilted_) return;
    if (kernel_.finite_alphabet()) {
        if (kernel_.full_shift_kernel().mu.weights().size() <= 64) {
            finite_tilt_ = true;
        } else {
            tilted_ = false;  // very large alphabets fall back to plain
        }
        return;
    }
    dyson_ = dynamic_cast<const DysonSpherePotential*>(f_.get());
    // the normalizer table only pays off over long runs; short calls use
    // the exact Bessel evaluation
    if (expected_steps >= 512)
        table_ = std::make_shared<const TiltNormalizerTable>(
            dyson_->ambient_dim(), sup_f_ * 1.01);
}

PathSampler::Workspace PathSampler::make_workspace(const Config& proto) const {
    Workspace ws;
    ws.field.resize(static_cast<std::size_t>(proto.alphabet->point_dim()));
    ws.scratch = proto;
    return ws;
}

double PathSampler::step(Config& cur, RngStream& rng, Workspace& ws,
                         std::vector<double>* symbol) const {
    if (finite_tilt_) {
        const auto& mu = kernel_.full_shift_kernel().mu;
        const std::size_t s = mu.weights().size();
        double w[64];
        double z = 0.0;
        for (std::size_t a = 0; a < s; ++a) {
            ws.scratch = cur;
            kernel_.apply_branch(ws.scratch, a);
            w[a] = mu.weights()[a] * std::exp(f_->eval(ws.scratch) - sup_f_);
            z += w[a];
        }
        const double u = rng.uniform() * z;
        double acc = 0.0;
        std::size_t pick = s - 1;
        for (std::size_t a = 0; a < s; ++a) {
            acc += w[a];
            if (u < acc) {
                pick = a;
                break;
            }
        }
        if (symbol)
            symbol->assign(1, mu.alphabet()->finite_values()[pick]);
        kernel_.apply_branch(cur, pick);
        return std::log(z);
    }
    if (tilted_) {
        dyson_->interaction_field(cur, ws.field);
        double k2 = 0.0;
        for (double v : ws.field) k2 += v * v;
        const double kappa = std::sqrt(k2);
        double a_buf[8];
        std::span<double> a(a_buf, ws.field.size());
        sample_sphere_tilted(ws.field, kappa, rng, a);
        prepend_in_place(cur, a);
        if (symbol) symbol->assign(a.begin(), a.end());
        const double logz =
            table_ ? table_->log_z(kappa)
                   : log_sphere_tilt_normalizer(kappa, dyson_->ambient_dim());
        return logz - sup_f_;
    }
    if (symbol) {
        if (!kernel_.is_full_shift())
            throw std::logic_error(
                "PathSampler: symbol recording needs a full-shift kernel");
        const auto& mu = kernel_.full_shift_kernel().mu;
        symbol->resize(static_cast<std::size_t>(mu.alphabet()->point_dim()));
        mu.sample(rng, *symbol);
        prepend_in_place(cur, *symbol);
    } else {
        kernel_.step_backward(cur, rng);
    }
    return f_->eval(cur) - sup_f_;
}

TransferEstimate apply_transfer_n(const KernelSpec& kernel, const Potential& f,
                                  const Observable& phi, const Config& x,
                                  std::size_t n, const EstimatorOptions& opt) {
    if (n == 0) {
        return {phi(x), 0.0, 0, true};
    }
    if (!opt.force_mc && exact_enumerable(kernel, n)) {
        TransferEstimate est;
        est.value = enumerate_exact(kernel, f, phi, x, n);
        est.std_error = 0.0;
        est.samples = 0;
        est.exact = true;
        return est;
    }
    const std::size_t K = std::max<std::size_t>(1, opt.samples);
    const PathSampler sampler(
        kernel, std::shared_ptr<const Potential>(std::shared_ptr<void>(), &f),
        opt.sampler, n * K);

    std::vector<double> vals(K, 0.0);
    par::fill_indexed(K, [&](std::size_t i) {
        RngStream rng = derive_stream(opt.seed, opt.label, i);
        Config cur = x;
        auto ws = sampler.make_workspace(x);
        double logw = 0.0;
        for (std::size_t s = 0; s < n; ++s) logw += sampler.step(cur, rng, ws);
        vals[i] = std::exp(logw) * phi(cur);
    });
    double mean, se;
    par::mean_and_se(vals, mean, se);
    const double scale = std::exp(static_cast<double>(n) * sampler.sup_f());
    return {mean * scale, se * scale, K, false};
}

TransferEstimate apply_transfer(const KernelSpec& kernel, const Potential& f,
                                const Observable& phi, const Config& x,
                                const EstimatorOptions& opt) {
    return apply_transfer_n(kernel, f, phi, x, 1, opt);
}

SpectralRadiusEstimate spectral_radius(const KernelSpec& kernel,
                                       const Potential& f, const Config& probe,
                                       std::size_t n_max,
                                       const EstimatorOptions& opt) {
    if (n_max < 4) throw std::invalid_argument("spectral_radius: n_max >= 4");
    SpectralRadiusEstimate out;
    out.log_levels.assign(n_max, 0.0);
    out.level_rel_se.assign(n_max, 0.0);
    const double sup_f = f.sup_bound();
    const Observable one = one_observable();

    if (!opt.force_mc && exact_enumerable(kernel, n_max)) {
        for (std::size_t n = 1; n <= n_max; ++n) {
            const double v = enumerate_exact(kernel, f, one, probe, n);
            out.log_levels[n - 1] = std::log(v);
        }
    } else {
        const std::size_t K = std::max<std::size_t>(2, opt.samples);
        const PathSampler sampler(
            kernel,
            std::shared_ptr<const Potential>(std::shared_ptr<void>(), &f),
            opt.sampler, n_max * K);
        std::vector<std::vector<double>> levels(
            n_max, std::vector<double>(K, 0.0));
        par::fill_indexed(K, [&](std::size_t i) {
            RngStream rng = derive_stream(opt.seed, opt.label, i);
            Config cur = probe;
            auto ws = sampler.make_workspace(probe);
            double logw = 0.0;
            for (std::size_t s = 0; s < n_max; ++s) {
                logw += sampler.step(cur, rng, ws);
                levels[s][i] = std::exp(logw);
            }
        });
        for (std::size_t n = 1; n <= n_max; ++n) {
            double mean, se;
            par::mean_and_se(levels[n - 1], mean, se);
            out.log_levels[n - 1] =
                std::log(mean) + static_cast<double>(n) * sup_f;
            out.level_rel_se[n - 1] = se / mean;
        }
    }

    // the bounded comparability prefactor settles after a few levels; the
    // slope is fitted on the upper half so the transient cannot bias it
    const std::size_t n_lo = std::max<std::size_t>(2, n_max / 2);
    std::vector<double> ns, ys;
    for (std::size_t n = n_lo; n <= n_max; ++n) {
        ns.push_back(static_cast<double>(n));
        ys.push_back(out.log_levels[n - 1]);
    }
    out.fit = stats::fit_line(ns, ys);
    out.rho = std::exp(out.fit.slope);
    out.log_rho_se = out.fit.slope_se;
    if (!std::isfinite(out.rho))
        throw std::runtime_error("spectral_radius: non-finite estimate");
    return out;
}

CesaroEigenfunction::CesaroEigenfunction(KernelSpec kernel, PotentialPtr f,
                                         double rho, std::size_t n_levels,
                                         std::size_t bank_paths,
                                         std::uint64_t seed, SamplerKind sampler,
                                         std::size_t max_walk_depth)
    : kernel_(std::move(kernel)),
      f_(std::move(f)),
      rho_(rho),
      n_levels_(n_levels),
      bank_paths_(bank_paths),
      seed_(seed),
      max_walk_depth_(max_walk_depth),
      sampler_(std::make_shared<const PathSampler>(
          kernel_, f_, sampler, n_levels * bank_paths)) {
    if (rho_ <= 0.0) throw std::invalid_argument("CesaroEigenfunction: rho > 0");
    if (n_levels_ == 0 || bank_paths_ == 0)
        throw std::invalid_argument("CesaroEigenfunction: empty construction");
    if (kernel_.finite_alphabet()) {
        std::size_t dep = 1;
        if (const auto* fr =
                dynamic_cast<const FiniteRangePotential*>(f_.get()))
            dep = fr->range();
        const std::size_t word_len = dep > 1 ? dep - 1 : 0;
        const std::size_t s =
            kernel_.full_shift_kernel().mu.alphabet()->finite_size();
        std::size_t states = 1;
        for (std::size_t i = 0; i < word_len; ++i) states *= s;
        if (states <= 64) {
            const auto& alph = *kernel_.full_shift_kernel().mu.alphabet();
            cache_.resize(states);
            const std::size_t probe_depth = dep + 2;
            for (std::size_t st = 0; st < states; ++st) {
                Config x;
                x.alphabet = kernel_.full_shift_kernel().mu.alphabet();
                x.coords.assign(probe_depth, alph.finite_values()[0]);
                std::size_t idx = st;
                for (std::size_t i = 0; i < word_len; ++i) {
                    x.coords[i] = alph.finite_values()[idx % s];
                    idx /= s;
                }
                cache_[st] = eval_uncached(x);
            }
            cache_word_len_ = word_len;
        }
    }
}

double CesaroEigenfunction::eval(const Config& x) const {
    if (!cache_.empty()) {
        const auto& alph = *x.alphabet;
        const std::size_t s = alph.finite_size();
        std::size_t idx = 0, mult = 1;
        for (std::size_t i = 0; i < cache_word_len_; ++i) {
            idx += alph.finite_index(x.point(i)[0]) * mult;
            mult *= s;
        }
        return cache_[idx];
    }
    return eval_uncached(x);
}

double CesaroEigenfunction::eval_uncached(const Config& x) const {
    const PathSampler& sampler = *sampler_;
    const double log_rho = std::log(rho_);
    const std::size_t K = bank_paths_;
    const std::size_t j_lo = n_levels_ / 2;

    Config start = x;
    if (max_walk_depth_ > 0 && kernel_.is_full_shift() &&
        x.depth() > max_walk_depth_) {
        const auto dim = static_cast<std::size_t>(x.alphabet->point_dim());
        start.coords.resize(max_walk_depth_ * dim);
    }
    std::vector<Config> particles(K, start);
    std::vector<RngStream> streams;
    streams.reserve(K);
    for (std::size_t p = 0; p < K; ++p)
        streams.push_back(derive_stream(seed_, "eig-bank", p));
    auto ws = sampler.make_workspace(start);
    std::vector<double> w(K, 1.0);  // cumulative shifted weights
    std::vector<Config> resample_buf;

    double log_scale = 0.0;  // factored-out weight means at resets
    double level_acc = 0.0;
    std::size_t level_count = 0;
    if (j_lo == 0) {
        level_acc += 1.0;  // j = 0 term: L^0 1 = 1
        ++level_count;
    }
    for (std::size_t j = 1; j <= n_levels_; ++j) {
        double sum = 0.0, sum2 = 0.0;
        for (std::size_t p = 0; p < K; ++p) {
            w[p] *= std::exp(sampler.step(particles[p], streams[p], ws));
            sum += w[p];
            sum2 += w[p] * w[p];
        }
        const double mean = sum / static_cast<double>(K);
        if (j >= std::max<std::size_t>(j_lo, 1)) {
            level_acc += std::exp(log_scale + std::log(mean) +
                                  static_cast<double>(j) *
                                      (sampler.sup_f() - log_rho));
            ++level_count;
        }
        if (j == n_levels_) break;
        // adaptive systematic resampling keeps the population balanced; with
        // near-uniform weights (tilted proposals) it never fires
        const double ess = sum * sum / sum2;
        if (ess < static_cast<double>(K) / 2.0) {
            if (resample_buf.empty()) resample_buf.assign(K, start);
            RngStream rrng = derive_stream(seed_, "eig-resample", j);
            const double u0 = rrng.uniform();
            double cum = w[0];
            std::size_t src_idx = 0;
            for (std::size_t p = 0; p < K; ++p) {
                const double target = (u0 + static_cast<double>(p)) /
                                      static_cast<double>(K) * sum;
                while (cum < target && src_idx + 1 < K) cum += w[++src_idx];
                resample_buf[p] = particles[src_idx];
            }
            particles.swap(resample_buf);
            std::fill(w.begin(), w.end(), 1.0);
            log_scale += std::log(mean);
        }
    }
    return level_acc / static_cast<double>(level_count);
}

double CesaroEigenfunction::log_eval(const Config& x) const {
    return std::log(eval(x));
}

double NormalizedSystem::fbar(const Config& x) const {
    const double base = f_->eval(x) - log_lambda_;
    if (kernel_.is_ifs()) {
        // supported IFS normalizations have constant h
        return base;
    }
    return base + h_->log_eval(x) - h_->log_eval(kernel_.forward(x));
}

double NormalizedSystem::fbar_path_sum(double f_path_sum, const Config& x0,
                                       const Config& xn, std::size_t n) const {
    // telescoped: per-step h terms cancel along the path up to the depth-D
    // truncation tail of h
    if (kernel_.is_ifs())
        return f_path_sum - static_cast<double>(n) * log_lambda_;
    return f_path_sum + h_->log_eval(xn) - h_->log_eval(x0) -
           static_cast<double>(n) * log_lambda_;
}

NormalizedSystem normalize(KernelSpec kernel, PotentialPtr f,
                           const NormalizeOptions& opt) {
    if (!f) throw std::invalid_argument("normalize: null potential");
    NormalizedSystem sys(std::move(kernel), std::move(f));
    sys.seed_ = opt.seed;
    sys.sampler_ = opt.sampler;
    sys.diag_.tolerance = opt.tolerance;

    const KernelSpec& k = sys.kernel_;
    const Potential& f_ref = *sys.f_;

    if (k.is_ifs() &&
        dynamic_cast<const ConstantPotential*>(&f_ref) == nullptr)
        throw std::invalid_argument(
            "normalize: IFS kernels support constant potentials only (the IFS "
            "transfer operator with f = 0 is already normalized)");

    // Flatness evidence gate for the Dyson potentials.
    if (!opt.skip_flatness_check && k.is_full_shift()) {
        const auto* ds = dynamic_cast<const DysonSpherePotential*>(&f_ref);
        const auto* dh = dynamic_cast<const DysonHalfLinePotential*>(&f_ref);
        if (ds != nullptr || dh != nullptr) {
            const double eps = ds != nullptr ? ds->eps() : dh->eps();
            const ModulusOfContinuity target = dyson_flatness_modulus(eps);
            sys.diag_.flatness = flatness_estimate(
                f_ref, k.full_shift_kernel().mu, target, opt.flatness_n_max,
                opt.flatness_trials, opt.depth, derive_seed(opt.seed, "flat"));
        }
    }

    // lambda from the level regression at a random probe.
    RngStream probe_rng = derive_stream(opt.seed, "rho-probe");
    Config rho_probe;
    if (k.is_full_shift()) {
        rho_probe =
            sample_config(k.full_shift_kernel().mu, opt.depth, probe_rng);
    } else if (k.is_weighted_shift()) {
        const auto& ws = *k.weighted_shift_kernel().system;
        rho_probe.alphabet = ws.apriori().alphabet();
        rho_probe.coords.resize(ws.dim());
        for (auto& c : rho_probe.coords) c = ws.apriori().sample(probe_rng)[0];
    } else {
        rho_probe.alphabet = Alphabet::real_line();
        rho_probe.coords.assign(
            static_cast<std::size_t>(k.ifs_kernel().system->dim()), 0.0);
    }
    EstimatorOptions rho_opt;
    rho_opt.samples = opt.rho_samples;
    rho_opt.seed = derive_seed(opt.seed, "rho");
    rho_opt.label = "rho";
    rho_opt.sampler = opt.sampler;
    const SpectralRadiusEstimate rho_est =
        spectral_radius(k, f_ref, rho_probe, opt.rho_levels, rho_opt);
    sys.lambda_ = rho_est.rho;
    sys.log_lambda_ = rho_est.fit.slope;
    sys.diag_.rho_fit = rho_est.fit;

    sys.h_ = std::make_shared<const CesaroEigenfunction>(
        k, sys.f_, sys.lambda_, opt.h_levels, opt.h_bank,
        derive_seed(opt.seed, "eig"), opt.sampler, opt.h_walk_depth);

    // Probe check: sup over probe configs of |L_fbar 1 - 1|.
    double h_min = std::numeric_limits<double>::infinity();
    double h_max = 0.0;
    double sup_dev = 0.0;
    for (std::size_t p = 0; p < opt.probes; ++p) {
        RngStream rng = derive_stream(opt.seed, "probe", p);
        Config x;
        if (k.is_full_shift()) {
            x = sample_config(k.full_shift_kernel().mu, opt.depth, rng);
        } else if (k.is_weighted_shift()) {
            const auto& ws = *k.weighted_shift_kernel().system;
            x.alphabet = ws.apriori().alphabet();
            x.coords.resize(ws.dim());
            for (auto& c : x.coords) c = ws.apriori().sample(rng)[0];
        } else {
            x.alphabet = Alphabet::real_line();
            x.coords.assign(
                static_cast<std::size_t>(k.ifs_kernel().system->dim()), 0.0);
            for (auto& c : x.coords) c = rng.uniform();
        }

        double value = 0.0, se = 0.0;
        double h_x;
        if (k.is_ifs()) {
            h_x = sys.h_->eval(x);
            // constant-potential IFS: L_fbar 1 = e^{c - log lambda}
            value = std::exp(f_ref.eval(x) - sys.log_lambda_);
        } else {
            // h(sigma(a x)) is constant in a: x with its last coordinate
            // dropped (full shift) or zeroed (weighted shift)
            const Config x_down = k.backward_then_forward(x);
            h_x = sys.h_->eval(x_down);
            const double log_denom = std::log(h_x) + sys.log_lambda_;
            if (k.finite_alphabet()) {
                const auto& mu = k.full_shift_kernel().mu;
                double acc = 0.0;
                for (std::size_t a = 0; a < mu.weights().size(); ++a) {
                    Config ax = x;
                    k.apply_branch(ax, a);
                    const double hv = sys.h_->eval(ax);
                    h_min = std::min(h_min, hv);
                    h_max = std::max(h_max, hv);
                    acc += mu.weights()[a] *
                           std::exp(f_ref.eval(ax) - log_denom) * hv;
                }
                value = acc;
            } else {
                const std::size_t K = std::max<std::size_t>(2, opt.check_samples);
                std::vector<double> vals(K, 0.0);
                par::fill_indexed(K, [&](std::size_t i) {
                    RngStream r2 = derive_stream(opt.seed, "check", p, i);
                    Config ax = x;
                    k.step_backward(ax, r2);
                    vals[i] = std::exp(f_ref.eval(ax) - log_denom) *
                              sys.h_->eval(ax);
                });
                par::mean_and_se(vals, value, se);
            }
        }
        h_min = std::min(h_min, h_x);
        h_max = std::max(h_max, h_x);
        sys.diag_.probe_values.push_back(value);
        sys.diag_.probe_se.push_back(se);
        sup_dev = std::max(sup_dev, std::abs(value - 1.0));
    }
    sys.diag_.sup_deviation = sup_dev;
    sys.diag_.h_min = h_min;
    sys.diag_.h_max = h_max;
    sys.diag_.accepted = sup_dev <= opt.tolerance;

    const double h_lo = h_min / 1.5, h_hi = h_max * 1.5;
    sys.sup_fbar_ = f_ref.sup_bound() + std::log(h_hi) - std::log(h_lo) -
                    sys.log_lambda_;
    sys.inf_fbar_ = f_ref.inf_bound() + std::log(h_lo) - std::log(h_hi) -
                    sys.log_lambda_;
    return sys;
}

}  // namespace tklab
