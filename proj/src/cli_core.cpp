#include "tklab/cli_core.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <optional>
#include <set>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

#include "tklab/chains.hpp"
#include "tklab/coupling.hpp"
#include "tklab/limits.hpp"
#include "tklab/oracle.hpp"
#include "tklab/par.hpp"
#include "tklab/systems.hpp"
#include "tklab/transfer.hpp"

namespace tklab::cli {

namespace {

using nlohmann::json;
namespace fs = std::filesystem;

std::string fmt(double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

void require_keys(const json& j, const char* ctx,
                  const std::set<std::string>& allowed) {
    if (!j.is_object())
        throw std::invalid_argument(std::string("config: ") + ctx +
                                    " must be an object");
    for (const auto& item : j.items()) {
        if (!allowed.count(item.key()))
            throw std::invalid_argument(std::string("config: unknown key '") +
                                        item.key() + "' in " + ctx);
    }
}

const std::set<std::string> kModels = {"full-shift-finite", "dyson-sphere",
                                       "dyson-halfline", "weighted-shift",
                                       "ifs"};

RunConfig parse_config_json(const json& j) {
    require_keys(j, "top level",
                 {"model", "seed", "out", "depth", "samples", "params",
                  "burn_in", "tolerances"});
    for (const char* req : {"model", "seed", "out"}) {
        if (!j.contains(req))
            throw std::invalid_argument(
                std::string("config: missing required key '") + req + "'");
    }
    RunConfig cfg;
    cfg.model = j.at("model").get<std::string>();
    if (!kModels.count(cfg.model))
        throw std::invalid_argument("config: unknown model '" + cfg.model + "'");
    cfg.seed = j.at("seed").get<std::uint64_t>();
    cfg.out_dir = j.at("out").get<std::string>();
    if (j.contains("depth")) cfg.depth = j.at("depth").get<std::size_t>();
    if (j.contains("burn_in")) cfg.burn_in = j.at("burn_in").get<std::size_t>();
    if (j.contains("samples")) {
        const json& s = j.at("samples");
        require_keys(s, "samples", {"K", "n", "R", "n_max"});
        if (s.contains("K")) cfg.samples_k = s.at("K").get<std::size_t>();
        if (s.contains("n")) cfg.chain_n = s.at("n").get<std::size_t>();
        if (s.contains("R")) cfg.replicates = s.at("R").get<std::size_t>();
        if (s.contains("n_max")) cfg.n_max = s.at("n_max").get<std::size_t>();
    }
    if (j.contains("params")) {
        const json& p = j.at("params");
        require_keys(p, "params",
                     {"eps", "sphere_dim", "alphabet_size", "weights",
                      "potential", "shift"});
        if (p.contains("eps")) cfg.eps = p.at("eps").get<double>();
        if (p.contains("sphere_dim"))
            cfg.sphere_dim = p.at("sphere_dim").get<int>();
        if (p.contains("alphabet_size"))
            cfg.alphabet_size = p.at("alphabet_size").get<std::size_t>();
        if (p.contains("weights"))
            cfg.weights = p.at("weights").get<std::vector<double>>();
        if (p.contains("potential")) {
            const json& q = p.at("potential");
            require_keys(q, "params.potential", {"kind", "value", "beta"});
            if (q.contains("kind"))
                cfg.potential.kind = q.at("kind").get<std::string>();
            if (q.contains("value"))
                cfg.potential.value = q.at("value").get<double>();
            if (q.contains("beta"))
                cfg.potential.beta = q.at("beta").get<double>();
        }
        if (p.contains("shift")) {
            const json& q = p.at("shift");
            require_keys(q, "params.shift", {"alpha", "dim", "p"});
            if (q.contains("alpha")) cfg.shift.alpha = q.at("alpha").get<double>();
            if (q.contains("dim")) cfg.shift.dim = q.at("dim").get<std::size_t>();
            if (q.contains("p")) cfg.shift.p = q.at("p").get<double>();
        }
    }
    if (j.contains("tolerances")) {
        const json& t = j.at("tolerances");
        require_keys(t, "tolerances",
                     {"normalize", "decay_exponent", "breiman", "support_ks"});
        if (t.contains("normalize"))
            cfg.tol.normalize = t.at("normalize").get<double>();
        if (t.contains("decay_exponent"))
            cfg.tol.decay_exponent = t.at("decay_exponent").get<double>();
        if (t.contains("breiman"))
            cfg.tol.breiman = t.at("breiman").get<double>();
        if (t.contains("support_ks"))
            cfg.tol.support_ks = t.at("support_ks").get<double>();
    }
    return cfg;
}

json config_to_json(const RunConfig& cfg) {
    json j;
    j["model"] = cfg.model;
    j["seed"] = cfg.seed;
    j["out"] = cfg.out_dir;
    j["depth"] = cfg.depth;
    j["burn_in"] = cfg.burn_in;
    j["samples"] = {{"K", cfg.samples_k},
                    {"n", cfg.chain_n},
                    {"R", cfg.replicates},
                    {"n_max", cfg.n_max}};
    j["params"] = {{"eps", cfg.eps},
                   {"sphere_dim", cfg.sphere_dim},
                   {"alphabet_size", cfg.alphabet_size},
                   {"weights", cfg.weights},
                   {"potential",
                    {{"kind", cfg.potential.kind},
                     {"value", cfg.potential.value},
                     {"beta", cfg.potential.beta}}},
                   {"shift",
                    {{"alpha", cfg.shift.alpha},
                     {"dim", cfg.shift.dim},
                     {"p", cfg.shift.p}}}};
    j["tolerances"] = {{"normalize", cfg.tol.normalize},
                       {"decay_exponent", cfg.tol.decay_exponent},
                       {"breiman", cfg.tol.breiman},
                       {"support_ks", cfg.tol.support_ks}};
    return j;
}

std::string config_hash(const RunConfig& cfg) {
    const std::string dump = config_to_json(cfg).dump();
    char buf[32];
    std::snprintf(buf, sizeof buf, "%016llx",
                  static_cast<unsigned long long>(fnv1a(dump)));
    return buf;
}

// ---- model assembly --------------------------------------------------

std::vector<double> finite_values(std::size_t s) {
    std::vector<double> v(s);
    for (std::size_t i = 0; i < s; ++i)
        v[i] = s == 1 ? 0.0
                      : static_cast<double>(i) / static_cast<double>(s - 1);
    return v;
}

struct ModelBundle {
    KernelSpec kernel;
    PotentialPtr f;
    AlphabetPtr alphabet;
    std::shared_ptr<const systems::WeightedShiftSystem> shift_sys;
    std::shared_ptr<const systems::IfsSystem> ifs_sys;
};

PotentialPtr build_finite_potential(const RunConfig& cfg, AlphabetPtr alphabet) {
    const auto& p = cfg.potential;
    if (p.kind == "constant")
        return std::make_shared<ConstantPotential>(p.value);
    if (p.kind == "linear") {
        const std::size_t s = alphabet->finite_size();
        std::vector<double> table(s);
        for (std::size_t i = 0; i < s; ++i)
            table[i] = p.beta * alphabet->finite_values()[i];
        return std::make_shared<FiniteRangePotential>(alphabet, 1,
                                                      std::move(table));
    }
    if (p.kind == "pair") {
        const std::size_t s = alphabet->finite_size();
        std::vector<double> table(s * s);
        for (std::size_t j = 0; j < s; ++j)
            for (std::size_t i = 0; i < s; ++i)
                table[i + s * j] = p.beta * alphabet->finite_values()[i] *
                                   alphabet->finite_values()[j];
        return std::make_shared<FiniteRangePotential>(alphabet, 2,
                                                      std::move(table));
    }
    throw std::invalid_argument("config: potential kind '" + p.kind +
                                "' is not valid for finite models");
}

ModelBundle build_model(const RunConfig& cfg) {
    if (cfg.model == "full-shift-finite") {
        AlphabetPtr alph = Alphabet::finite(finite_values(cfg.alphabet_size));
        AprioriMeasure mu =
            cfg.weights.empty()
                ? AprioriMeasure::uniform_finite(alph)
                : AprioriMeasure::finite(alph, cfg.weights);
        return {KernelSpec::full_shift(std::move(mu)),
                build_finite_potential(cfg, alph), alph, nullptr, nullptr};
    }
    if (cfg.model == "dyson-sphere") {
        AlphabetPtr alph = Alphabet::sphere(cfg.sphere_dim);
        AprioriMeasure mu = AprioriMeasure::sphere_uniform(alph);
        return {KernelSpec::full_shift(std::move(mu)),
                std::make_shared<DysonSpherePotential>(cfg.eps, cfg.sphere_dim),
                alph, nullptr, nullptr};
    }
    if (cfg.model == "dyson-halfline") {
        AlphabetPtr alph = Alphabet::half_line();
        AprioriMeasure mu = AprioriMeasure::half_line_exponential(alph);
        return {KernelSpec::full_shift(std::move(mu)),
                std::make_shared<DysonHalfLinePotential>(cfg.eps), alph,
                nullptr, nullptr};
    }
    if (cfg.model == "weighted-shift") {
        AlphabetPtr alph = Alphabet::real_line();
        AprioriMeasure mu = AprioriMeasure::real_line_gaussian(alph);
        std::vector<double> alpha(cfg.shift.dim, cfg.shift.alpha);
        auto sys = std::make_shared<const systems::WeightedShiftSystem>(
            std::move(alpha), cfg.shift.alpha * 0.5, cfg.shift.alpha * 2.0,
            cfg.shift.p, mu);
        return {KernelSpec::weighted_shift(sys),
                std::make_shared<ConstantPotential>(cfg.potential.value), alph,
                sys, nullptr};
    }
    if (cfg.model == "ifs") {
        auto sys = systems::IfsSystem::dyadic_interval();
        return {KernelSpec::ifs(sys),
                std::make_shared<ConstantPotential>(0.0),
                Alphabet::real_line(), nullptr, sys};
    }
    throw std::invalid_argument("config: unknown model " + cfg.model);
}

NormalizeOptions make_normalize_options(const RunConfig& cfg,
                                        const ModelBundle& mb) {
    NormalizeOptions opt;
    opt.depth = cfg.depth;
    opt.seed = cfg.seed;
    opt.tolerance = cfg.tol.normalize;
    opt.check_samples = cfg.samples_k;
    if (mb.kernel.finite_alphabet()) {
        opt.rho_levels = 12;
        opt.h_levels = 64;
        opt.h_bank = 65536;
    } else if (tilted_sampler_available(mb.kernel, *mb.f)) {
        opt.rho_levels = 16;
        opt.rho_samples = 4096;
        opt.h_levels = 10;
        opt.h_bank = 24;
        opt.h_walk_depth = 32;
    } else {
        // plain Monte Carlo: keep the level range short so the weight
        // variance stays controlled
        opt.rho_levels = 10;
        opt.rho_samples = 8192;
        opt.h_levels = 8;
        opt.h_bank = 256;
    }
    return opt;
}

Config model_start_config(const ModelBundle& mb, const RunConfig& cfg,
                          std::uint64_t seed, const char* label) {
    RngStream rng = derive_stream(seed, label);
    if (mb.kernel.is_full_shift())
        return sample_config(mb.kernel.full_shift_kernel().mu, cfg.depth, rng);
    if (mb.kernel.is_weighted_shift()) {
        Config x;
        x.alphabet = mb.alphabet;
        x.coords.resize(mb.shift_sys->dim());
        for (auto& c : x.coords) c = mb.shift_sys->apriori().sample(rng)[0];
        return x;
    }
    Config x;
    x.alphabet = mb.alphabet;
    x.coords.assign(static_cast<std::size_t>(mb.ifs_sys->dim()), 0.0);
    for (auto& c : x.coords) c = rng.uniform();
    return x;
}

// ---- artifact writers -------------------------------------------------

class ArtifactWriter {
public:
    ArtifactWriter(const fs::path& dir, RunSummary& summary)
        : dir_(dir), summary_(summary) {
        fs::create_directories(dir_);
    }

    void write_csv(const std::string& name,
                   const std::vector<std::string>& header,
                   const std::vector<std::vector<std::string>>& rows) {
        std::ofstream out(dir_ / name, std::ios::binary);
        if (!out) throw std::runtime_error("cannot write " + name);
        for (std::size_t i = 0; i < header.size(); ++i)
            out << (i ? "," : "") << header[i];
        out << "\n";
        for (const auto& row : rows) {
            for (std::size_t i = 0; i < row.size(); ++i)
                out << (i ? "," : "") << row[i];
            out << "\n";
        }
        summary_.artifacts.push_back(name);
    }

    void write_json(const std::string& name, const json& j) {
        std::ofstream out(dir_ / name, std::ios::binary);
        if (!out) throw std::runtime_error("cannot write " + name);
        out << j.dump(2) << "\n";
        summary_.artifacts.push_back(name);
    }

private:
    fs::path dir_;
    RunSummary& summary_;
};

Observable named_observable(const std::string& name, const ModelBundle& mb,
                            const RunConfig& cfg, std::uint64_t seed) {
    if (name == "x1") return first_coordinate();
    if (name == "pair") return pair_product();
    if (name == "radial")
        return radial_observable(
            model_start_config(mb, cfg, derive_seed(seed, "radial-ref"),
                               "radial-ref"));
    throw std::invalid_argument("unknown observable " + name);
}

// ---- commands ---------------------------------------------------------

void cmd_normalize(const RunConfig& cfg, ArtifactWriter& w, RunSummary& rs,
                   json& extra) {
    const ModelBundle mb = build_model(cfg);
    const NormalizeOptions opt = make_normalize_options(cfg, mb);
    const NormalizedSystem sys = normalize(mb.kernel, mb.f, opt);
    const auto& d = sys.diagnostics();
    std::vector<std::vector<std::string>> rows;
    for (std::size_t p = 0; p < d.probe_values.size(); ++p) {
        rows.push_back({std::to_string(p), fmt(d.probe_values[p]),
                        fmt(d.probe_se[p]),
                        fmt(std::abs(d.probe_values[p] - 1.0))});
    }
    w.write_csv("probe_table.csv", {"probe", "l_fbar_one", "std_error",
                                    "deviation"},
                rows);
    extra["lambda"] = sys.lambda();
    extra["sup_deviation"] = d.sup_deviation;
    extra["tolerance"] = d.tolerance;
    extra["h_min"] = d.h_min;
    extra["h_max"] = d.h_max;
    extra["rho_fit_slope"] = d.rho_fit.slope;
    extra["rho_fit_slope_se"] = d.rho_fit.slope_se;
    if (d.flatness) {
        extra["flatness_estimate"] = d.flatness->estimate;
        extra["flatness_stability"] = d.flatness->stability_ratio;
    }
    rs.verdicts["normalize_accepted"] = sys.accepted();
}

void cmd_decay(const RunConfig& cfg, ArtifactWriter& w, RunSummary& rs,
               json& extra) {
    ModelBundle mb = build_model(cfg);
    if (!mb.kernel.is_full_shift())
        throw std::invalid_argument("decay: full-shift models only");
    RunConfig deep = cfg;
    const std::size_t n_top = std::max<std::size_t>(cfg.n_max, 8);
    deep.depth = std::max(cfg.depth, 2 * n_top);  // depth budget for n steps
    const ModelBundle mbd = build_model(deep);
    NormalizeOptions nopt = make_normalize_options(deep, mbd);
    const NormalizedSystem sys = normalize(mbd.kernel, mbd.f, nopt);
    rs.verdicts["normalize_accepted"] = sys.accepted();

    const ModulusOfContinuity omega =
        mbd.f->name().starts_with("dyson")
            ? ModulusOfContinuity::log_modulus(std::max(cfg.eps - 1.0, 0.5))
            : ModulusOfContinuity::log_modulus(1.0);

    // coupling-cost series over log-spaced checkpoints in [2, n_max]
    std::vector<std::size_t> ns;
    for (double v = 2.0; v < static_cast<double>(n_top) - 0.5; v *= 1.4142)
        ns.push_back(static_cast<std::size_t>(v + 0.5));
    ns.push_back(n_top);
    std::sort(ns.begin(), ns.end());
    ns.erase(std::unique(ns.begin(), ns.end()), ns.end());

    RngStream rng = derive_stream(cfg.seed, "decay-anchors");
    const Config x = sample_config(mbd.kernel.full_shift_kernel().mu,
                                   deep.depth, rng);
    const Config y = sample_config(mbd.kernel.full_shift_kernel().mu,
                                   deep.depth, rng);
    EstimatorOptions eopt;
    eopt.samples = cfg.samples_k;
    eopt.seed = derive_seed(cfg.seed, "decay-cost");
    eopt.label = "decay";
    const auto costs =
        coupling::coupling_cost_series(sys, omega, x, y, ns, eopt);

    std::vector<std::vector<std::string>> rows;
    std::vector<std::pair<double, double>> cost_series;
    for (std::size_t q = 0; q < ns.size(); ++q) {
        rows.push_back({std::to_string(ns[q]), fmt(costs[q].value),
                        fmt(costs[q].std_error)});
        cost_series.emplace_back(static_cast<double>(ns[q]), costs[q].value);
    }
    w.write_csv("coupling_cost.csv", {"n", "cost", "std_error"}, rows);
    const coupling::DecayFit cost_fit =
        coupling::fit_polynomial_decay(cost_series);

    // correlation series along the normalized chain
    chains::PsiSampler psi(std::make_shared<NormalizedSystem>(sys), true);
    const Observable phi = mbd.kernel.finite_alphabet()
                               ? first_coordinate()
                               : pair_product();
    const std::size_t lag_max = std::min<std::size_t>(32, n_top);
    const limits::CorrelationSeries corr = limits::chain_correlations(
        psi, phi, lag_max, std::max<std::size_t>(cfg.chain_n / 4, 4096), 4,
        cfg.burn_in, model_start_config(mbd, deep, cfg.seed, "decay-start"),
        derive_seed(cfg.seed, "decay-corr"));
    rows.clear();
    std::vector<std::pair<double, double>> corr_series;
    for (std::size_t lag = 0; lag <= lag_max; ++lag) {
        rows.push_back({std::to_string(lag), fmt(corr.gamma[lag]),
                        fmt(corr.se[lag])});
        // points below the noise floor carry no slope information
        if (lag >= 2 && corr.gamma[lag] > 3.0 * corr.se[lag])
            corr_series.emplace_back(static_cast<double>(lag),
                                     corr.gamma[lag]);
    }
    w.write_csv("correlations.csv", {"n", "gamma", "std_error"}, rows);

    json fitj;
    fitj["cost_exponent"] = cost_fit.exponent;
    fitj["cost_constant"] = cost_fit.constant;
    fitj["cost_residual_rms"] = cost_fit.residual_rms;
    fitj["cost_points"] = ns.size() - cost_fit.dropped;
    bool corr_ok = false;
    if (corr_series.size() >= 5) {
        const coupling::DecayFit corr_fit =
            coupling::fit_polynomial_decay(corr_series);
        fitj["correlation_exponent"] = corr_fit.exponent;
        fitj["correlation_constant"] = corr_fit.constant;
        fitj["correlation_residual_rms"] = corr_fit.residual_rms;
        fitj["correlation_points"] = corr_series.size();
        corr_ok = corr_fit.exponent <= cfg.tol.decay_exponent;
    } else {
        // decay faster than the noise floor resolves: no slope to fit, and
        // nothing slower than the threshold either
        fitj["correlation_exponent"] = nullptr;
        fitj["correlation_points"] = corr_series.size();
        corr_ok = true;
    }
    w.write_json("decay_fit.json", fitj);
    extra["fit"] = fitj;
    rs.verdicts["cost_decay"] = cost_fit.exponent <= cfg.tol.decay_exponent;
    rs.verdicts["correlation_decay"] = corr_ok;
}

void cmd_fclt(const RunConfig& cfg, ArtifactWriter& w, RunSummary& rs,
              json& extra) {
    const ModelBundle mb = build_model(cfg);
    if (!mb.kernel.is_full_shift())
        throw std::invalid_argument("fclt: full-shift models only");
    NormalizeOptions nopt = make_normalize_options(cfg, mb);
    auto sys = std::make_shared<NormalizedSystem>(
        normalize(mb.kernel, mb.f, nopt));
    rs.verdicts["normalize_accepted"] = sys->accepted();
    chains::PsiSampler psi(sys, true);
    const Config start = model_start_config(mb, cfg, cfg.seed, "fclt-start");

    const Observable raw_phi = mb.kernel.finite_alphabet()
                                   ? first_coordinate()
                                   : first_coordinate();
    const std::size_t n_center =
        std::max<std::size_t>(50000, cfg.chain_n * 4);
    const limits::CenteredObservable centered = limits::center_observable(
        psi, raw_phi, n_center, start, derive_seed(cfg.seed, "center"));

    // correlation fit gates the Poisson series
    const std::size_t lag_max = std::max<std::size_t>(cfg.n_max + 1, 8);
    const limits::CorrelationSeries corr = limits::chain_correlations(
        psi, centered.phi, lag_max, std::max<std::size_t>(cfg.chain_n, 32768),
        4, cfg.burn_in, start, derive_seed(cfg.seed, "fclt-corr"));
    std::vector<std::pair<double, double>> corr_series;
    for (std::size_t lag = 2; lag <= lag_max; ++lag)
        if (corr.gamma[lag] > 3.0 * corr.se[lag])
            corr_series.emplace_back(static_cast<double>(lag),
                                     corr.gamma[lag]);
    std::optional<coupling::DecayFit> fit;
    if (corr_series.size() >= 5)
        fit = coupling::fit_polynomial_decay(corr_series);

    const limits::PoissonSolution ups = limits::solve_poisson(
        psi, centered.phi, cfg.n_max, 32, derive_seed(cfg.seed, "poisson"),
        fit);
    const std::size_t var_states =
        mb.kernel.finite_alphabet() ? 8192 : 2048;
    const limits::VarianceEstimate var = limits::variance(
        psi, ups, centered.phi, var_states, 4,
        std::max<std::size_t>(cfg.chain_n, 65536), start,
        derive_seed(cfg.seed, "variance"));
    extra["sigma2"] = var.sigma2;
    extra["sigma2_se"] = var.sigma2_se;
    extra["sigma2_gk"] = var.sigma2_gk;
    extra["sigma2_gk_se"] = var.sigma2_gk_se;
    extra["sigma2_alt_reading"] = var.sigma2_alt;
    extra["poisson_truncation"] = ups.truncation();
    extra["poisson_residual_bound"] = ups.residual_bound();
    extra["centering_mean"] = centered.mean_estimate;
    extra["centering_error_bound"] = centered.error_bound;
    rs.verdicts["variance_positive"] = !var.rejected;
    rs.verdicts["variance_routes_agree"] = var.routes_agree;
    if (var.rejected)
        throw std::invalid_argument(
            "fclt: sigma^2 <= 0; the observable is degenerate for this model");

    const std::vector<double> grid = {0.25, 0.5, 0.75, 1.0};
    const limits::PathMatrix paths = limits::simulate_fclt_paths(
        psi, centered.phi, std::sqrt(var.sigma2), cfg.chain_n, cfg.replicates,
        grid, cfg.burn_in, cfg.depth, derive_seed(cfg.seed, "paths"));
    limits::FcltReport rep = limits::fclt_test(paths, cfg.replicates);
    rep.sigma2 = var.sigma2;
    rep.sigma2_gk = var.sigma2_gk;
    rep.path_length = cfg.chain_n;

    std::vector<std::vector<std::string>> rows;
    for (std::size_t r = 0; r < cfg.replicates; ++r) {
        std::vector<std::string> row{std::to_string(r)};
        for (std::size_t t = 0; t < grid.size(); ++t)
            row.push_back(fmt(paths.at(r, t)));
        rows.push_back(std::move(row));
    }
    w.write_csv("fclt_endpoints.csv",
                {"replicate", "y_025", "y_050", "y_075", "y_100"}, rows);
    json repj;
    repj["sigma2"] = rep.sigma2;
    repj["sigma2_gk"] = rep.sigma2_gk;
    repj["ks_threshold"] = rep.ks_threshold;
    repj["ks"] = rep.ks;
    repj["t_checked"] = rep.t_checked;
    repj["variance_linearity"] = rep.variance_linearity;
    repj["increment_correlation"] = rep.increment_correlation;
    repj["increment_threshold"] = rep.increment_threshold;
    repj["replicates"] = rep.replicates;
    repj["path_length"] = rep.path_length;
    repj["accept"] = rep.accept;
    w.write_json("fclt_report.json", repj);
    extra["fclt"] = repj;
    rs.verdicts["fclt_accept"] = rep.accept;
}

void cmd_breiman(const RunConfig& cfg, ArtifactWriter& w, RunSummary& rs,
                 json& extra) {
    const ModelBundle mb = build_model(cfg);
    const Config start = model_start_config(mb, cfg, cfg.seed, "breiman-start");
    const std::vector<std::string> names =
        mb.kernel.is_full_shift() && cfg.depth >= 2
            ? std::vector<std::string>{"x1", "pair", "radial"}
            : std::vector<std::string>{"x1", "radial"};
    const std::size_t p_samples = 1000;

    std::vector<chains::BreimanResult> results;
    for (const auto& nm : names) {
        const Observable phi = named_observable(nm, mb, cfg, cfg.seed);
        results.push_back(chains::breiman_average(
            mb.kernel, phi, cfg.chain_n, p_samples, start,
            derive_seed(cfg.seed, "breiman", fnv1a(nm))));
    }
    std::vector<std::vector<std::string>> rows;
    const std::size_t stride = std::max<std::size_t>(1, cfg.chain_n / 512);
    for (std::size_t m = stride - 1; m < cfg.chain_n; m += stride) {
        std::vector<std::string> row{std::to_string(m + 1)};
        for (const auto& res : results)
            row.push_back(fmt(res.partial_averages[m]));
        rows.push_back(std::move(row));
    }
    std::vector<std::string> header{"m"};
    for (const auto& nm : names) header.push_back("A_" + nm);
    w.write_csv("breiman_convergence.csv", header, rows);

    bool all_ok = true;
    for (std::size_t q = 0; q < names.size(); ++q) {
        const double a_n = results[q].partial_averages.back();
        extra["final_average_" + names[q]] = a_n;
        const bool ok = std::abs(a_n) <= cfg.tol.breiman;
        rs.verdicts["breiman_" + names[q]] = ok;
        all_ok = all_ok && ok;
    }
    (void)all_ok;

    // variance-scaling diagnostic across seeds (cheap on finite alphabets)
    if (mb.kernel.finite_alphabet()) {
        const Observable phi = named_observable("x1", mb, cfg, cfg.seed);
        const std::vector<std::size_t> ns = {1000, 4000, 16000, 64000};
        const std::size_t n_seeds = 24;
        std::vector<std::vector<double>> a_vals(
            ns.size(), std::vector<double>(n_seeds, 0.0));
        par::fill_indexed(n_seeds, [&](std::size_t s) {
            const auto res = chains::breiman_average(
                mb.kernel, phi, ns.back(), p_samples, start,
                derive_seed(cfg.seed, "breiman-slope", s));
            for (std::size_t q = 0; q < ns.size(); ++q)
                a_vals[q][s] = res.partial_averages[ns[q] - 1];
        });
        std::vector<double> lx, ly;
        std::vector<std::vector<std::string>> vrows;
        for (std::size_t q = 0; q < ns.size(); ++q) {
            const double v = stats::sample_variance(a_vals[q]);
            lx.push_back(std::log(static_cast<double>(ns[q])));
            ly.push_back(std::log(v));
            vrows.push_back({std::to_string(ns[q]), fmt(v)});
        }
        w.write_csv("breiman_variance.csv", {"n", "variance"}, vrows);
        const auto lf = stats::fit_line(lx, ly);
        extra["variance_slope"] = lf.slope;
        rs.verdicts["variance_slope_band"] =
            lf.slope >= -1.3 && lf.slope <= -0.7;
    }

    // stationarity discrepancies along the normalized chain
    if (mb.kernel.is_full_shift()) {
        NormalizeOptions nopt = make_normalize_options(cfg, mb);
        auto sys = std::make_shared<NormalizedSystem>(
            normalize(mb.kernel, mb.f, nopt));
        chains::PsiSampler psi(sys, true);
        std::vector<Observable> phis;
        phis.push_back(one_observable());
        for (const auto& nm : names)
            phis.push_back(named_observable(nm, mb, cfg, cfg.seed));
        const bool finite = mb.kernel.finite_alphabet();
        const std::size_t n_stat =
            finite ? std::min<std::size_t>(cfg.chain_n, 8192)
                   : std::min<std::size_t>(cfg.chain_n, 512);
        const auto rep = chains::empirical_stationarity(
            psi, phis, n_stat, finite ? 0 : 128, start,
            derive_seed(cfg.seed, "stationarity"));
        std::vector<std::vector<std::string>> srows;
        for (const auto& e : rep.entries)
            srows.push_back({e.name, fmt(e.nu_P_phi), fmt(e.nu_phi),
                             fmt(e.discrepancy), fmt(e.tolerance)});
        w.write_csv("stationarity.csv",
                    {"phi", "nu_P_phi", "nu_phi", "discrepancy", "tolerance"},
                    srows);
        rs.verdicts["stationarity"] = rep.accept;
    }
}

void cmd_support(const RunConfig& cfg, ArtifactWriter& w, RunSummary& rs,
                 json& extra) {
    const ModelBundle mb = build_model(cfg);
    const chains::Metric product_metric = [](const Config& a, const Config& b) {
        return config_distance(a, b);
    };

    if (cfg.model == "weighted-shift") {
        const auto& sys = *mb.shift_sys;
        // summability of d_n^-1
        const auto sum_rep = systems::summability_check(sys, 1.0, 20);
        extra["summability_tail_ratio"] = sum_rep.tail_ratio;
        extra["summability_last_partial"] = sum_rep.partial_sums.back();
        rs.verdicts["summability"] = sum_rep.summable_evidence;

        // transitivity witness for x = e_1, ball (0, 1/2)
        std::vector<double> e1(sys.dim(), 0.0), zero(sys.dim(), 0.0);
        e1[0] = 1.0;
        const auto witness =
            systems::strong_transitivity_witness(sys, e1, zero, 0.5, sys.dim());
        json wj;
        wj["found"] = witness.found;
        wj["n"] = witness.n;
        wj["tail_distance"] = witness.tail_distance;
        wj["free_block"] = witness.free_block;
        w.write_json("transitivity_witness.json", wj);
        rs.verdicts["transitivity_witness"] = witness.found;
        extra["witness_n"] = witness.n;

        // support balls: centers with <= 3 nonzero coordinates, the product
        // metric resolves them at the truncation depth
        std::vector<chains::BallSpec> balls;
        RngStream brng = derive_stream(cfg.seed, "support-balls");
        for (std::size_t b = 0; b < 20; ++b) {
            Config c;
            c.alphabet = mb.alphabet;
            c.coords.assign(sys.dim(), 0.0);
            const std::size_t nz = 1 + brng.below(3);
            for (std::size_t i = 0; i < nz; ++i)
                c.coords[brng.below(3)] = brng.uniform(-1.0, 1.0);
            balls.push_back({std::move(c), 0.5});
        }
        std::size_t seeds_ok = 0;
        std::vector<std::vector<std::string>> rows;
        for (std::size_t s = 0; s < 5; ++s) {
            chains::ChainState st = chains::make_state(
                model_start_config(mb, cfg, derive_seed(cfg.seed, "sup", s),
                                   "support-start"),
                derive_seed(cfg.seed, "support-chain", s), "support");
            const auto table = chains::support_probe(
                [&](chains::ChainState& cs) { chains::step_phi(mb.kernel, cs); },
                st, product_metric, balls, cfg.chain_n);
            if (table.all_hit) ++seeds_ok;
            for (std::size_t b = 0; b < balls.size(); ++b)
                rows.push_back({std::to_string(s), std::to_string(b),
                                std::to_string(table.hits[b])});
        }
        w.write_csv("support_hits.csv", {"seed", "ball", "hits"}, rows);
        extra["seeds_all_hit"] = seeds_ok;
        rs.verdicts["support_all_hit"] = seeds_ok == 5;
        return;
    }

    if (cfg.model == "ifs") {
        const auto& sys = *mb.ifs_sys;
        // chaos-game empirical measure against the uniform attractor law
        chains::ChainState st = chains::make_state(
            model_start_config(mb, cfg, cfg.seed, "ifs-start"),
            derive_seed(cfg.seed, "ifs-chain"), "ifs");
        std::vector<double> values;
        values.reserve(cfg.chain_n);
        for (std::size_t i = 0; i < cfg.chain_n; ++i) {
            chains::step_phi(mb.kernel, st);
            values.push_back(st.current.coords[0]);
        }
        std::sort(values.begin(), values.end());
        double ks = 0.0;
        const double n = static_cast<double>(values.size());
        for (std::size_t i = 0; i < values.size(); ++i) {
            const double f = std::min(1.0, std::max(0.0, values[i]));
            ks = std::max(ks, std::abs(f - static_cast<double>(i) / n));
            ks = std::max(ks, std::abs(static_cast<double>(i + 1) / n - f));
        }
        extra["uniform_ks"] = ks;
        rs.verdicts["stationary_uniform"] = ks <= cfg.tol.support_ks;

        const std::vector<double> x0 = {0.0};
        const std::vector<double> target = {0.8125};
        const auto witness = systems::ifs_irreducibility_witness(
            sys, x0, target, 0.01, 8);
        json wj;
        wj["found"] = witness.found;
        wj["nearest_distance"] = witness.nearest_distance;
        wj["multi_index"] = witness.multi_index;
        w.write_json("irreducibility_witness.json", wj);
        extra["witness_length"] = witness.multi_index.size();
        rs.verdicts["irreducibility_witness"] =
            witness.found && witness.multi_index.size() <= 8;

        // attractor invariance diagnostic
        systems::PointCloud seeds;
        seeds.dim = 1;
        seeds.flat = {0.0, 1.0, 0.3};
        const auto cloud = systems::attractor_iterate(
            sys, seeds, 12, derive_seed(cfg.seed, "attractor"));
        systems::PointCloud image;
        image.dim = 1;
        std::vector<double> y(1);
        for (std::size_t i = 0; i < cloud.size(); ++i)
            for (std::size_t m = 0; m < sys.map_count(); ++m) {
                sys.apply_map(m, cloud.point(i), y);
                image.flat.push_back(y[0]);
            }
        const double haus = systems::hausdorff_distance(cloud, image);
        extra["attractor_invariance"] = haus;
        rs.verdicts["attractor_invariant"] =
            haus <= 2.0 * std::pow(sys.contraction_factor(), 12.0) + 1e-3;
        return;
    }

    // full-shift models: cylinder balls (finite) or random-center balls
    std::vector<chains::BallSpec> balls;
    if (mb.kernel.finite_alphabet()) {
        const auto& alph = *mb.alphabet;
        const std::size_t s = alph.finite_size();
        const std::size_t cyl = s * s * s;
        for (std::size_t c = 0; c < cyl; ++c) {
            Config center;
            center.alphabet = mb.alphabet;
            center.coords.assign(cfg.depth, alph.finite_values()[0]);
            std::size_t idx = c;
            for (std::size_t i = 0; i < 3; ++i) {
                center.coords[i] = alph.finite_values()[idx % s];
                idx /= s;
            }
            balls.push_back({std::move(center), 0.125});
        }
    } else {
        RngStream brng = derive_stream(cfg.seed, "support-balls");
        for (std::size_t b = 0; b < 12; ++b) {
            Config center = model_start_config(
                mb, cfg, derive_seed(cfg.seed, "ball-center", b), "ball");
            balls.push_back({std::move(center), 0.6});
        }
    }
    chains::ChainState st = chains::make_state(
        model_start_config(mb, cfg, cfg.seed, "support-start"),
        derive_seed(cfg.seed, "support-chain"), "support");
    const auto table = chains::support_probe(
        [&](chains::ChainState& cs) { chains::step_phi(mb.kernel, cs); }, st,
        product_metric, balls, cfg.chain_n);
    std::vector<std::vector<std::string>> rows;
    for (std::size_t b = 0; b < balls.size(); ++b)
        rows.push_back({std::to_string(b), std::to_string(table.hits[b])});
    w.write_csv("support_hits.csv", {"ball", "hits"}, rows);
    extra["balls"] = balls.size();
    rs.verdicts["support_all_hit"] = table.all_hit;
}

struct GridCase {
    std::size_t id;
    std::size_t system;
    std::string quantity;
    std::size_t variant;
};

struct GridSystem {
    std::size_t s;
    std::size_t k;
    std::string kind;  // linear | pair
    double beta;
    std::vector<double> weights;  // empty = uniform
};

void cmd_oracle_check(const RunConfig& cfg, ArtifactWriter& w, RunSummary& rs,
                      json& extra) {
    const std::vector<GridSystem> grid_systems = {
        {2, 1, "linear", 0.8, {}},
        {2, 2, "pair", 1.0, {}},
        {3, 1, "linear", 0.7, {0.5, 0.3, 0.2}},
        {2, 2, "pair", 0.5, {0.3, 0.7}},
        {3, 2, "pair", 0.6, {}},
    };
    // 40 cases per system: 12 iterate values, 8 spectral radius, 8
    // eigenfunction ratios, 4 variances, 8 correlations
    std::vector<GridCase> cases;
    std::size_t id = 0;
    for (std::size_t s = 0; s < grid_systems.size(); ++s) {
        for (std::size_t v = 0; v < 12; ++v) cases.push_back({id++, s, "Ln1", v});
        for (std::size_t v = 0; v < 8; ++v) cases.push_back({id++, s, "rho", v});
        for (std::size_t v = 0; v < 8; ++v)
            cases.push_back({id++, s, "hratio", v});
        for (std::size_t v = 0; v < 4; ++v)
            cases.push_back({id++, s, "sigma2", v});
        for (std::size_t v = 0; v < 8; ++v)
            cases.push_back({id++, s, "corr", v});
    }

    std::vector<std::vector<std::string>> rows(cases.size());
    std::size_t within = 0;
    const std::size_t depth = 16;

    for (std::size_t sy = 0; sy < grid_systems.size(); ++sy) {
        const auto& gs = grid_systems[sy];
        RunConfig mcfg = cfg;
        mcfg.model = "full-shift-finite";
        mcfg.alphabet_size = gs.s;
        mcfg.weights = gs.weights;
        mcfg.potential.kind = gs.kind;
        mcfg.potential.beta = gs.beta;
        mcfg.depth = depth;
        const ModelBundle mb = build_model(mcfg);
        const auto& fr = dynamic_cast<const FiniteRangePotential&>(*mb.f);

        // oracle ground truth
        const auto space = oracle::make_cylinder_space(
            mb.kernel.full_shift_kernel().mu, std::max<std::size_t>(fr.range(), 1));
        const auto matrix = oracle::build_matrix(space, fr);
        const auto pd = oracle::perron(matrix);
        const auto P = oracle::exact_normalize(matrix, pd);
        const auto pi = oracle::stationary_from_perron(pd);

        // shared MC objects for the heavier quantities
        NormalizeOptions nopt = make_normalize_options(mcfg, mb);
        nopt.seed = derive_seed(cfg.seed, "grid-norm", sy);
        auto sys = std::make_shared<NormalizedSystem>(
            normalize(mb.kernel, mb.f, nopt));
        chains::PsiSampler psi(sys, true);

        std::vector<double> phi_states(space.state_count());
        for (std::size_t st = 0; st < space.state_count(); ++st)
            phi_states[st] = space.word(st)[0];
        double phi_mean = 0.0;
        for (std::size_t st = 0; st < space.state_count(); ++st)
            phi_mean += pi[st] * phi_states[st];
        std::vector<double> phi_centered_states(space.state_count());
        for (std::size_t st = 0; st < space.state_count(); ++st)
            phi_centered_states[st] = phi_states[st] - phi_mean;

        for (const auto& gc : cases) {
            if (gc.system != sy) continue;
            double mc = 0.0, se = 1.0, truth = 0.0;
            const std::uint64_t cseed = derive_seed(cfg.seed, "grid", gc.id);
            RngStream prng = derive_stream(cseed, "probe");
            const Config probe =
                sample_config(mb.kernel.full_shift_kernel().mu, depth, prng);

            if (gc.quantity == "Ln1") {
                const std::size_t n = 2 + 2 * (gc.variant % 4);
                EstimatorOptions eopt;
                eopt.samples = 20000;
                eopt.seed = cseed;
                eopt.force_mc = true;
                const auto est = apply_transfer_n(mb.kernel, *mb.f,
                                                  one_observable(), probe, n,
                                                  eopt);
                mc = est.value;
                se = est.std_error;
                // oracle: L^n 1 (probe) via matrix powers on the cylinder
                std::vector<double> v(space.state_count(), 1.0);
                for (std::size_t i = 0; i < n; ++i) v = matrix.apply(v);
                truth = v[space.config_state(probe)];
            } else if (gc.quantity == "rho") {
                EstimatorOptions eopt;
                eopt.samples = 30000;
                eopt.seed = cseed;
                eopt.force_mc = true;
                const auto est =
                    spectral_radius(mb.kernel, *mb.f, probe, 10, eopt);
                mc = std::log(est.rho);
                se = std::max(est.log_rho_se, 1e-6);
                truth = std::log(pd.lambda);
            } else if (gc.quantity == "hratio") {
                RngStream r2 = derive_stream(cseed, "pair");
                const Config x =
                    sample_config(mb.kernel.full_shift_kernel().mu, depth, r2);
                const Config y =
                    sample_config(mb.kernel.full_shift_kernel().mu, depth, r2);
                // replicated independent eigenfunctions give an honest se
                const std::size_t reps = 12;
                std::vector<double> ratios(reps);
                par::fill_indexed(reps, [&](std::size_t r) {
                    CesaroEigenfunction h(mb.kernel, mb.f, pd.lambda, 16, 512,
                                          derive_seed(cseed, "h", r),
                                          SamplerKind::kPlain);
                    ratios[r] = h.eval(x) / h.eval(y);
                });
                double mean;
                par::mean_and_se(ratios, mean, se);
                mc = mean;
                truth = pd.h[space.config_state(x)] /
                        pd.h[space.config_state(y)];
            } else if (gc.quantity == "sigma2") {
                const Observable phi = shifted(first_coordinate(), phi_mean);
                const auto ups = limits::solve_poisson(psi, phi, 10, 32,
                                                       derive_seed(cseed, "u"));
                const auto var = limits::variance(
                    psi, ups, phi, 4096, 2, 65536,
                    model_start_config(mb, mcfg, cseed, "var-start"),
                    derive_seed(cseed, "v"));
                mc = var.sigma2;
                se = std::max(var.sigma2_se, 1e-6);
                truth = oracle::exact_sigma2(P, phi_centered_states, pi);
            } else {  // corr
                const std::size_t lag = 1 + (gc.variant % 3);
                const Observable phi = shifted(first_coordinate(), phi_mean);
                const auto corr = limits::chain_correlations(
                    psi, phi, lag, 16384, 4, 512,
                    model_start_config(mb, mcfg, cseed, "corr-start"), cseed);
                mc = corr.gamma[lag];
                se = std::max(corr.se[lag], 1e-9);
                const auto truth_series =
                    oracle::exact_correlations(P, phi_centered_states, pi, lag);
                truth = truth_series[lag];
            }
            const double z = (mc - truth) / se;
            if (std::abs(z) <= 3.0) ++within;
            rows[gc.id] = {std::to_string(gc.id), std::to_string(gc.system),
                           gc.quantity, fmt(mc), fmt(se), fmt(truth), fmt(z)};
        }
    }
    w.write_csv("oracle_grid.csv",
                {"case", "system", "quantity", "mc", "std_error", "oracle",
                 "z"},
                rows);
    const double rate =
        static_cast<double>(within) / static_cast<double>(cases.size());
    extra["cases"] = cases.size();
    extra["within_3se"] = within;
    extra["rate"] = rate;
    rs.verdicts["oracle_grid"] = rate >= 0.99;
}

}  // namespace

RunConfig parse_config_text(const std::string& text) {
    json j;
    try {
        j = json::parse(text);
    } catch (const json::exception& e) {
        throw std::invalid_argument(std::string("config: JSON parse error: ") +
                                    e.what());
    }
    return parse_config_json(j);
}

RunConfig load_config(const std::string& path) {
    std::ifstream in(path);
    if (!in)
        throw std::invalid_argument("config: cannot open file " + path);
    std::stringstream ss;
    ss << in.rdbuf();
    return parse_config_text(ss.str());
}

RunSummary run_command(const std::string& command, const RunConfig& cfg) {
    RunSummary rs;
    rs.command = command;
    rs.seed = cfg.seed;
    rs.config_hash = config_hash(cfg);
    const auto t0 = std::chrono::steady_clock::now();

    ArtifactWriter writer(cfg.out_dir, rs);
    json extra;
    if (command == "normalize") {
        cmd_normalize(cfg, writer, rs, extra);
    } else if (command == "decay") {
        cmd_decay(cfg, writer, rs, extra);
    } else if (command == "fclt") {
        cmd_fclt(cfg, writer, rs, extra);
    } else if (command == "breiman") {
        cmd_breiman(cfg, writer, rs, extra);
    } else if (command == "support") {
        cmd_support(cfg, writer, rs, extra);
    } else if (command == "oracle-check") {
        cmd_oracle_check(cfg, writer, rs, extra);
    } else {
        throw std::invalid_argument("unknown command '" + command + "'");
    }

    const auto t1 = std::chrono::steady_clock::now();
    rs.wall_ms =
        std::chrono::duration<double, std::milli>(t1 - t0).count();
    bool all_ok = true;
    for (const auto& [k, v] : rs.verdicts) all_ok = all_ok && v;
    rs.exit_code = all_ok ? kExitOk : kExitVerdictFail;

    json summary;
    summary["schema_version"] = 1;
    summary["command"] = rs.command;
    summary["config_hash"] = rs.config_hash;
    summary["seed"] = rs.seed;
    summary["wall_time_ms"] = rs.wall_ms;
    summary["verdicts"] = rs.verdicts;
    summary["results"] = extra;
    summary["config"] = config_to_json(cfg);
    json arts = json::array();
    for (const auto& a : rs.artifacts) arts.push_back(a);
    arts.push_back("summary.json");
    summary["artifacts"] = arts;
    writer.write_json("summary.json", summary);
    return rs;
}

int cli_main(int argc, const char* const* argv) {
    std::vector<std::string> args(argv + 1, argv + argc);
    if (args.empty()) {
        std::fprintf(stderr,
                     "usage: tklab <normalize|decay|fclt|breiman|support|"
                     "oracle-check> --config <path> [--seed N] [--out DIR]\n");
        return kExitUsage;
    }
    try {
        const std::string command = args[0];
        std::string config_path, out_override;
        std::optional<std::uint64_t> seed_override;
        for (std::size_t i = 1; i < args.size(); ++i) {
            if (args[i] == "--config" && i + 1 < args.size()) {
                config_path = args[++i];
            } else if (args[i] == "--seed" && i + 1 < args.size()) {
                seed_override = std::stoull(args[++i]);
            } else if (args[i] == "--out" && i + 1 < args.size()) {
                out_override = args[++i];
            } else {
                throw std::invalid_argument("unknown argument '" + args[i] +
                                            "'");
            }
        }
        if (config_path.empty())
            throw std::invalid_argument("--config <path> is required");
        RunConfig cfg = load_config(config_path);
        if (seed_override) cfg.seed = *seed_override;
        if (const char* env = std::getenv("TOOL_SEED"))
            cfg.seed = std::stoull(env);
        if (!out_override.empty()) cfg.out_dir = out_override;
        const RunSummary rs = run_command(command, cfg);
        std::printf("%s: hash=%s seed=%llu wall=%.0fms\n", rs.command.c_str(),
                    rs.config_hash.c_str(),
                    static_cast<unsigned long long>(rs.seed), rs.wall_ms);
        for (const auto& [k, v] : rs.verdicts)
            std::printf("  %-28s %s\n", k.c_str(), v ? "pass" : "FAIL");
        return rs.exit_code;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return kExitUsage;
    }
}

}  // namespace tklab::cli
