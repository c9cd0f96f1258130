#include "tklab/systems.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <limits>
#include <stdexcept>

namespace tklab::systems {

WeightedShiftSystem::WeightedShiftSystem(std::vector<double> alpha, double c_lo,
                                         double c_hi, double p,
                                         AprioriMeasure apriori)
    : alpha_(std::move(alpha)),
      c_lo_(c_lo),
      c_hi_(c_hi),
      p_(p),
      apriori_(std::move(apriori)) {
    if (alpha_.empty())
        throw std::invalid_argument("WeightedShiftSystem: empty weights");
    if (!(0.0 < c_lo_ && c_lo_ < c_hi_))
        throw std::invalid_argument("WeightedShiftSystem: need 0 < c < c'");
    for (double a : alpha_) {
        if (!(a > c_lo_ && a < c_hi_))
            throw std::invalid_argument(
                "WeightedShiftSystem: every alpha_n must lie in (c, c')");
    }
    if (p_ < 1.0) throw std::invalid_argument("WeightedShiftSystem: p >= 1");
    if (apriori_.alphabet()->kind() != AlphabetKind::kRealLine &&
        apriori_.alphabet()->kind() != AlphabetKind::kHalfLine)
        throw std::invalid_argument(
            "WeightedShiftSystem: a priori measure must live on the line");
}

double WeightedShiftSystem::beta(std::size_t k, std::size_t n) const {
    if (k == 0 || n == 0 || k + n - 1 > dim())
        throw std::invalid_argument("beta: need 1 <= k, k+n-1 <= dim");
    double prod = 1.0;
    for (std::size_t i = k; i <= k + n - 1; ++i) prod *= alpha_[i - 1];
    return prod;
}

double WeightedShiftSystem::d_n(std::size_t n) const {
    if (n == 0 || n > dim())
        throw std::invalid_argument("d_n: need 1 <= n <= dim");
    double best = std::numeric_limits<double>::infinity();
    for (std::size_t k = 1; k + n - 1 <= dim(); ++k)
        best = std::min(best, beta(k, n));
    return best;
}

std::vector<double> weighted_shift_apply(const WeightedShiftSystem& sys,
                                         std::span<const double> x) {
    if (x.size() != sys.dim())
        throw std::invalid_argument("weighted_shift_apply: wrong length");
    std::vector<double> out(sys.dim(), 0.0);
    for (std::size_t i = 0; i + 1 < sys.dim(); ++i)
        out[i] = sys.alpha()[i] * x[i + 1];
    return out;
}

std::vector<double> s_map(const WeightedShiftSystem& sys,
                          std::span<const double> x) {
    if (x.size() != sys.dim())
        throw std::invalid_argument("s_map: wrong length");
    std::vector<double> out(sys.dim());
    for (std::size_t i = 0; i < sys.dim(); ++i) out[i] = x[i] / sys.alpha()[i];
    return out;
}

double lp_norm(double p, std::span<const double> x) {
    double s = 0.0;
    for (double v : x) s += std::pow(std::abs(v), p);
    return std::pow(s, 1.0 / p);
}

SummabilityReport summability_check(const WeightedShiftSystem& sys,
                                    double alpha_exponent, std::size_t N) {
    if (N < 10) throw std::invalid_argument("summability_check: N >= 10");
    N = std::min(N, sys.dim());
    SummabilityReport rep;
    double sum = 0.0, prev_term = 0.0, last_ratio = 0.0;
    for (std::size_t n = 1; n <= N; ++n) {
        const double term = std::pow(sys.d_n(n), -alpha_exponent);
        sum += term;
        rep.partial_sums.push_back(sum);
        if (prev_term > 0.0) last_ratio = term / prev_term;
        prev_term = term;
    }
    rep.tail_ratio = last_ratio;
    rep.summable_evidence = last_ratio < 1.0;
    return rep;
}

TransitivityWitness strong_transitivity_witness(const WeightedShiftSystem& sys,
                                                std::span<const double> x,
                                                std::span<const double> center,
                                                double radius,
                                                std::size_t n_max) {
    if (x.size() != sys.dim() || center.size() != sys.dim())
        throw std::invalid_argument("strong_transitivity_witness: lengths");
    if (radius <= 0.0)
        throw std::invalid_argument("strong_transitivity_witness: rho > 0");
    bool nonzero = std::any_of(x.begin(), x.end(),
                               [](double v) { return v != 0.0; });
    if (!nonzero)
        throw std::invalid_argument("strong_transitivity_witness: x != 0");

    TransitivityWitness w;
    double best = std::numeric_limits<double>::infinity();
    for (std::size_t n = 1; n <= std::min(n_max, sys.dim()); ++n) {
        // preimage = (center_1..center_n, x_1/beta_1^n, ...): only the tail
        // costs distance, the free block matches the target exactly
        double s = 0.0;
        for (std::size_t k = 1; k + n <= sys.dim(); ++k) {
            const double tail_coord = x[k - 1] / sys.beta(k, n);
            s += std::pow(std::abs(tail_coord - center[n + k - 1]), sys.p());
        }
        const double dist = std::pow(s, 1.0 / sys.p());
        best = std::min(best, dist);
        if (dist <= radius) {
            w.found = true;
            w.n = n;
            w.free_block.assign(center.begin(),
                                center.begin() + static_cast<std::ptrdiff_t>(n));
            w.tail_distance = dist;
            return w;
        }
    }
    w.tail_distance = best;
    return w;
}

IfsSystem::IfsSystem(int dim, std::vector<Map> maps, ProbFn probabilities,
                     double contraction_factor)
    : dim_(dim),
      maps_(std::move(maps)),
      probs_(std::move(probabilities)),
      contraction_(contraction_factor) {
    if (dim_ < 1) throw std::invalid_argument("IfsSystem: dim >= 1");
    if (maps_.empty()) throw std::invalid_argument("IfsSystem: no maps");
}

std::shared_ptr<const IfsSystem> IfsSystem::dyadic_interval() {
    std::vector<Map> maps;
    maps.push_back([](std::span<const double> x, std::span<double> out) {
        out[0] = 0.5 * x[0];
    });
    maps.push_back([](std::span<const double> x, std::span<double> out) {
        out[0] = 0.5 * x[0] + 0.5;
    });
    auto probs = [](std::span<const double>, std::span<double> out) {
        out[0] = 0.5;
        out[1] = 0.5;
    };
    return std::make_shared<const IfsSystem>(1, std::move(maps), probs, 0.5);
}

void IfsSystem::apply_map(std::size_t i, std::span<const double> x,
                          std::span<double> out) const {
    maps_[i](x, out);
}

void IfsSystem::probabilities(std::span<const double> x,
                              std::span<double> out) const {
    probs_(x, out);
}

void IfsSystem::check_probabilities(std::span<const double> x) const {
    std::vector<double> p(map_count());
    probs_(x, p);
    double s = 0.0;
    for (double v : p) {
        if (v <= 0.0)
            throw std::invalid_argument("IfsSystem: probabilities must be > 0");
        s += v;
    }
    if (std::abs(s - 1.0) > 1e-12)
        throw std::invalid_argument("IfsSystem: probabilities must sum to 1");
}

std::size_t IfsSystem::sample_branch(std::span<const double> x,
                                     RngStream& rng) const {
    std::vector<double> p(map_count());
    probs_(x, p);
    const double u = rng.uniform();
    double acc = 0.0;
    for (std::size_t i = 0; i < p.size(); ++i) {
        acc += p[i];
        if (u < acc) return i;
    }
    return p.size() - 1;
}

double ifs_transfer(const IfsSystem& sys,
                    const std::function<double(std::span<const double>)>& phi,
                    std::span<const double> x) {
    std::vector<double> p(sys.map_count());
    sys.probabilities(x, p);
    std::vector<double> y(static_cast<std::size_t>(sys.dim()));
    double s = 0.0;
    for (std::size_t i = 0; i < sys.map_count(); ++i) {
        sys.apply_map(i, x, y);
        s += p[i] * phi(y);
    }
    return s;
}

namespace {

double ifs_transfer_n_rec(const IfsSystem& sys,
                          const std::function<double(std::span<const double>)>& phi,
                          std::span<const double> x, std::size_t n) {
    if (n == 0) return phi(x);
    std::vector<double> p(sys.map_count());
    sys.probabilities(x, p);
    std::vector<double> y(static_cast<std::size_t>(sys.dim()));
    double s = 0.0;
    for (std::size_t i = 0; i < sys.map_count(); ++i) {
        sys.apply_map(i, x, y);
        s += p[i] * ifs_transfer_n_rec(sys, phi, y, n - 1);
    }
    return s;
}

}  // namespace

double ifs_transfer_n(const IfsSystem& sys,
                      const std::function<double(std::span<const double>)>& phi,
                      std::span<const double> x, std::size_t n) {
    double leaves = std::pow(static_cast<double>(sys.map_count()),
                             static_cast<double>(n));
    if (leaves > static_cast<double>(1u << 20))
        throw std::invalid_argument("ifs_transfer_n: m^n above enumeration cap");
    return ifs_transfer_n_rec(sys, phi, x, n);
}

PointCloud attractor_iterate(const IfsSystem& sys, const PointCloud& seeds,
                             std::size_t n, std::uint64_t seed) {
    if (n == 0) throw std::invalid_argument("attractor_iterate: n >= 1");
    if (seeds.size() == 0)
        throw std::invalid_argument("attractor_iterate: empty seed cloud");
    const auto dim = static_cast<std::size_t>(sys.dim());
    PointCloud cloud = seeds;
    std::vector<double> y(dim);
    for (std::size_t it = 0; it < n; ++it) {
        PointCloud next;
        next.dim = sys.dim();
        next.flat.reserve(cloud.flat.size() * sys.map_count());
        for (std::size_t i = 0; i < cloud.size(); ++i) {
            for (std::size_t m = 0; m < sys.map_count(); ++m) {
                sys.apply_map(m, cloud.point(i), y);
                next.flat.insert(next.flat.end(), y.begin(), y.end());
            }
        }
        if (next.size() > kCloudCap) {
            // uniform subsample without replacement, deterministic per seed
            RngStream rng = derive_stream(seed, "attractor-subsample", it);
            PointCloud kept;
            kept.dim = next.dim;
            kept.flat.reserve(kCloudCap * dim);
            const std::size_t total = next.size();
            std::size_t need = kCloudCap;
            for (std::size_t i = 0; i < total && need > 0; ++i) {
                const std::uint64_t remaining = total - i;
                if (rng.below(remaining) < need) {
                    auto p = next.point(i);
                    kept.flat.insert(kept.flat.end(), p.begin(), p.end());
                    --need;
                }
            }
            next = std::move(kept);
        }
        cloud = std::move(next);
    }
    return cloud;
}

namespace {

double point_dist(std::span<const double> a, std::span<const double> b) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        const double d = a[i] - b[i];
        s += d * d;
    }
    return std::sqrt(s);
}

}  // namespace

double hausdorff_distance(const PointCloud& a, const PointCloud& b,
                          std::size_t cap) {
    const std::size_t stride_a = std::max<std::size_t>(1, a.size() / cap);
    const std::size_t stride_b = std::max<std::size_t>(1, b.size() / cap);
    double h = 0.0;
    for (int dir = 0; dir < 2; ++dir) {
        const PointCloud& from = dir == 0 ? a : b;
        const PointCloud& to = dir == 0 ? b : a;
        const std::size_t sf = dir == 0 ? stride_a : stride_b;
        const std::size_t st = dir == 0 ? stride_b : stride_a;
        for (std::size_t i = 0; i < from.size(); i += sf) {
            double best = std::numeric_limits<double>::infinity();
            for (std::size_t j = 0; j < to.size(); j += st)
                best = std::min(best, point_dist(from.point(i), to.point(j)));
            h = std::max(h, best);
        }
    }
    return h;
}

IrreducibilityWitness ifs_irreducibility_witness(
    const IfsSystem& sys, std::span<const double> x,
    std::span<const double> center, double radius, std::size_t k_max,
    std::size_t expansion_cap) {
    IrreducibilityWitness w;
    w.nearest_distance = point_dist(x, center);
    if (w.nearest_distance <= radius) {
        w.found = true;
        return w;  // empty multi-index
    }
    struct Node {
        std::vector<double> point;
        std::vector<std::size_t> index;
    };
    std::deque<Node> frontier;
    frontier.push_back({std::vector<double>(x.begin(), x.end()), {}});
    std::vector<double> y(static_cast<std::size_t>(sys.dim()));
    std::size_t expanded = 0;
    while (!frontier.empty()) {
        Node node = std::move(frontier.front());
        frontier.pop_front();
        if (node.index.size() >= k_max) continue;
        for (std::size_t m = 0; m < sys.map_count(); ++m) {
            sys.apply_map(m, node.point, y);
            const double d = point_dist(y, center);
            w.nearest_distance = std::min(w.nearest_distance, d);
            std::vector<std::size_t> idx;
            idx.reserve(node.index.size() + 1);
            // T_J(x) = T_{j_1}(T_{j_2}(...)); the new map is outermost
            idx.push_back(m);
            idx.insert(idx.end(), node.index.begin(), node.index.end());
            if (d <= radius) {
                w.found = true;
                w.multi_index = std::move(idx);
                return w;
            }
            if (++expanded > expansion_cap)
                return w;
            frontier.push_back({std::vector<double>(y.begin(), y.end()),
                                std::move(idx)});
        }
    }
    return w;
}

}  // namespace tklab::systems
