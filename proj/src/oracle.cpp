#include "tklab/oracle.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace tklab::oracle {

std::size_t CylinderSpace::state_count() const {
    std::size_t n = 1;
    for (std::size_t i = 0; i < range; ++i) n *= alphabet->finite_size();
    return n;
}

std::vector<double> CylinderSpace::word(std::size_t idx) const {
    const std::size_t s = alphabet->finite_size();
    std::vector<double> w(range);
    for (std::size_t i = 0; i < range; ++i) {
        w[i] = alphabet->finite_values()[idx % s];
        idx /= s;
    }
    return w;
}

std::size_t CylinderSpace::prepend_state(std::size_t idx,
                                         std::size_t symbol) const {
    const std::size_t s = alphabet->finite_size();
    // drop the oldest coordinate, shift, put the new symbol in front
    std::size_t mult = 1;
    for (std::size_t i = 0; i + 1 < range; ++i) mult *= s;
    return symbol + (idx % mult) * s;
}

Config CylinderSpace::state_config(std::size_t idx, std::size_t depth) const {
    if (depth < range) throw std::invalid_argument("state_config: depth < range");
    const auto w = word(idx);
    Config x;
    x.alphabet = alphabet;
    x.coords.resize(depth);
    for (std::size_t i = 0; i < depth; ++i) x.coords[i] = w[i % range];
    return x;
}

std::size_t CylinderSpace::config_state(const Config& x) const {
    const std::size_t s = alphabet->finite_size();
    std::size_t idx = 0, mult = 1;
    for (std::size_t i = 0; i < range; ++i) {
        idx += alphabet->finite_index(x.point(i)[0]) * mult;
        mult *= s;
    }
    return idx;
}

CylinderSpace make_cylinder_space(const AprioriMeasure& mu, std::size_t range) {
    if (mu.alphabet()->kind() != AlphabetKind::kFinite)
        throw std::invalid_argument("make_cylinder_space: finite alphabet only");
    CylinderSpace sp;
    sp.alphabet = mu.alphabet();
    sp.range = range;
    sp.weights = mu.weights();
    if (sp.state_count() > kStateCap)
        throw std::invalid_argument("make_cylinder_space: s^k exceeds cap 4096");
    return sp;
}

std::vector<double> TransferMatrix::apply(const std::vector<double>& v) const {
    std::vector<double> out(n, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
        double s = 0.0;
        for (std::size_t j = 0; j < n; ++j) s += at(i, j) * v[j];
        out[i] = s;
    }
    return out;
}

std::vector<double> TransferMatrix::apply_transposed(
    const std::vector<double>& v) const {
    std::vector<double> out(n, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
        const double vi = v[i];
        for (std::size_t j = 0; j < n; ++j) out[j] += at(i, j) * vi;
    }
    return out;
}

TransferMatrix build_matrix(const CylinderSpace& space,
                            const FiniteRangePotential& f) {
    if (f.range() > space.range)
        throw std::invalid_argument("build_matrix: potential range exceeds k");
    const std::size_t n = space.state_count();
    const std::size_t s = space.alphabet->finite_size();
    TransferMatrix m;
    m.n = n;
    m.data.assign(n * n, 0.0);
    // f(a w) needs range coordinates of the prepended word
    for (std::size_t i = 0; i < n; ++i) {
        Config base = space.state_config(i, space.range + 1);
        for (std::size_t a = 0; a < s; ++a) {
            Config ext = base;
            const double av = space.alphabet->finite_values()[a];
            prepend_in_place(ext, std::span<const double>(&av, 1));
            const std::size_t j = space.prepend_state(i, a);
            m.at(i, j) += space.weights[a] * std::exp(f.eval(ext));
        }
    }
    return m;
}

namespace {

bool is_primitive(const TransferMatrix& m) {
    // check positivity of a small power via boolean reachability
    const std::size_t n = m.n;
    std::vector<char> reach(n * n, 0);
    for (std::size_t i = 0; i < n * n; ++i) reach[i] = m.data[i] > 0.0 ? 1 : 0;
    std::vector<char> cur = reach;
    for (std::size_t p = 1; p <= 2 * n; ++p) {
        if (std::all_of(cur.begin(), cur.end(), [](char c) { return c != 0; }))
            return true;
        std::vector<char> next(n * n, 0);
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t k = 0; k < n; ++k)
                if (cur[i * n + k])
                    for (std::size_t j = 0; j < n; ++j)
                        if (reach[k * n + j]) next[i * n + j] = 1;
        cur.swap(next);
    }
    return false;
}

double norm1(const std::vector<double>& v) {
    double s = 0.0;
    for (double x : v) s += std::abs(x);
    return s;
}

}  // namespace

PerronData perron(const TransferMatrix& m) {
    if (!is_primitive(m))
        throw std::invalid_argument("perron: matrix is not primitive");
    const std::size_t n = m.n;
    PerronData pd;
    pd.h.assign(n, 1.0);
    double lambda = 1.0;
    for (int it = 0; it < 100000; ++it) {
        std::vector<double> next = m.apply(pd.h);
        const double nl = norm1(next) / static_cast<double>(n);
        for (double& x : next) x /= nl;
        double diff = 0.0;
        for (std::size_t i = 0; i < n; ++i)
            diff = std::max(diff, std::abs(next[i] - pd.h[i]));
        pd.h = std::move(next);
        if (std::abs(nl - lambda) <= 1e-13 * nl && diff <= 1e-12) {
            lambda = nl;
            break;
        }
        lambda = nl;
    }
    pd.lambda = lambda;

    pd.nu.assign(n, 1.0 / static_cast<double>(n));
    for (int it = 0; it < 100000; ++it) {
        std::vector<double> next = m.apply_transposed(pd.nu);
        const double s = norm1(next);
        for (double& x : next) x /= s;
        double diff = 0.0;
        for (std::size_t i = 0; i < n; ++i)
            diff = std::max(diff, std::abs(next[i] - pd.nu[i]));
        pd.nu = std::move(next);
        if (diff <= 1e-13) break;
    }
    // normalization: sum nu = 1, nu . h = 1
    double dot = 0.0;
    for (std::size_t i = 0; i < n; ++i) dot += pd.nu[i] * pd.h[i];
    for (double& x : pd.h) x /= dot;

    // second eigenvalue modulus by power iteration with deflation of the
    // Perron pair: iterate v -> Mv - lambda h (nu . v)
    std::vector<double> v(n);
    for (std::size_t i = 0; i < n; ++i)
        v[i] = (i % 2 == 0 ? 1.0 : -1.0) + 1e-3 * static_cast<double>(i);
    double l2 = 0.0;
    for (int it = 0; it < 20000; ++it) {
        double proj = 0.0;
        for (std::size_t i = 0; i < n; ++i) proj += pd.nu[i] * v[i];
        for (std::size_t i = 0; i < n; ++i) v[i] -= proj * pd.h[i];
        std::vector<double> next = m.apply(v);
        const double nl = norm1(next);
        if (nl == 0.0) {
            l2 = 0.0;
            break;
        }
        for (double& x : next) x /= nl;
        v = std::move(next);
        if (it > 100 && std::abs(nl - l2) <= 1e-10 * std::max(1.0, nl)) {
            l2 = nl;
            break;
        }
        l2 = nl;
    }
    pd.lambda2_modulus = l2;
    return pd;
}

TransferMatrix exact_normalize(const TransferMatrix& m, const PerronData& pd) {
    TransferMatrix p;
    p.n = m.n;
    p.data.assign(m.n * m.n, 0.0);
    for (std::size_t i = 0; i < m.n; ++i)
        for (std::size_t j = 0; j < m.n; ++j)
            p.at(i, j) = m.at(i, j) * pd.h[j] / (pd.lambda * pd.h[i]);
    for (std::size_t i = 0; i < m.n; ++i) {
        double rs = 0.0;
        for (std::size_t j = 0; j < m.n; ++j) rs += p.at(i, j);
        if (std::abs(rs - 1.0) > 1e-10)
            throw std::runtime_error("exact_normalize: row sum off by > 1e-10");
    }
    return p;
}

std::vector<double> stationary_from_perron(const PerronData& pd) {
    std::vector<double> pi(pd.h.size());
    double s = 0.0;
    for (std::size_t i = 0; i < pi.size(); ++i) {
        pi[i] = pd.h[i] * pd.nu[i];
        s += pi[i];
    }
    for (double& x : pi) x /= s;
    return pi;
}

std::vector<double> exact_poisson(const TransferMatrix& p,
                                  const std::vector<double>& phi,
                                  const std::vector<double>& nu_stationary) {
    const std::size_t n = p.n;
    double mean = 0.0;
    for (std::size_t i = 0; i < n; ++i) mean += nu_stationary[i] * phi[i];
    if (std::abs(mean) > 1e-10)
        throw std::invalid_argument("exact_poisson: phi must be centered");

    // (I - P + 1 pi^T) ups = phi gives the centered solution exactly
    std::vector<double> a(n * n);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j)
            a[i * n + j] = (i == j ? 1.0 : 0.0) - p.at(i, j) + nu_stationary[j];
    std::vector<double> b = phi;

    // Gaussian elimination with partial pivoting
    std::vector<std::size_t> piv(n);
    for (std::size_t i = 0; i < n; ++i) piv[i] = i;
    for (std::size_t col = 0; col < n; ++col) {
        std::size_t best = col;
        for (std::size_t r = col + 1; r < n; ++r)
            if (std::abs(a[r * n + col]) > std::abs(a[best * n + col])) best = r;
        if (std::abs(a[best * n + col]) < 1e-14)
            throw std::runtime_error("exact_poisson: singular system");
        if (best != col) {
            for (std::size_t j = 0; j < n; ++j)
                std::swap(a[col * n + j], a[best * n + j]);
            std::swap(b[col], b[best]);
        }
        for (std::size_t r = col + 1; r < n; ++r) {
            const double f = a[r * n + col] / a[col * n + col];
            if (f == 0.0) continue;
            for (std::size_t j = col; j < n; ++j) a[r * n + j] -= f * a[col * n + j];
            b[r] -= f * b[col];
        }
    }
    std::vector<double> ups(n, 0.0);
    for (std::size_t ri = n; ri-- > 0;) {
        double s = b[ri];
        for (std::size_t j = ri + 1; j < n; ++j) s -= a[ri * n + j] * ups[j];
        ups[ri] = s / a[ri * n + ri];
    }

    const std::vector<double> pu = p.apply(ups);
    for (std::size_t i = 0; i < n; ++i) {
        if (std::abs(ups[i] - pu[i] - phi[i]) > 1e-8)
            throw std::runtime_error("exact_poisson: residual above 1e-8");
    }
    return ups;
}

double exact_sigma2(const TransferMatrix& p, const std::vector<double>& phi,
                    const std::vector<double>& pi) {
    const std::vector<double> ups = exact_poisson(p, phi, pi);
    const std::vector<double> pu = p.apply(ups);
    double a = 0.0, b = 0.0;
    for (std::size_t i = 0; i < p.n; ++i) {
        a += pi[i] * ups[i] * ups[i];
        b += pi[i] * pu[i] * pu[i];
    }
    return a - b;
}

std::vector<double> exact_correlations(const TransferMatrix& p,
                                       const std::vector<double>& phi,
                                       const std::vector<double>& pi,
                                       std::size_t n_max) {
    std::vector<double> out(n_max + 1, 0.0);
    std::vector<double> cur = phi;
    for (std::size_t n = 0; n <= n_max; ++n) {
        double s = 0.0;
        for (std::size_t i = 0; i < p.n; ++i) s += pi[i] * phi[i] * cur[i];
        out[n] = s;
        if (n < n_max) cur = p.apply(cur);
    }
    return out;
}

}  // namespace tklab::oracle
