#pragma once

// Independent reference computations used by the tests. Nothing here calls
// into the library's numerical code: matrices are plain nested vectors in
// long double and every product is a naive triple loop.

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <vector>

#include "scresil/common.hpp"
#include "scresil/dense.hpp"
#include "scresil/hypercore.hpp"

namespace oracle {

using Mat = std::vector<std::vector<long double>>;

inline Mat zeros(std::size_t r, std::size_t c) { return Mat(r, std::vector<long double>(c, 0.0L)); }

inline Mat mul(const Mat& a, const Mat& b) {
    const std::size_t n = a.size(), m = b.empty() ? 0 : b[0].size(), k = b.size();
    Mat out = zeros(n, m);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < m; ++j) {
            long double s = 0.0L;
            for (std::size_t t = 0; t < k; ++t) s += a[i][t] * b[t][j];
            out[i][j] = s;
        }
    return out;
}

inline Mat transpose(const Mat& a) {
    const std::size_t r = a.size(), c = a.empty() ? 0 : a[0].size();
    Mat out = zeros(c, r);
    for (std::size_t i = 0; i < r; ++i)
        for (std::size_t j = 0; j < c; ++j) out[j][i] = a[i][j];
    return out;
}

inline Mat from_dense(const scresil::DenseMatrix& m) {
    Mat out = zeros(m.rows(), m.cols());
    for (std::size_t i = 0; i < m.rows(); ++i)
        for (std::size_t j = 0; j < m.cols(); ++j) out[i][j] = m(i, j);
    return out;
}

/// D_v^-1/2 H W_e D_e^-1 H^T D_v^-1/2 assembled from scratch, firms first then
/// products, W_e = I, zero-degree rows/cols left at zero.
inline Mat propagation(const scresil::SupplyChainHypergraph& h) {
    const std::size_t nf = h.firms.size(), n = nf + h.products.size(), m = h.hyperedges.size();
    if (m == 0) return zeros(n, n);  // nested vectors cannot carry an n x 0 shape
    Mat H = zeros(n, m);
    for (std::size_t e = 0; e < m; ++e) {
        H[h.hyperedges[e].upstream][e] = 1.0L;
        H[nf + h.hyperedges[e].product][e] = 1.0L;
        H[h.hyperedges[e].downstream][e] = 1.0L;
    }
    Mat Dv_isqrt = zeros(n, n);
    for (std::size_t i = 0; i < n; ++i) {
        long double d = 0.0L;
        for (std::size_t e = 0; e < m; ++e) d += H[i][e];
        Dv_isqrt[i][i] = d > 0.0L ? 1.0L / std::sqrt(d) : 0.0L;
    }
    Mat We = zeros(m, m), De_inv = zeros(m, m);
    for (std::size_t e = 0; e < m; ++e) {
        We[e][e] = 1.0L;
        long double d = 0.0L;
        for (std::size_t i = 0; i < n; ++i) d += H[i][e];
        De_inv[e][e] = 1.0L / d;
    }
    return mul(mul(mul(mul(mul(Dv_isqrt, H), We), De_inv), transpose(H)), Dv_isqrt);
}

/// relu(P Z W).
inline Mat hconv(const Mat& p, const Mat& z, const Mat& w) {
    Mat out = mul(mul(p, z), w);
    for (auto& row : out)
        for (auto& v : row) v = v > 0.0L ? v : 0.0L;
    return out;
}

inline double max_abs_diff(const Mat& a, const scresil::DenseMatrix& b) {
    long double m = 0.0L;
    for (std::size_t i = 0; i < a.size(); ++i)
        for (std::size_t j = 0; j < a[i].size(); ++j) m = std::max(m, std::fabs(a[i][j] - b(i, j)));
    return static_cast<double>(m);
}

/// Random valid hypergraph with the given node counts; about `density` of all
/// admissible (u, p, v) triples are present.
inline scresil::SupplyChainHypergraph random_hypergraph(std::size_t nf, std::size_t np, double density,
                                                        std::uint64_t seed) {
    scresil::Rng rng(seed);
    scresil::SupplyChainHypergraph h;
    h.chain_id = "rand";
    for (std::size_t i = 0; i < nf; ++i) h.firms.push_back("f" + std::to_string(i));
    for (std::size_t i = 0; i < np; ++i) h.products.push_back("p" + std::to_string(i));
    for (std::size_t u = 0; u < nf; ++u)
        for (std::size_t p = 0; p < np; ++p)
            for (std::size_t v = 0; v < nf; ++v)
                if (u != v && rng.bernoulli(density)) h.hyperedges.push_back({u, p, v});
    return h;
}

inline Mat random_mat(std::size_t r, std::size_t c, scresil::Rng& rng, double lo = -1.0, double hi = 1.0) {
    Mat m = zeros(r, c);
    for (auto& row : m)
        for (auto& v : row) v = rng.uniform(lo, hi);
    return m;
}

inline scresil::DenseMatrix to_dense(const Mat& m) {
    scresil::DenseMatrix out(m.size(), m.empty() ? 0 : m[0].size());
    for (std::size_t i = 0; i < out.rows(); ++i)
        for (std::size_t j = 0; j < out.cols(); ++j) out(i, j) = static_cast<double>(m[i][j]);
    return out;
}

// ---------------------------------------------------------------------------
// Paired t-test by direct numerical integration of the Student-t density.

struct PairedT {
    long double t = 0.0L;
    long double p = 1.0L;
};

inline long double t_density(long double x, long double nu) {
    const long double c = std::exp(std::lgamma((nu + 1.0L) / 2.0L) - std::lgamma(nu / 2.0L)) /
                          std::sqrt(nu * 3.14159265358979323846264338327950288L);
    return c * std::pow(1.0L + x * x / nu, -(nu + 1.0L) / 2.0L);
}

/// Two-sided p = 1 - 2 * integral_0^|t| f, composite Simpson on a fine grid.
inline long double t_two_sided(long double t, long double nu) {
    const long double a = std::fabs(t);
    if (a == 0.0L) return 1.0L;
    const std::size_t n = 400000;  // even
    const long double h = a / static_cast<long double>(n);
    long double s = t_density(0.0L, nu) + t_density(a, nu);
    for (std::size_t i = 1; i < n; ++i) s += (i % 2 ? 4.0L : 2.0L) * t_density(h * static_cast<long double>(i), nu);
    const long double integral = s * h / 3.0L;
    return 1.0L - 2.0L * integral;
}

inline PairedT paired_t(const std::vector<double>& a, const std::vector<double>& b) {
    const std::size_t n = a.size();
    long double mean = 0.0L;
    for (std::size_t i = 0; i < n; ++i) mean += static_cast<long double>(a[i]) - b[i];
    mean /= static_cast<long double>(n);
    long double ss = 0.0L;
    for (std::size_t i = 0; i < n; ++i) {
        const long double d = static_cast<long double>(a[i]) - b[i] - mean;
        ss += d * d;
    }
    const long double sd = std::sqrt(ss / static_cast<long double>(n - 1));
    PairedT r;
    r.t = mean / (sd / std::sqrt(static_cast<long double>(n)));
    r.p = t_two_sided(r.t, static_cast<long double>(n - 1));
    return r;
}

}  // namespace oracle
