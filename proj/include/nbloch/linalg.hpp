#pragma once

#include <algorithm>
#include <cmath>
#include <complex>
#include <string>
#include <vector>

#include "errors.hpp"

namespace nbloch {

// Dense row-major complex matrix over a configurable real type.  The long
// double instantiation exists so higher-precision reference computations can
// share this code path.
template <class R = double>
struct basic_matrix {
    using real_t = R;
    using cplx = std::complex<R>;

    std::size_t rows = 0, cols = 0;
    std::vector<cplx> entries;

    basic_matrix() = default;
    basic_matrix(std::size_t r, std::size_t c) : rows(r), cols(c), entries(r * c) {}

    cplx& operator()(std::size_t i, std::size_t j) { return entries[i * cols + j]; }
    const cplx& operator()(std::size_t i, std::size_t j) const { return entries[i * cols + j]; }

    static basic_matrix identity(std::size_t n) {
        basic_matrix m(n, n);
        for (std::size_t i = 0; i < n; ++i) m(i, i) = cplx(1);
        return m;
    }

    R frobenius() const {
        R s = 0;
        for (const cplx& e : entries) s += std::norm(e);
        return std::sqrt(s);
    }
};

using ComplexMatrix = basic_matrix<double>;

template <class R>
std::vector<std::complex<R>> matvec(const basic_matrix<R>& a,
                                    const std::vector<std::complex<R>>& x) {
    if (a.cols != x.size()) throw dimension_error("matvec: size mismatch");
    std::vector<std::complex<R>> y(a.rows);
    for (std::size_t i = 0; i < a.rows; ++i) {
        std::complex<R> s = 0;
        const std::complex<R>* row = &a.entries[i * a.cols];
        for (std::size_t j = 0; j < a.cols; ++j) s += row[j] * x[j];
        y[i] = s;
    }
    return y;
}

template <class R>
basic_matrix<R> matmul(const basic_matrix<R>& a, const basic_matrix<R>& b) {
    if (a.cols != b.rows) throw dimension_error("matmul: size mismatch");
    basic_matrix<R> c(a.rows, b.cols);
    for (std::size_t i = 0; i < a.rows; ++i)
        for (std::size_t k = 0; k < a.cols; ++k) {
            const std::complex<R> aik = a(i, k);
            if (aik == std::complex<R>(0)) continue;
            const std::complex<R>* brow = &b.entries[k * b.cols];
            std::complex<R>* crow = &c.entries[i * b.cols];
            for (std::size_t j = 0; j < b.cols; ++j) crow[j] += aik * brow[j];
        }
    return c;
}

template <class R>
struct basic_eigenpair {
    std::complex<R> value;
    std::vector<std::complex<R>> vector; // right eigenvector, unit Euclidean norm
    R residual = 0;                      // ||A v - lambda v||
};

using EigenPair = basic_eigenpair<double>;

namespace detail {

// Parlett-Reinsch balancing with powers of two: A <- D^-1 A D in place.
// Returns the diagonal of D so eigenvectors can be mapped back.
template <class R>
std::vector<R> balance(basic_matrix<R>& a) {
    const std::size_t n = a.rows;
    std::vector<R> d(n, R(1));
    const R radix = 2;
    bool done = false;
    int guard = 0;
    while (!done && guard++ < 100) {
        done = true;
        for (std::size_t i = 0; i < n; ++i) {
            R c = 0, r = 0;
            for (std::size_t j = 0; j < n; ++j) {
                if (j == i) continue;
                c += std::abs(a(j, i));
                r += std::abs(a(i, j));
            }
            if (c == R(0) || r == R(0)) continue;
            R f = 1;
            const R s = c + r;
            while (c < r / radix) { c *= radix; r /= radix; f *= radix; }
            while (c >= r * radix) { c /= radix; r *= radix; f /= radix; }
            if ((c + r) < R(0.95) * s) {
                done = false;
                d[i] *= f;
                for (std::size_t j = 0; j < n; ++j) a(i, j) /= f;
                for (std::size_t j = 0; j < n; ++j) a(j, i) *= f;
            }
        }
    }
    return d;
}

// Householder reduction to upper Hessenberg form; accumulates the unitary Q
// with A = Q H Q^dagger.
template <class R>
void hessenberg(basic_matrix<R>& a, basic_matrix<R>& q) {
    using C = std::complex<R>;
    const std::size_t n = a.rows;
    q = basic_matrix<R>::identity(n);
    if (n < 3) return;
    std::vector<std::vector<C>> reflectors;
    reflectors.reserve(n - 2);
    std::vector<C> v(n);
    for (std::size_t k = 0; k + 2 < n; ++k) {
        R xnorm = 0;
        for (std::size_t i = k + 1; i < n; ++i) xnorm += std::norm(a(i, k));
        xnorm = std::sqrt(xnorm);
        std::vector<C> h;
        if (xnorm > R(0)) {
            const C x0 = a(k + 1, k);
            const C phase = (std::abs(x0) > R(0)) ? x0 / std::abs(x0) : C(1);
            const C beta = -phase * xnorm;
            R vnorm = 0;
            for (std::size_t i = k + 1; i < n; ++i) {
                v[i] = a(i, k);
                if (i == k + 1) v[i] -= beta;
                vnorm += std::norm(v[i]);
            }
            if (vnorm > R(0)) {
                vnorm = std::sqrt(vnorm);
                h.assign(n, C(0));
                for (std::size_t i = k + 1; i < n; ++i) h[i] = v[i] / vnorm;
                // left application: A <- (I - 2 h h^dag) A
                for (std::size_t j = k; j < n; ++j) {
                    C s = 0;
                    for (std::size_t i = k + 1; i < n; ++i) s += std::conj(h[i]) * a(i, j);
                    s *= R(2);
                    for (std::size_t i = k + 1; i < n; ++i) a(i, j) -= s * h[i];
                }
                // right application: A <- A (I - 2 h h^dag)
                for (std::size_t i = 0; i < n; ++i) {
                    C s = 0;
                    for (std::size_t j = k + 1; j < n; ++j) s += a(i, j) * h[j];
                    s *= R(2);
                    for (std::size_t j = k + 1; j < n; ++j) a(i, j) -= s * std::conj(h[j]);
                }
            }
        }
        reflectors.push_back(std::move(h));
        for (std::size_t i = k + 2; i < n; ++i) a(i, k) = C(0);
    }
    // Backward accumulation of Q = P_0 P_1 ... P_{n-3}.
    for (std::size_t kk = reflectors.size(); kk-- > 0;) {
        const std::vector<C>& h = reflectors[kk];
        if (h.empty()) continue;
        for (std::size_t j = kk + 1; j < n; ++j) {
            C s = 0;
            for (std::size_t i = kk + 1; i < n; ++i) s += std::conj(h[i]) * q(i, j);
            s *= R(2);
            for (std::size_t i = kk + 1; i < n; ++i) q(i, j) -= s * h[i];
        }
    }
}

template <class R>
struct givens {
    R c;                 // real cosine
    std::complex<R> s;   // complex sine
};

// Rotation G = [[c, s], [-conj(s), c]] with G [a; b] = [r; 0].
template <class R>
givens<R> make_givens(std::complex<R> a, std::complex<R> b) {
    using C = std::complex<R>;
    const R aa = std::abs(a), bb = std::abs(b);
    if (bb == R(0)) return {R(1), C(0)};
    if (aa == R(0)) return {R(0), C(1)};
    const R d = std::hypot(aa, bb);
    return {aa / d, (a / aa) * std::conj(b) / d};
}

// Eigenvalues of a complex 2x2.
template <class R>
std::pair<std::complex<R>, std::complex<R>> eig2(std::complex<R> a, std::complex<R> b,
                                                 std::complex<R> c, std::complex<R> d) {
    const std::complex<R> tr2 = (a + d) / R(2);
    const std::complex<R> disc = std::sqrt(tr2 * tr2 - (a * d - b * c));
    return {tr2 + disc, tr2 - disc};
}

// Shifted QR iteration on an upper Hessenberg matrix; eigenvalues only.
// Deflation threshold follows the documented rule: a subdiagonal entry is
// negligible when it is below thresh * (|h_kk| + |h_k+1,k+1|), with
// thresh * ||H||_F as the fallback scale when the local diagonal vanishes.
template <class R>
std::vector<std::complex<R>> hessenberg_eigenvalues(basic_matrix<R> h, R thresh,
                                                    std::size_t max_sweeps) {
    using C = std::complex<R>;
    const std::size_t n = h.rows;
    std::vector<C> eig(n);
    const R fnorm = h.frobenius();
    std::size_t hi = n;          // active block is [lo, hi)
    std::size_t sweeps = 0;
    std::size_t stall = 0;
    while (hi > 0) {
        if (hi == 1) { eig[0] = h(0, 0); break; }
        // deflate from the bottom
        std::size_t lo = hi - 1;
        while (lo > 0) {
            const R scale = std::abs(h(lo - 1, lo - 1)) + std::abs(h(lo, lo));
            const R tol = thresh * (scale > R(0) ? scale : fnorm);
            if (std::abs(h(lo, lo - 1)) <= tol) { h(lo, lo - 1) = C(0); break; }
            --lo;
        }
        if (lo == hi - 1) { eig[hi - 1] = h(hi - 1, hi - 1); --hi; stall = 0; continue; }
        if (lo == hi - 2) {
            auto [l1, l2] = eig2(h(hi - 2, hi - 2), h(hi - 2, hi - 1),
                                 h(hi - 1, hi - 2), h(hi - 1, hi - 1));
            eig[hi - 2] = l1;
            eig[hi - 1] = l2;
            hi -= 2;
            stall = 0;
            continue;
        }
        if (++sweeps > max_sweeps)
            throw nonconvergence_error(
                "eigendecompose: QR sweep cap exceeded at index " + std::to_string(hi - 1));
        // Wilkinson shift from the trailing 2x2; exceptional shift on stalls.
        C sigma;
        if (++stall % 12 == 0) {
            sigma = h(hi - 1, hi - 1) + R(0.75) * std::abs(h(hi - 1, hi - 2));
        } else {
            auto [l1, l2] = eig2(h(hi - 2, hi - 2), h(hi - 2, hi - 1),
                                 h(hi - 1, hi - 2), h(hi - 1, hi - 1));
            sigma = (std::abs(l1 - h(hi - 1, hi - 1)) < std::abs(l2 - h(hi - 1, hi - 1))) ? l1 : l2;
        }
        for (std::size_t i = lo; i < hi; ++i) h(i, i) -= sigma;
        // QR by Givens sweeps, then RQ.
        std::vector<givens<R>> rots(hi - 1 - lo);
        for (std::size_t k = lo; k + 1 < hi; ++k) {
            givens<R> g = make_givens(h(k, k), h(k + 1, k));
            rots[k - lo] = g;
            for (std::size_t j = k; j < hi; ++j) {
                const C a = h(k, j), b = h(k + 1, j);
                h(k, j) = g.c * a + g.s * b;
                h(k + 1, j) = -std::conj(g.s) * a + g.c * b;
            }
        }
        for (std::size_t k = lo; k + 1 < hi; ++k) {
            const givens<R>& g = rots[k - lo];
            const std::size_t top = lo;
            const std::size_t bottom = std::min(k + 2, hi - 1);
            for (std::size_t i = top; i <= bottom; ++i) {
                const C a = h(i, k), b = h(i, k + 1);
                h(i, k) = a * g.c + b * std::conj(g.s);
                h(i, k + 1) = -a * g.s + b * g.c;
            }
        }
        for (std::size_t i = lo; i < hi; ++i) h(i, i) += sigma;
    }
    return eig;
}

// One inverse-iteration solve on the Hessenberg form: row-pivoted elimination
// of (H - lambda I), O(n^2).
template <class R>
std::vector<std::complex<R>> hessenberg_inverse_iteration(const basic_matrix<R>& h,
                                                          std::complex<R> lambda) {
    using C = std::complex<R>;
    const std::size_t n = h.rows;
    const R tiny = std::numeric_limits<R>::epsilon() * std::max(h.frobenius(), R(1));
    // band storage: m has 2 subdiagonal-ish rows handled via row swaps
    basic_matrix<R> m = h;
    for (std::size_t i = 0; i < n; ++i) m(i, i) -= lambda;
    std::vector<C> x(n, C(1));
    for (int pass = 0; pass < 2; ++pass) {
        basic_matrix<R> u = m;
        std::vector<C> b = x;
        // forward elimination with partial pivoting (Hessenberg: one subdiagonal)
        for (std::size_t k = 0; k + 1 < n; ++k) {
            if (std::abs(u(k + 1, k)) > std::abs(u(k, k))) {
                for (std::size_t j = k; j < n; ++j) std::swap(u(k, j), u(k + 1, j));
                std::swap(b[k], b[k + 1]);
            }
            if (std::abs(u(k, k)) < tiny) u(k, k) = C(tiny);
            const C f = u(k + 1, k) / u(k, k);
            if (f != C(0)) {
                for (std::size_t j = k; j < n; ++j) u(k + 1, j) -= f * u(k, j);
                b[k + 1] -= f * b[k];
            }
        }
        if (std::abs(u(n - 1, n - 1)) < tiny) u(n - 1, n - 1) = C(tiny);
        // back substitution
        for (std::size_t k = n; k-- > 0;) {
            C s = b[k];
            for (std::size_t j = k + 1; j < n; ++j) s -= u(k, j) * x[j];
            x[k] = s / u(k, k);
        }
        R nx = 0;
        for (const C& e : x) nx += std::norm(e);
        nx = std::sqrt(nx);
        if (nx == R(0)) { x.assign(n, C(1)); continue; }
        for (C& e : x) e /= nx;
    }
    return x;
}

} // namespace detail

// Full non-symmetric complex eigendecomposition: balancing, Householder
// Hessenberg reduction, implicitly shifted QR for the values, and inverse
// iteration on the Hessenberg form for the vectors.  Residuals are measured
// against the original matrix; near-defective pairs report whatever accuracy
// was achieved.
template <class R>
std::vector<basic_eigenpair<R>> eigendecompose(const basic_matrix<R>& a_in, R tol) {
    using C = std::complex<R>;
    if (a_in.rows != a_in.cols) throw dimension_error("eigendecompose: matrix not square");
    const std::size_t n = a_in.rows;
    if (n == 0) throw dimension_error("eigendecompose: empty matrix");
    for (const C& e : a_in.entries)
        if (!std::isfinite(e.real()) || !std::isfinite(e.imag()))
            throw singular_input_error("eigendecompose: non-finite entry");
    (void)tol;

    basic_matrix<R> a = a_in;
    const std::vector<R> d = detail::balance(a);
    basic_matrix<R> q;
    detail::hessenberg(a, q);
    const basic_matrix<R>& h = a;

    const R thresh = R(1e-14);
    std::vector<C> values = detail::hessenberg_eigenvalues(h, thresh, 100 * n);

    std::vector<basic_eigenpair<R>> out(n);
    for (std::size_t e = 0; e < n; ++e) {
        out[e].value = values[e];
        std::vector<C> xh = detail::hessenberg_inverse_iteration(h, values[e]);
        // map back: balanced-basis vector = Q xh, original-basis = D * that
        std::vector<C> v(n, C(0));
        for (std::size_t i = 0; i < n; ++i) {
            C s = 0;
            for (std::size_t j = 0; j < n; ++j) s += q(i, j) * xh[j];
            v[i] = s * d[i];
        }
        R nv = 0;
        for (const C& c : v) nv += std::norm(c);
        nv = std::sqrt(nv);
        if (nv > R(0))
            for (C& c : v) c /= nv;
        std::vector<C> av = matvec(a_in, v);
        R res = 0;
        for (std::size_t i = 0; i < n; ++i) res += std::norm(av[i] - values[e] * v[i]);
        out[e].vector = std::move(v);
        out[e].residual = std::sqrt(res);
    }
    return out;
}

} // namespace nbloch
