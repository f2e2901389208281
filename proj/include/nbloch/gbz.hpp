#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <complex>
#include <string>
#include <vector>

#include "errors.hpp"
#include "quadratic.hpp"
#include "spectrum.hpp"
#include "walk.hpp"

namespace nbloch {

enum class ContourSide { inside, outside, obc };

inline const char* to_string(ContourSide s) {
    switch (s) {
        case ContourSide::inside: return "inside";
        case ContourSide::outside: return "outside";
        default: return "obc";
    }
}

// One closed momentum contour.  radius_fit and radius_spread are computed on
// the central 70% of the points by modulus so that boundary-deficit outliers
// do not skew them; betas always keeps every point.
struct GbzContour {
    std::vector<std::complex<double>> betas;
    ContourSide side = ContourSide::inside;
    double delta = 0.0;
    double radius_fit = 0.0;
    double radius_spread = 0.0;
};

struct GbzPair {
    GbzContour inside;
    GbzContour outside;
};

// Solves the dispersion for beta at fixed quasienergy E:
//   beta^2 + b beta + c = 0,
//   b = -(2 cos E + (alpha + 1/alpha) s1 s2) / (alpha c1 c2),  c = 1/alpha^2.
// Returns (smaller-modulus root, larger-modulus root); their product is
// e^{-2 gamma}, so they bracket the open-chain radius e^{-gamma}.
inline std::pair<std::complex<double>, std::complex<double>>
beta_roots(const WalkParams& w, std::complex<double> E) {
    const double c1 = std::cos(w.theta1 / 2.0), s1 = std::sin(w.theta1 / 2.0);
    const double c2 = std::cos(w.theta2 / 2.0), s2 = std::sin(w.theta2 / 2.0);
    const double a = std::exp(w.gamma);
    if (std::abs(c1 * c2) < 1e-12)
        throw degenerate_dispersion_error(
            "beta_roots: dispersion degenerates at theta = pi (cos(theta/2) = 0); "
            "perturb theta by 1e-9 to resolve the contour");
    const std::complex<double> b =
        -(2.0 * std::cos(E) + (a + 1.0 / a) * s1 * s2) / (a * c1 * c2);
    const std::complex<double> c(std::exp(-2.0 * w.gamma), 0.0);
    return solve_quadratic(b, c);
}

namespace detail {

// Central 70% of the moduli; boundary-deficit roots land far off the ring
// and would otherwise dominate every radial statistic.
inline std::vector<double> core_moduli(const std::vector<std::complex<double>>& betas) {
    std::vector<double> r;
    r.reserve(betas.size());
    for (const auto& b : betas) r.push_back(std::abs(b));
    std::sort(r.begin(), r.end());
    const std::size_t drop = static_cast<std::size_t>(std::floor(r.size() * 0.15));
    return std::vector<double>(r.begin() + drop, r.end() - drop);
}

inline void radius_stats(GbzContour& c) {
    const std::vector<double> r = core_moduli(c.betas);
    double mean = 0.0;
    for (double v : r) mean += v;
    c.radius_fit = mean / static_cast<double>(r.size());
    double spread = 0.0;
    for (double v : r) spread = std::max(spread, std::abs(v - c.radius_fit));
    c.radius_spread = spread;
}

// Both contours encircle the origin (the root product is pinned away from
// zero), so angular order about the origin is the stable traversal order
// even when a boundary-deficit root is sent far from the ring.
inline void sort_about_origin(std::vector<std::complex<double>>& pts) {
    auto ang = [](const std::complex<double>& z) {
        double a = std::arg(z);
        if (a < 0.0) a += 2.0 * M_PI;
        return a;
    };
    std::sort(pts.begin(), pts.end(),
              [&](const std::complex<double>& x, const std::complex<double>& y) {
                  const double ax = ang(x), ay = ang(y);
                  if (ax != ay) return ax < ay;
                  return std::abs(x) < std::abs(y);
              });
}

} // namespace detail

// Generalized momentum contours at boundary parameter delta > 0: one point
// pair per eigenvalue of the finite chain, split by modulus.
inline GbzPair build_contours(const WalkParams& w) {
    if (!(w.delta > 0.0))
        throw invalid_params_error(
            "build_contours: requires delta > 0 (the open chain has the analytic circle)");
    const SpectrumResult s = gbc_spectrum(w);

    GbzPair out;
    out.inside.side = ContourSide::inside;
    out.outside.side = ContourSide::outside;
    out.inside.delta = out.outside.delta = w.delta;

    for (const auto& e : s.energies) {
        auto [b1, b2] = beta_roots(w, e);
        if (std::abs(std::abs(b1) - std::abs(b2)) <=
            1e-12 * std::max(1.0, std::abs(b2)))
            throw ambiguous_classification_error(
                "build_contours: root pair at E = (" + std::to_string(e.real()) +
                ", " + std::to_string(e.imag()) +
                ") sits on the dividing circle; inside/outside is ambiguous");
        out.inside.betas.push_back(b1);
        out.outside.betas.push_back(b2);
    }
    detail::sort_about_origin(out.inside.betas);
    detail::sort_about_origin(out.outside.betas);
    detail::radius_stats(out.inside);
    detail::radius_stats(out.outside);
    return out;
}

// Largest radial deviation of a contour's core from a reference radius;
// with the open-chain radius as reference this measures the collapse of the
// two loops onto the analytic circle as delta shrinks.
inline double radius_deviation(const GbzContour& c, double reference) {
    double dev = 0.0;
    for (double v : detail::core_moduli(c.betas))
        dev = std::max(dev, std::abs(v - reference));
    return dev;
}

// Open-chain momentum contour: the exact circle of radius e^{-gamma}.
inline GbzContour obc_circle(const WalkParams& w, std::size_t n_points) {
    if (n_points < 8)
        throw insufficient_sampling_error("obc_circle: need at least 8 points");
    GbzContour c;
    c.side = ContourSide::obc;
    c.delta = 0.0;
    c.radius_fit = std::exp(-w.gamma);
    c.radius_spread = 0.0;
    c.betas.reserve(n_points);
    for (std::size_t k = 0; k < n_points; ++k)
        c.betas.push_back(std::polar(c.radius_fit,
                                     2.0 * M_PI * static_cast<double>(k) /
                                         static_cast<double>(n_points)));
    return c;
}

// --- transfer-block residual -------------------------------------------------
//
// The translation-invariant step operator splits into hop-left, on-site and
// hop-right 2x2 blocks: U(beta) = A_m beta + A_s + A_p / beta.  A momentum
// beta belongs to the contour at quasienergy E exactly when
// det(U(beta) - e^{-iE}) = 0; the modulus of that determinant is the
// residual reported here and serves as an independent check on beta_roots.

struct TransferBlocks {
    std::array<std::complex<double>, 4> a_m, a_s, a_p; // row-major 2x2
};

inline TransferBlocks transfer_blocks(const WalkParams& w) {
    const double c1 = std::cos(w.theta1 / 2.0), s1 = std::sin(w.theta1 / 2.0);
    const double c2 = std::cos(w.theta2 / 2.0), s2 = std::sin(w.theta2 / 2.0);
    const double g = std::exp(w.gamma), gi = std::exp(-w.gamma);
    TransferBlocks t;
    t.a_m = {g * c1 * c2, -g * s1 * c2, 0.0, 0.0};
    t.a_p = {0.0, 0.0, gi * s1 * c2, gi * c1 * c2};
    t.a_s = {-gi * s1 * s2, -gi * c1 * s2, g * c1 * s2, -g * s1 * s2};
    return t;
}

inline double transfer_block_check(const WalkParams& w,
                                   std::complex<double> E,
                                   std::complex<double> beta) {
    using C = std::complex<double>;
    if (std::abs(beta) == 0.0)
        throw singular_input_error("transfer_block_check: beta must be nonzero");
    const TransferBlocks t = transfer_blocks(w);
    const C mu = std::exp(C(0.0, -1.0) * E);
    std::array<C, 4> m;
    for (int k = 0; k < 4; ++k)
        m[k] = t.a_m[k] * beta + t.a_s[k] + t.a_p[k] / beta;
    m[0] -= mu;
    m[3] -= mu;
    return std::abs(m[0] * m[3] - m[1] * m[2]);
}

} // namespace nbloch
