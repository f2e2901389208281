#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <complex>
#include <map>
#include <numeric>
#include <vector>

#include "errors.hpp"
#include "gbz.hpp"
#include "spectrum.hpp"
#include "walk.hpp"

namespace nbloch {

enum class Band { plus, minus };
enum class Scheme { wilson, derivative };

// Effective-Hamiltonian components at one momentum-contour point.  The two
// quasienergy branches are E_minus = -E_plus; the prefactor E/(2i sin E) is
// even in E, so the components themselves are band-independent.
struct HComponents {
    std::complex<double> hx, hy, hz;
    std::complex<double> e_plus, e_minus;
    std::complex<double> beta;
    bool near_singular = false;
};

inline HComponents h_components(std::complex<double> beta, const WalkParams& p,
                                Band /*band*/ = Band::plus) {
    using C = std::complex<double>;
    if (std::abs(beta) == 0.0)
        throw singular_input_error("h_components: beta must be nonzero");

    const double c1 = std::cos(p.theta1 / 2.0), s1 = std::sin(p.theta1 / 2.0);
    const double c2 = std::cos(p.theta2 / 2.0), s2 = std::sin(p.theta2 / 2.0);
    const double a = std::exp(p.gamma);

    HComponents h;
    h.beta = beta;
    h.e_plus = std::acos(bloch_cos(p, beta));
    h.e_minus = -h.e_plus;

    const C sinE = std::sin(h.e_plus);
    const C i(0.0, 1.0);
    C pre;
    if (std::abs(sinE) < 1e-12) {
        throw exceptional_point_error(
            "h_components: sin E vanishes at this beta (band touching); "
            "refine the contour");
    } else if (std::abs(sinE) < 1e-8) {
        h.near_singular = true;
        if (std::abs(h.e_plus) < 1e-4) {
            // series limit of E / sin E about E = 0
            const C e2 = h.e_plus * h.e_plus;
            pre = (1.0 + e2 / 6.0 + 7.0 * e2 * e2 / 360.0) / (2.0 * i);
        } else {
            pre = h.e_plus / (2.0 * i * sinE);
        }
    } else {
        pre = h.e_plus / (2.0 * i * sinE);
    }

    const C bm = beta * a - 1.0 / (beta * a);
    const C bp = beta * a + 1.0 / (beta * a);
    h.hx = -pre * bm * c2;
    h.hy = -pre * (i * (a + 1.0 / a) * c1 * s2 + i * bp * s1 * c2);
    h.hz = pre * (a - 1.0 / a) * s2;
    return h;
}

// Biorthogonal eigenstate pairs of h.sigma at one contour point, built
// verbatim from the closed-form normalization; the pairs satisfy
// <psiL_s | psiR_s> = 1 exactly up to roundoff.
struct BandStates {
    std::array<std::complex<double>, 2> psiR_plus, psiR_minus;
    std::array<std::complex<double>, 2> psiL_plus, psiL_minus;
};

namespace detail {

inline void one_band(const HComponents& h, std::complex<double> e,
                     std::array<std::complex<double>, 2>& r,
                     std::array<std::complex<double>, 2>& l) {
    using C = std::complex<double>;
    const C dz = e - h.hz;
    if (std::abs(dz) < 1e-12)
        throw coalescence_error(
            "band_states: E and hz coalesce (exceptional point); refine the contour");
    const C sinE = std::sin(e);
    const C sin2E = std::sin(2.0 * e);
    const C s = sinE * (e - sin2E * h.hy) + std::conj(sinE) * (e + sin2E * h.hy);
    const C sroot = std::sqrt(s);
    const C droot = std::sqrt(2.0 * dz);
    const C up = h.hx - C(0.0, 1.0) * h.hy;
    const C wp = h.hx + C(0.0, 1.0) * h.hy;
    r = {sroot / (e * droot) * up, sroot / (e * droot) * dz};
    l = {wp / (sroot * droot), dz / (sroot * droot)};
}

} // namespace detail

inline BandStates band_states(const HComponents& h) {
    BandStates b;
    detail::one_band(h, h.e_plus, b.psiR_plus, b.psiL_plus);
    detail::one_band(h, h.e_minus, b.psiR_minus, b.psiL_minus);
    return b;
}

// Half-integer rational: value = num / den with den in {1, 2}.
struct HalfInteger {
    long num = 0;
    long den = 1;
    double value() const { return static_cast<double>(num) / static_cast<double>(den); }
    bool is_integer() const { return den == 1; }
};

inline HalfInteger nearest_half_integer(double v) {
    const long t = std::lround(2.0 * v);
    HalfInteger q;
    if (t % 2 == 0) {
        q.num = t / 2;
        q.den = 1;
    } else {
        q.num = t;
        q.den = 2;
    }
    return q;
}

struct InvariantResult {
    std::vector<std::pair<double, std::complex<double>>> v_raw_per_delta;
    double v = 0.0;
    HalfInteger v_quantized;
    double min_margin = 1.0;      // band-tracking margin at the smallest coupling
    bool schemes_agree = false;   // Wilson vs derivative at the smallest coupling
    bool contour_trusted = false; // stable trace, confident tracking, on-lattice value
    bool converged = false;       // trusted, scheme-agreed, and integer-quantized
    std::size_t contour_size = 0;
};

inline std::vector<double> default_delta_schedule() {
    return {1e-1, 3e-2, 1e-2, 3e-3, 1e-3};
}

// One contour evaluation: both integration schemes at a single delta.
struct WindingProbe {
    std::complex<double> wilson;
    std::complex<double> derivative;
    double min_margin = 1.0;      // worst band-assignment confidence on this contour
    bool closure_swapped = false; // one loop exchanges the bands (branch enclosure)
};

// Raw results of the full boundary-coupling ladder, both contour sides.
struct WindingScan {
    std::vector<double> deltas;                 // the ones that evaluated
    std::vector<WindingProbe> inside, outside;  // aligned with deltas
    bool refined = false;
    std::size_t contour_size = 0;
};

namespace detail {

using C2 = std::array<std::complex<double>, 2>;

// left-right contraction: the left vector is already a row, no conjugation
inline std::complex<double> lr(const C2& l, const C2& r) {
    return l[0] * r[0] + l[1] * r[1];
}

struct NodeStates {
    std::vector<C2> rp, rm, lp, lm; // per node, band-tracked
    bool closure_swapped = false;
    double min_margin = 1.0;
};

// Computes band-continuous state sequences along the ordered contour.
// Principal-branch labels jump along the loop, so each node's pair is
// relabeled to maximize the biorthogonal overlap with the previous node;
// the closure leg detects whether one loop exchanges the bands entirely
// (a branch-point enclosure, the signature of the exceptional phase).
inline NodeStates tracked_states(const WalkParams& p,
                                 const std::vector<std::complex<double>>& nodes) {
    NodeStates out;
    const std::size_t n = nodes.size();
    out.rp.resize(n);
    out.rm.resize(n);
    out.lp.resize(n);
    out.lm.resize(n);

    for (std::size_t k = 0; k < n; ++k) {
        const HComponents h = h_components(nodes[k], p);
        BandStates b = band_states(h);
        if (k > 0) {
            const double o_id = std::abs(lr(out.lp[k - 1], b.psiR_plus)) *
                                std::abs(lr(out.lm[k - 1], b.psiR_minus));
            const double o_sw = std::abs(lr(out.lp[k - 1], b.psiR_minus)) *
                                std::abs(lr(out.lm[k - 1], b.psiR_plus));
            const double big = std::max(o_id, o_sw);
            if (big > 0.0)
                out.min_margin = std::min(out.min_margin,
                                          std::abs(o_id - o_sw) / big);
            else
                out.min_margin = 0.0;
            if (o_sw > o_id) {
                std::swap(b.psiR_plus, b.psiR_minus);
                std::swap(b.psiL_plus, b.psiL_minus);
            }
        }
        out.rp[k] = b.psiR_plus;
        out.rm[k] = b.psiR_minus;
        out.lp[k] = b.psiL_plus;
        out.lm[k] = b.psiL_minus;
    }

    const double c_id = std::abs(lr(out.lp[n - 1], out.rp[0])) *
                        std::abs(lr(out.lm[n - 1], out.rm[0]));
    const double c_sw = std::abs(lr(out.lp[n - 1], out.rm[0])) *
                        std::abs(lr(out.lm[n - 1], out.rp[0]));
    const double big = std::max(c_id, c_sw);
    if (big > 0.0)
        out.min_margin = std::min(out.min_margin, std::abs(c_id - c_sw) / big);
    else
        out.min_margin = 0.0;
    out.closure_swapped = c_sw > c_id;
    return out;
}

// Wilson discretization: minus the accumulated link phases over 2pi.  The
// states carry square roots whose branch may flip from node to node; a flip
// negates a left-right pair jointly, shifting the affected link phases by
// exactly pi while leaving the loop product unchanged.  Folding every link
// phase modulo pi into (-pi/2, pi/2] removes that branch noise without
// touching the smooth part, and makes the sum independent of where the
// chain seam is placed.  When the closure leg swaps bands the two band
// chains join into a single cycle of twice the length, with crossed links
// at the seam.
inline double link_phase(const C2& l, const C2& r) {
    return std::remainder(std::arg(lr(l, r)), M_PI);
}

inline double wilson_sum(const NodeStates& s) {
    const std::size_t n = s.rp.size();
    double total = 0.0;
    if (!s.closure_swapped) {
        for (std::size_t k = 0; k < n; ++k) {
            const std::size_t j = (k + 1) % n;
            total += link_phase(s.lp[k], s.rp[j]);
            total += link_phase(s.lm[k], s.rm[j]);
        }
    } else {
        for (std::size_t k = 0; k + 1 < n; ++k) {
            total += link_phase(s.lp[k], s.rp[k + 1]);
            total += link_phase(s.lm[k], s.rm[k + 1]);
        }
        total += link_phase(s.lp[n - 1], s.rm[0]);
        total += link_phase(s.lm[n - 1], s.rp[0]);
    }
    return -total / (2.0 * M_PI);
}

// Derivative discretization: trapezoid sum of <psiL| i Delta psiR> with
// centered differences along the sign-fixed chain.  A band chain may close
// with a -1 holonomy of the square-root branches; the seam differences are
// then taken in the local trivialization (neighbors re-signed), which is
// exactly the line-bundle-consistent difference.
inline std::complex<double> derivative_chain(std::vector<C2> r, std::vector<C2> l) {
    const std::size_t n = r.size();
    // Continuity is judged in the biorthogonal pairing <L_prev|R_cur>, which
    // stays sharply band-selective even where the two right vectors become
    // nearly parallel; a flipped square-root branch shows up as Re < 0.
    for (std::size_t k = 1; k < n; ++k) {
        if (lr(l[k - 1], r[k]).real() < 0.0) {
            for (auto& v : r[k]) v = -v;
            for (auto& v : l[k]) v = -v;
        }
    }
    const double holonomy = (lr(l[n - 1], r[0]).real() < 0.0) ? -1.0 : 1.0;

    std::complex<double> total(0.0, 0.0);
    const std::complex<double> i(0.0, 1.0);
    for (std::size_t k = 0; k < n; ++k) {
        C2 next = r[(k + 1) % n];
        C2 prev = r[(k + n - 1) % n];
        if (k + 1 == n)
            for (auto& v : next) v *= holonomy;
        if (k == 0)
            for (auto& v : prev) v *= holonomy;
        const C2 diff = {0.5 * (next[0] - prev[0]), 0.5 * (next[1] - prev[1])};
        total += i * lr(l[k], diff);
    }
    return total / (2.0 * M_PI);
}

inline std::complex<double> derivative_sum(const NodeStates& s) {
    if (!s.closure_swapped)
        return derivative_chain(s.rp, s.lp) + derivative_chain(s.rm, s.lm);
    // one cycle of twice the length: band plus flows into band minus
    std::vector<C2> r = s.rp, l = s.lp;
    r.insert(r.end(), s.rm.begin(), s.rm.end());
    l.insert(l.end(), s.lm.begin(), s.lm.end());
    return derivative_chain(std::move(r), std::move(l));
}

// Quadrature nodes for one side: roots per eigenvalue, ring outliers
// dropped (boundary-deficit roots sit many log-units off the ring), ordered
// counterclockwise about the origin.  Eigenvalues whose magnitude has
// underflowed (the boundary-deficit mode scales like the squared coupling)
// are skipped up front: their roots sit far off the ring and would be
// trimmed anyway, but they have no finite logarithm.
inline std::vector<std::complex<double>>
side_nodes(const WalkParams& p,
           const std::vector<std::complex<double>>& lambdas, ContourSide side) {
    std::vector<std::complex<double>> pts;
    pts.reserve(lambdas.size());
    for (const auto& lam : lambdas) {
        if (std::abs(lam) < 1e-100) continue;
        auto [b1, b2] = beta_roots(p, energy_of_lambda(lam));
        pts.push_back(side == ContourSide::inside ? b1 : b2);
    }
    std::vector<double> logs;
    logs.reserve(pts.size());
    for (const auto& b : pts) logs.push_back(std::log(std::abs(b)));
    std::vector<double> sorted_logs = logs;
    std::nth_element(sorted_logs.begin(), sorted_logs.begin() + sorted_logs.size() / 2,
                     sorted_logs.end());
    const double med = sorted_logs[sorted_logs.size() / 2];
    std::vector<std::complex<double>> keep;
    keep.reserve(pts.size());
    for (std::size_t k = 0; k < pts.size(); ++k)
        if (std::abs(logs[k] - med) <= 0.7) keep.push_back(pts[k]);
    if (keep.size() < 32)
        throw insufficient_sampling_error(
            "winding_number: contour has fewer than 32 usable points; increase L");
    sort_about_origin(keep);
    return keep;
}

inline WindingScan winding_scan_once(const WalkParams& p,
                                     const std::vector<double>& deltas) {
    WindingScan scan;
    for (double d : deltas) {
        WalkParams w = p;
        w.delta = d;
        const auto eig = eigendecompose(build_step_operator(w), 1e-8);
        std::vector<std::complex<double>> lambdas;
        lambdas.reserve(eig.size());
        for (const auto& pr : eig) lambdas.push_back(pr.value);
        WindingProbe in, out;
        for (ContourSide side : {ContourSide::inside, ContourSide::outside}) {
            const auto nodes = side_nodes(w, lambdas, side);
            scan.contour_size = std::max(scan.contour_size, nodes.size());
            const NodeStates st = tracked_states(w, nodes);
            WindingProbe& pr = (side == ContourSide::inside) ? in : out;
            pr.wilson = wilson_sum(st);
            pr.derivative = derivative_sum(st);
            pr.min_margin = st.min_margin;
            pr.closure_swapped = st.closure_swapped;
        }
        scan.deltas.push_back(d);
        scan.inside.push_back(in);
        scan.outside.push_back(out);
    }
    return scan;
}

} // namespace detail

// Full winding evaluation: one diagonalization per delta feeds the nodes of
// both contour sides and both integration schemes.  On an exceptional-point
// or coalescence error the evaluation restarts once with the chain length
// doubled; a second failure propagates to the caller.
inline WindingScan winding_scan(const WalkParams& p,
                                const std::vector<double>& deltas) {
    if (deltas.empty())
        throw invalid_params_error("winding_number: empty delta schedule");
    for (std::size_t k = 0; k < deltas.size(); ++k) {
        if (!(deltas[k] > 0.0))
            throw invalid_params_error("winding_number: deltas must be positive");
        if (k > 0 && !(deltas[k] < deltas[k - 1]))
            throw invalid_params_error("winding_number: deltas must be decreasing");
    }
    try {
        return detail::winding_scan_once(p, deltas);
    } catch (const exceptional_point_error&) {
    } catch (const coalescence_error&) {
    }
    WalkParams refined = p;
    refined.L *= 2;
    WindingScan scan = detail::winding_scan_once(refined, deltas);
    scan.refined = true;
    return scan;
}

// Assembles the invariant for one scheme/side from an existing scan, so a
// single scan can serve both schemes and both sides.
inline InvariantResult winding_from_scan(const WindingScan& scan,
                                         Scheme scheme,
                                         ContourSide side = ContourSide::inside) {
    if (side == ContourSide::obc)
        throw invalid_params_error(
            "winding_number: integrate the inside or outside contour family");
    const auto& probes =
        (side == ContourSide::inside) ? scan.inside : scan.outside;

    InvariantResult res;
    res.contour_size = scan.contour_size;
    for (std::size_t k = 0; k < scan.deltas.size(); ++k) {
        const std::complex<double> raw = (scheme == Scheme::wilson)
                                             ? probes[k].wilson
                                             : probes[k].derivative;
        res.v_raw_per_delta.emplace_back(scan.deltas[k], raw);
    }
    const std::size_t last = probes.size() - 1;
    const std::complex<double> raw_last = (scheme == Scheme::wilson)
                                              ? probes[last].wilson
                                              : probes[last].derivative;
    res.v = raw_last.real();
    res.v_quantized = nearest_half_integer(res.v);
    res.min_margin = probes[last].min_margin;

    res.schemes_agree =
        std::abs(probes[last].wilson - probes[last].derivative) < 5e-3;

    bool ok = probes.size() >= 2;
    if (ok) {
        const auto& a = res.v_raw_per_delta[probes.size() - 2].second;
        ok = std::abs(a - raw_last) < 1e-3;
    }
    if (ok) ok = res.min_margin >= 0.1;
    if (ok) ok = std::abs(res.v - res.v_quantized.value()) <= 5e-3;
    res.contour_trusted = ok;

    // Half-integer results are structurally side-dependent (the enclosed
    // branch pair straddles the collapsed ring), so only integer-quantized
    // values can earn the converged flag.
    res.converged =
        res.contour_trusted && res.schemes_agree && res.v_quantized.is_integer();
    return res;
}

inline InvariantResult winding_number(const WalkParams& p,
                                      const std::vector<double>& deltas,
                                      Scheme scheme,
                                      ContourSide side = ContourSide::inside) {
    if (side == ContourSide::obc)
        throw invalid_params_error(
            "winding_number: integrate the inside or outside contour family");
    return winding_from_scan(winding_scan(p, deltas), scheme, side);
}

} // namespace nbloch
