#include <catch2/catch_amalgamated.hpp>

#include <algorithm>
#include <complex>
#include <random>
#include <tuple>
#include <vector>

#include "nbloch/invariant.hpp"
#include "nbloch/spectrum.hpp"

using namespace nbloch;
using C = std::complex<double>;
using detail::lr;

namespace {

constexpr double kLogA = -0.19845093872383818; // ln 0.82

double cross_magnitude(const BandStates& b) {
    return std::max(std::abs(lr(b.psiL_plus, b.psiR_minus)),
                    std::abs(lr(b.psiL_minus, b.psiR_plus)));
}

} // namespace

TEST_CASE("h components satisfy the dispersion identity") {
    std::mt19937_64 rng(0x2026);
    std::uniform_real_distribution<double> th(0.05 * M_PI, 0.95 * M_PI);
    std::uniform_real_distribution<double> ga(-0.5, 0.5);
    std::uniform_real_distribution<double> lw(-0.6, 0.6);
    std::uniform_real_distribution<double> ph(0.0, 2.0 * M_PI);

    std::size_t checked = 0;
    for (int k = 0; k < 2000; ++k) {
        const WalkParams p{th(rng), th(rng), ga(rng), 1.0, 16};
        const C beta = std::polar(std::exp(lw(rng)), ph(rng));
        HComponents h;
        try {
            h = h_components(beta, p);
        } catch (const error&) {
            continue; // random sample landed on a band touching
        }
        const C hh = h.hx * h.hx + h.hy * h.hy + h.hz * h.hz;
        REQUIRE(std::abs(hh - h.e_plus * h.e_plus) < 1e-10);
        REQUIRE(std::abs(std::cos(h.e_plus) - bloch_cos(p, beta)) < 1e-12);
        REQUIRE(h.e_minus == -h.e_plus);
        ++checked;
    }
    REQUIRE(checked > 1900);
}

TEST_CASE("quasienergy branches match the transfer-block eigenvalues") {
    const WalkParams p{0.6 * M_PI, 0.58 * M_PI, kLogA, 1.0, 64};
    const TransferBlocks t = transfer_blocks(p);
    const GbzContour circle = obc_circle(p, 64);
    const C i(0.0, 1.0);
    for (const C& b : circle.betas) {
        std::array<C, 4> m;
        for (int k = 0; k < 4; ++k) m[k] = t.a_m[k] * b + t.a_s[k] + t.a_p[k] / b;
        const C tr = m[0] + m[3];
        const C det = m[0] * m[3] - m[1] * m[2];
        const C disc = std::sqrt(tr * tr - 4.0 * det);
        const C mu1 = (tr + disc) / 2.0;
        const C mu2 = (tr - disc) / 2.0;

        const HComponents h = h_components(b, p);
        const C e1 = std::exp(-i * h.e_plus);
        const C e2 = std::exp(-i * h.e_minus);
        const double direct = std::abs(mu1 - e1) + std::abs(mu2 - e2);
        const double crossed = std::abs(mu1 - e2) + std::abs(mu2 - e1);
        REQUIRE(std::min(direct, crossed) < 1e-10);
    }
}

TEST_CASE("special parameter limits zero out components exactly") {
    SECTION("gamma = 0 kills hz at any beta") {
        const WalkParams p{0.37 * M_PI, 0.58 * M_PI, 0.0, 1.0, 16};
        const HComponents h = h_components(std::polar(1.3, 0.7), p);
        REQUIRE(h.hz == C(0.0, 0.0));
    }
    SECTION("theta2 = 0 kills hz and reduces hx to the hopping term") {
        const WalkParams p{0.37 * M_PI, 0.0, kLogA, 1.0, 16};
        const C beta = std::polar(1.1, 0.4);
        const HComponents h = h_components(beta, p);
        REQUIRE(h.hz == C(0.0, 0.0));
        const double a = std::exp(p.gamma);
        const C pre = h.e_plus / (C(0.0, 2.0) * std::sin(h.e_plus));
        const C expected = -pre * (beta * a - 1.0 / (beta * a));
        REQUIRE(std::abs(h.hx - expected) < 1e-12);
    }
    SECTION("beta = 0 is rejected") {
        const WalkParams p{0.37 * M_PI, 0.58 * M_PI, kLogA, 1.0, 16};
        REQUIRE_THROWS_AS(h_components(C(0.0, 0.0), p), singular_input_error);
    }
}

TEST_CASE("band states are biorthonormal with vanishing cross terms") {
    std::mt19937_64 rng(0x777);
    std::uniform_real_distribution<double> th(0.1 * M_PI, 0.9 * M_PI);
    std::uniform_real_distribution<double> ga(-0.4, 0.4);
    std::uniform_real_distribution<double> lw(-0.4, 0.4);
    std::uniform_real_distribution<double> ph(0.0, 2.0 * M_PI);

    std::size_t checked = 0;
    for (int k = 0; k < 500; ++k) {
        const WalkParams p{th(rng), th(rng), ga(rng), 1.0, 16};
        const C beta = std::polar(std::exp(lw(rng)), ph(rng));
        BandStates b;
        try {
            b = band_states(h_components(beta, p));
        } catch (const error&) {
            continue;
        }
        REQUIRE(std::abs(lr(b.psiL_plus, b.psiR_plus) - 1.0) < 1e-8);
        REQUIRE(std::abs(lr(b.psiL_minus, b.psiR_minus) - 1.0) < 1e-8);
        REQUIRE(cross_magnitude(b) < 1e-8);
        ++checked;
    }
    REQUIRE(checked > 450);
}

TEST_CASE("unitary-limit left states are conjugate right states") {
    const WalkParams p{0.6 * M_PI, 0.58 * M_PI, 0.0, 1.0, 64};
    for (int k = 0; k < 64; ++k) {
        const C beta = std::polar(1.0, 2.0 * M_PI * k / 64.0);
        const BandStates b = band_states(h_components(beta, p));
        for (auto [l, r] : {std::pair{b.psiL_plus, b.psiR_plus},
                            std::pair{b.psiL_minus, b.psiR_minus}}) {
            // proportionality of the left row to the conjugated right column
            const C det = l[0] * std::conj(r[1]) - l[1] * std::conj(r[0]);
            const double n1 = std::hypot(std::abs(l[0]), std::abs(l[1]));
            const double n2 = std::hypot(std::abs(r[0]), std::abs(r[1]));
            REQUIRE(std::abs(det) / (n1 * n2) < 1e-12);
        }
    }
}

TEST_CASE("cross-overlap amplifies toward a band touching") {
    const WalkParams p{0.6 * M_PI, 0.58 * M_PI, kLogA, 1.0, 64};
    std::vector<double> crosses;
    for (double eps : {1e-1, 1e-3, 1e-5, 3e-8}) {
        const auto [b1, b2] = beta_roots(p, C(eps, 0.0));
        crosses.push_back(cross_magnitude(band_states(h_components(b1, p))));
    }
    REQUIRE(std::is_sorted(crosses.begin(), crosses.end()));
    REQUIRE(crosses.back() > 100.0 * crosses.front());
    REQUIRE(crosses.front() < 1e-10);
    REQUIRE(crosses.back() < 1e-6);
}

TEST_CASE("band-touching guards trigger") {
    SECTION("an exact touching is refused") {
        // theta1 = theta2 = 0 gives cos E = (beta a + 1/(beta a))/2, which is
        // exactly 1 at beta = 1/a
        const WalkParams p{0.0, 0.0, kLogA, 1.0, 16};
        REQUIRE_THROWS_AS(h_components(C(1.0 / 0.82, 0.0), p),
                          exceptional_point_error);
    }
    SECTION("the near-touching window is flagged and stays accurate") {
        const WalkParams p{0.0, 0.0, kLogA, 1.0, 16};
        const C near(1.0 + 1e-9, 1e-9);
        const HComponents h = h_components(near / 0.82, p);
        REQUIRE(h.near_singular);
        const C hh = h.hx * h.hx + h.hy * h.hy + h.hz * h.hz;
        REQUIRE(std::abs(hh - h.e_plus * h.e_plus) < 1e-10);

        const C off(1.0 + 1e-7, 1e-7);
        REQUIRE_FALSE(h_components(off / 0.82, p).near_singular);
    }
    SECTION("coalescing E and hz is refused") {
        HComponents h;
        h.hx = C(0.3, 0.0);
        h.hy = C(0.0, 0.0);
        h.hz = C(0.7, 0.0);
        h.e_plus = C(0.7, 0.0);
        h.e_minus = C(-0.7, 0.0);
        REQUIRE_THROWS_AS(band_states(h), coalescence_error);
    }
}

TEST_CASE("half-integer snapping picks the nearest grid value") {
    auto q = nearest_half_integer(0.24);
    REQUIRE((q.num == 0 && q.den == 1 && q.is_integer()));
    q = nearest_half_integer(0.26);
    REQUIRE((q.num == 1 && q.den == 2 && !q.is_integer()));
    REQUIRE(q.value() == 0.5);
    q = nearest_half_integer(1.04);
    REQUIRE((q.num == 1 && q.den == 1));
    q = nearest_half_integer(-0.74);
    REQUIRE((q.num == -1 && q.den == 2));
    q = nearest_half_integer(-1.26);
    REQUIRE((q.num == -3 && q.den == 2));
    REQUIRE(q.value() == -1.5);
    q = nearest_half_integer(-0.98);
    REQUIRE((q.num == -1 && q.den == 1));
}

TEST_CASE("winding ladder input validation") {
    const WalkParams p{0.9 * M_PI, 0.58 * M_PI, kLogA, 1.0, 64};
    REQUIRE_THROWS_AS(winding_scan(p, {}), invalid_params_error);
    REQUIRE_THROWS_AS(winding_scan(p, {1e-1, -1e-2}), invalid_params_error);
    REQUIRE_THROWS_AS(winding_scan(p, {1e-2, 1e-1}), invalid_params_error);
    REQUIRE_THROWS_AS(winding_number(p, {1e-1, 1e-2}, Scheme::wilson,
                                     ContourSide::obc),
                      invalid_params_error);

    const WalkParams tiny{0.9 * M_PI, 0.58 * M_PI, kLogA, 1.0, 8};
    REQUIRE_THROWS_AS(winding_scan(tiny, {1e-1, 1e-2}),
                      insufficient_sampling_error);
}

TEST_CASE("winding at a gapped nontrivial point") {
    const WalkParams p{0.9 * M_PI, 0.58 * M_PI, kLogA, 1.0, 128};
    const WindingScan scan = winding_scan(p, default_delta_schedule());
    REQUIRE_FALSE(scan.refined);
    REQUIRE(scan.contour_size >= 200);
    for (const auto& probe : scan.inside) REQUIRE_FALSE(probe.closure_swapped);

    for (Scheme s : {Scheme::wilson, Scheme::derivative}) {
        for (ContourSide side : {ContourSide::inside, ContourSide::outside}) {
            const InvariantResult r = winding_from_scan(scan, s, side);
            INFO("scheme " << (s == Scheme::wilson ? "wilson" : "derivative")
                           << " side "
                           << (side == ContourSide::inside ? "inside" : "outside"));
            REQUIRE(r.converged);
            REQUIRE(r.contour_trusted);
            REQUIRE(r.schemes_agree);
            REQUIRE((r.v_quantized.num == -1 && r.v_quantized.den == 1));
            REQUIRE(std::abs(r.v + 1.0) < 5e-3);
            REQUIRE(r.min_margin > 0.9);
            // the trace has settled: the two smallest couplings agree
            const auto& trace = r.v_raw_per_delta;
            REQUIRE(trace.size() == 5);
            REQUIRE(std::abs(trace[4].second - trace[3].second) < 1e-3);
        }
    }
}

TEST_CASE("winding at a gapped trivial point") {
    const WalkParams p{0.2 * M_PI, 0.58 * M_PI, kLogA, 1.0, 128};
    const WindingScan scan = winding_scan(p, default_delta_schedule());
    for (Scheme s : {Scheme::wilson, Scheme::derivative}) {
        for (ContourSide side : {ContourSide::inside, ContourSide::outside}) {
            const InvariantResult r = winding_from_scan(scan, s, side);
            REQUIRE(r.converged);
            REQUIRE((r.v_quantized.num == 0 && r.v_quantized.den == 1));
            REQUIRE(std::abs(r.v) < 5e-3);
        }
    }
}

TEST_CASE("an exceptional point reads as a trusted half-odd value") {
    const WalkParams p{0.811 * M_PI, 0.9 * M_PI, kLogA, 1.0, 64};
    const WindingScan scan = winding_scan(p, default_delta_schedule());
    // one loop around the contour exchanges the bands at every coupling
    for (const auto& probe : scan.inside) REQUIRE(probe.closure_swapped);
    for (const auto& probe : scan.outside) REQUIRE(probe.closure_swapped);

    const InvariantResult in = winding_from_scan(scan, Scheme::wilson);
    REQUIRE(in.contour_trusted);
    REQUIRE(in.schemes_agree);
    REQUIRE_FALSE(in.converged); // half-odd values never earn the flag
    REQUIRE((in.v_quantized.num == -1 && in.v_quantized.den == 2));
    REQUIRE(std::abs(in.v + 0.5) < 5e-3);
    REQUIRE(in.min_margin > 0.5);

    // the two contour sides differ by exactly the enclosed branch pair
    const InvariantResult out =
        winding_from_scan(scan, Scheme::wilson, ContourSide::outside);
    REQUIRE((out.v_quantized.num == 1 && out.v_quantized.den == 2));
    REQUIRE(std::abs(out.v - in.v - 1.0) < 2e-2);

    const double gap = floquet_gap(gbc_spectrum(WalkParams{
        p.theta1, p.theta2, p.gamma, 0.0, p.L}));
    REQUIRE(gap < 0.05);
}

TEST_CASE("a gapless in-band point refuses to converge") {
    const WalkParams p{0.6 * M_PI, 0.58 * M_PI, kLogA, 1.0, 128};
    const WindingScan scan = winding_scan(p, default_delta_schedule());
    const InvariantResult in = winding_from_scan(scan, Scheme::wilson);
    const InvariantResult out =
        winding_from_scan(scan, Scheme::wilson, ContourSide::outside);
    REQUIRE_FALSE(in.converged);
    REQUIRE_FALSE(out.converged);
    // the raw side readings straddle the transition: 0 inside, -1 outside
    REQUIRE(std::abs(in.v) < 2e-2);
    REQUIRE(std::abs(out.v + 1.0) < 2e-2);
}

TEST_CASE("winding sums are independent of the chain seam") {
    for (auto [t1, t2] : {std::pair{0.9 * M_PI, 0.58 * M_PI},
                          std::pair{0.811 * M_PI, 0.9 * M_PI}}) {
        WalkParams p{t1, t2, kLogA, 1e-2, 64};
        const auto eig = eigendecompose(build_step_operator(p), 1e-8);
        std::vector<C> lambdas;
        for (const auto& pr : eig) lambdas.push_back(pr.value);
        auto nodes = detail::side_nodes(p, lambdas, ContourSide::inside);

        const detail::NodeStates base = detail::tracked_states(p, nodes);
        const double w0 = detail::wilson_sum(base);
        const C d0 = detail::derivative_sum(base);
        for (std::size_t rot : {std::size_t(1), std::size_t(17), nodes.size() / 2}) {
            auto rotated = nodes;
            std::rotate(rotated.begin(), rotated.begin() + rot, rotated.end());
            const detail::NodeStates st = detail::tracked_states(p, rotated);
            REQUIRE(std::abs(detail::wilson_sum(st) - w0) < 1e-12);
            REQUIRE(std::abs(detail::derivative_sum(st) - d0) < 1e-12);
        }
    }
}

TEST_CASE("joint branch flips leave both schemes unchanged") {
    WalkParams p{0.9 * M_PI, 0.58 * M_PI, kLogA, 1e-2, 64};
    const auto eig = eigendecompose(build_step_operator(p), 1e-8);
    std::vector<C> lambdas;
    for (const auto& pr : eig) lambdas.push_back(pr.value);
    const auto nodes = detail::side_nodes(p, lambdas, ContourSide::inside);

    detail::NodeStates st = detail::tracked_states(p, nodes);
    const double w0 = detail::wilson_sum(st);
    const C d0 = detail::derivative_sum(st);

    // a square-root branch flip negates a left-right pair jointly
    std::mt19937_64 rng(7);
    for (std::size_t k = 0; k < st.rp.size(); ++k) {
        if (rng() & 1) {
            for (auto& v : st.rp[k]) v = -v;
            for (auto& v : st.lp[k]) v = -v;
        }
        if (rng() & 1) {
            for (auto& v : st.rm[k]) v = -v;
            for (auto& v : st.lm[k]) v = -v;
        }
    }
    REQUIRE(std::abs(detail::wilson_sum(st) - w0) < 1e-12);
    REQUIRE(std::abs(detail::derivative_sum(st) - d0) < 1e-12);
}

TEST_CASE("quantization and path independence on a parameter grid") {
    const auto deltas = default_delta_schedule();
    std::size_t converged_count = 0;
    std::size_t trusted_half_odd = 0;
    for (int i = 0; i < 10; ++i) {
        for (int j = 0; j < 10; ++j) {
            const double t1 = (0.1 + 0.8 * i / 9.0) * M_PI;
            const double t2 = (0.1 + 0.8 * j / 9.0) * M_PI;
            const WalkParams p{t1, t2, kLogA, 1.0, 64};
            const WindingScan scan = winding_scan(p, deltas);
            const InvariantResult in = winding_from_scan(scan, Scheme::wilson);
            const InvariantResult out =
                winding_from_scan(scan, Scheme::wilson, ContourSide::outside);

            for (const InvariantResult* r : {&in, &out}) {
                if (r->converged) {
                    ++converged_count;
                    REQUIRE(std::abs(r->v - std::round(r->v)) < 5e-3);
                }
                if (r->contour_trusted && !r->v_quantized.is_integer())
                    ++trusted_half_odd;
            }
            if (in.converged && out.converged) {
                REQUIRE(in.v_quantized.num == out.v_quantized.num);
                REQUIRE(in.v_quantized.den == out.v_quantized.den);
            }
        }
    }
    REQUIRE(converged_count >= 80);  // measured 136 of 200 side-results
    REQUIRE(trusted_half_odd >= 1);  // the exceptional wedge is present
}

TEST_CASE("unitary limit quantizes to integers") {
    const auto deltas = default_delta_schedule();
    for (int i = 0; i < 8; ++i) {
        for (int j = 0; j < 8; ++j) {
            const double t1 = (0.1 + 0.8 * i / 7.0) * M_PI;
            const double t2 = (0.1 + 0.8 * j / 7.0) * M_PI;
            const WalkParams p{t1, t2, 0.0, 1.0, 64};
            const InvariantResult r = winding_number(p, deltas, Scheme::wilson);
            INFO("t1=" << t1 / M_PI << "pi t2=" << t2 / M_PI << "pi v=" << r.v);
            REQUIRE(r.v_quantized.is_integer());
        }
    }
}

TEST_CASE("class changes along a parameter line coincide with gap dips") {
    const auto deltas = default_delta_schedule();
    struct Point {
        double t1;
        double gap;
        bool converged;
        long num;
    };
    std::vector<Point> line;
    for (int k = 0; k < 19; ++k) {
        const double t1 = (0.05 + 0.05 * k) * M_PI;
        const WalkParams p{t1, 0.58 * M_PI, kLogA, 1.0, 64};
        const InvariantResult r = winding_number(p, deltas, Scheme::wilson);
        const double gap = floquet_gap(gbc_spectrum(WalkParams{
            t1, 0.58 * M_PI, kLogA, 0.0, 64}));
        line.push_back({t1, gap, r.converged, r.v_quantized.num});
    }

    // the line starts trivial and ends in the nontrivial phase
    std::vector<std::size_t> conv;
    for (std::size_t k = 0; k < line.size(); ++k)
        if (line[k].converged) conv.push_back(k);
    REQUIRE(conv.size() >= 2);
    REQUIRE(line[conv.front()].num == 0);
    REQUIRE(line[conv.back()].num == -1);

    std::size_t changes = 0;
    for (std::size_t c = 1; c < conv.size(); ++c) {
        if (line[conv[c]].num == line[conv[c - 1]].num) continue;
        ++changes;
        double dip = 1e300;
        for (std::size_t k = conv[c - 1]; k <= conv[c]; ++k)
            dip = std::min(dip, line[k].gap);
        REQUIRE(dip < 0.05);
    }
    REQUIRE(changes == 1);
}
