#include <catch2/catch_amalgamated.hpp>

#include <complex>
#include <random>
#include <vector>

#include "nbloch/walk.hpp"

using namespace nbloch;
using C = std::complex<double>;

namespace {

C det_lu(ComplexMatrix m) {
    const std::size_t n = m.rows;
    C det(1.0, 0.0);
    for (std::size_t k = 0; k < n; ++k) {
        std::size_t piv = k;
        double best = std::abs(m(k, k));
        for (std::size_t r = k + 1; r < n; ++r)
            if (std::abs(m(r, k)) > best) { best = std::abs(m(r, k)); piv = r; }
        if (piv != k) {
            for (std::size_t j = k; j < n; ++j) std::swap(m(k, j), m(piv, j));
            det = -det;
        }
        if (m(k, k) == C(0.0)) return C(0.0);
        det *= m(k, k);
        for (std::size_t r = k + 1; r < n; ++r) {
            const C f = m(r, k) / m(k, k);
            for (std::size_t j = k; j < n; ++j) m(r, j) -= f * m(k, j);
        }
    }
    return det;
}

WalkParams generic(std::size_t L, double delta) {
    WalkParams w;
    w.theta1 = 0.6 * M_PI;
    w.theta2 = 0.58 * M_PI;
    w.gamma = std::log(0.82);
    w.delta = delta;
    w.L = L;
    return w;
}

} // namespace

TEST_CASE("step operator: pure shifts when both coins are trivial") {
    WalkParams w;
    w.theta1 = 0.0;
    w.theta2 = 0.0;
    w.gamma = 0.3;
    w.delta = 0.0;
    w.L = 6;
    auto u = build_step_operator(w);
    const double g = std::exp(0.3), gi = std::exp(-0.3);

    // coin 0 occupying site s moves to s-1 with weight e^gamma
    for (std::size_t s = 1; s < w.L; ++s) {
        StateVector psi(2 * w.L, C(0.0));
        psi[2 * s] = C(1.0, 0.0);
        auto out = matvec(u, psi);
        for (std::size_t i = 0; i < out.size(); ++i) {
            if (i == 2 * (s - 1))
                REQUIRE(std::abs(out[i] - C(g, 0.0)) < 1e-15);
            else
                REQUIRE(std::abs(out[i]) < 1e-15);
        }
    }
    // coin 1 occupying site s moves to s+1 with weight e^-gamma
    for (std::size_t s = 0; s + 1 < w.L; ++s) {
        StateVector psi(2 * w.L, C(0.0));
        psi[2 * s + 1] = C(1.0, 0.0);
        auto out = matvec(u, psi);
        for (std::size_t i = 0; i < out.size(); ++i) {
            if (i == 2 * (s + 1) + 1)
                REQUIRE(std::abs(out[i] - C(gi, 0.0)) < 1e-15);
            else
                REQUIRE(std::abs(out[i]) < 1e-15);
        }
    }
    // open ends: amplitude walking off the chain is dropped
    StateVector left(2 * w.L, C(0.0));
    left[0] = C(1.0, 0.0);
    for (const C& v : matvec(u, left)) REQUIRE(std::abs(v) < 1e-15);
    StateVector right(2 * w.L, C(0.0));
    right[2 * (w.L - 1) + 1] = C(1.0, 0.0);
    for (const C& v : matvec(u, right)) REQUIRE(std::abs(v) < 1e-15);
}

TEST_CASE("step operator: trivial-coin wrap carries weight delta") {
    WalkParams w;
    w.theta1 = 0.0;
    w.theta2 = 0.0;
    w.gamma = 0.0;
    w.delta = 0.25;
    w.L = 5;
    auto u = build_step_operator(w);
    StateVector psi(2 * w.L, C(0.0));
    psi[2 * 0] = C(1.0, 0.0); // coin 0 at the first site wraps to the last
    auto out = matvec(u, psi);
    REQUIRE(std::abs(out[2 * (w.L - 1)] - C(0.25, 0.0)) < 1e-15);
    psi.assign(2 * w.L, C(0.0));
    psi[2 * (w.L - 1) + 1] = C(1.0, 0.0); // coin 1 at the last site wraps to the first
    out = matvec(u, psi);
    REQUIRE(std::abs(out[1] - C(0.25, 0.0)) < 1e-15);
}

TEST_CASE("step operator: unitary at gamma=0, delta=1") {
    WalkParams w = generic(12, 1.0);
    w.gamma = 0.0;
    auto u = build_step_operator(w);
    const std::size_t n = u.rows;
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < n; ++j) {
            C dot(0.0, 0.0);
            for (std::size_t k = 0; k < n; ++k)
                dot += std::conj(u(k, i)) * u(k, j);
            const C want = (i == j) ? C(1.0, 0.0) : C(0.0, 0.0);
            REQUIRE(std::abs(dot - want) < 1e-12);
        }
    }
}

TEST_CASE("step operator: determinant equals delta squared") {
    for (double delta : {0.0, 0.3, 0.77, 1.0}) {
        auto u = build_step_operator(generic(9, delta));
        const C d = det_lu(u);
        INFO("delta = " << delta << " det = " << d);
        REQUIRE(std::abs(d - C(delta * delta, 0.0)) < 1e-10);
    }
}

TEST_CASE("step operator: each coin block column holds at most two entries") {
    auto u = build_step_operator(generic(11, 0.5));
    const std::size_t L = 11;
    for (int ci = 0; ci < 2; ++ci) {
        for (int cj = 0; cj < 2; ++cj) {
            for (std::size_t j = 0; j < L; ++j) {
                int nz = 0;
                for (std::size_t i = 0; i < L; ++i)
                    if (std::abs(u(2 * i + ci, 2 * j + cj)) > 0.0) ++nz;
                REQUIRE(nz <= 2);
            }
        }
    }
    // full columns never exceed four entries
    for (std::size_t j = 0; j < 2 * L; ++j) {
        int nz = 0;
        for (std::size_t i = 0; i < 2 * L; ++i)
            if (std::abs(u(i, j)) > 0.0) ++nz;
        REQUIRE(nz <= 4);
    }
}

TEST_CASE("step operator: couples only nearest-neighbour sites (mod wrap)") {
    const std::size_t L = 10;
    auto u = build_step_operator(generic(L, 0.9));
    for (std::size_t i = 0; i < L; ++i) {
        for (std::size_t j = 0; j < L; ++j) {
            const long d = std::labs(static_cast<long>(i) - static_cast<long>(j));
            const bool allowed = (d <= 1) || (d == static_cast<long>(L) - 1);
            if (allowed) continue;
            for (int ci = 0; ci < 2; ++ci)
                for (int cj = 0; cj < 2; ++cj)
                    REQUIRE(std::abs(u(2 * i + ci, 2 * j + cj)) == 0.0);
        }
    }
}

TEST_CASE("step operator: open-chain corner on-site terms vanish") {
    WalkParams w = generic(8, 0.0);
    auto u = build_step_operator(w);
    const std::size_t corner = 2 * (w.L - 1);
    REQUIRE(std::abs(u(corner, corner)) == 0.0);
    REQUIRE(std::abs(u(corner, corner + 1)) == 0.0);
    // the e^-gamma-row on-site terms survive at the same site
    REQUIRE(std::abs(u(corner + 1, corner + 1)) > 0.1);
}

TEST_CASE("evolve: zero steps returns the initial state only") {
    auto u = build_step_operator(generic(7, 0.5));
    auto psi0 = make_initial_state(7);
    auto traj = evolve(u, psi0, 0);
    REQUIRE(traj.size() == 1);
    for (std::size_t i = 0; i < psi0.size(); ++i)
        REQUIRE(traj[0][i] == psi0[i]);
}

TEST_CASE("evolve: agrees with the matrix-power oracle") {
    auto w = generic(9, 0.4);
    auto u = build_step_operator(w);
    auto psi0 = make_initial_state(w.L);
    const std::size_t N = 7;
    auto traj = evolve(u, psi0, N);
    REQUIRE(traj.size() == N + 1);

    ComplexMatrix up = ComplexMatrix::identity(2 * w.L);
    for (std::size_t t = 0; t < N; ++t) up = matmul(u, up);
    auto want = matvec(up, psi0);
    double err = 0.0;
    for (std::size_t i = 0; i < want.size(); ++i)
        err = std::max(err, std::abs(want[i] - traj[N][i]));
    REQUIRE(err < 1e-12);
}

TEST_CASE("evolve: trivial coins give ballistic transport of the seeded coin") {
    WalkParams w;
    w.theta1 = 0.0;
    w.theta2 = 0.0;
    w.gamma = 0.0;
    w.delta = 0.0;
    w.L = 17; // 2N+3 with N = 7
    auto u = build_step_operator(w);
    auto psi0 = make_initial_state(w.L);
    const std::size_t N = 7;
    auto traj = evolve(u, psi0, N);
    auto dist = position_distribution(traj.back());
    const std::size_t center = (w.L - 1) / 2;
    for (std::size_t s = 0; s < w.L; ++s) {
        if (s == center + N)
            REQUIRE(std::abs(dist.p[s] - 1.0) < 1e-14);
        else
            REQUIRE(dist.p[s] < 1e-14);
    }
    REQUIRE(std::abs(dist.norm_before - 1.0) < 1e-14);
}

TEST_CASE("evolve: norm preserved to 1e-12 over 100 steps when unitary") {
    WalkParams w = generic(21, 1.0);
    w.gamma = 0.0;
    auto u = build_step_operator(w);
    auto psi0 = make_initial_state(w.L);
    auto traj = evolve(u, psi0, 100);
    double nrm = 0.0;
    for (const C& v : traj.back()) nrm += std::norm(v);
    REQUIRE(std::abs(std::sqrt(nrm) - 1.0) < 1e-12);
}

TEST_CASE("position_distribution: normalizes and reports the prior norm") {
    StateVector psi(2 * 5, C(0.0));
    psi[0] = C(1.0, 0.0);
    psi[3] = C(0.0, 2.0);
    auto d = position_distribution(psi);
    REQUIRE(d.p.size() == 5);
    REQUIRE(std::abs(d.norm_before - std::sqrt(5.0)) < 1e-15);
    double sum = 0.0;
    for (double v : d.p) sum += v;
    REQUIRE(std::abs(sum - 1.0) < 1e-15);
    REQUIRE(std::abs(d.p[0] - 0.2) < 1e-15);
    REQUIRE(std::abs(d.p[1] - 0.8) < 1e-15);
}

TEST_CASE("position helpers: centre site maps to x = 0") {
    REQUIRE(position_of_site(8, 17) == 0);
    REQUIRE(position_of_site(0, 17) == -8);
    REQUIRE(position_of_site(16, 17) == 8);
}

TEST_CASE("validation: rejects tiny lattices, negative delta, non-finite params") {
    WalkParams w = generic(3, 0.5);
    REQUIRE_THROWS_AS(build_step_operator(w), invalid_params_error);
    w = generic(8, -0.1);
    REQUIRE_THROWS_AS(build_step_operator(w), invalid_params_error);
    w = generic(8, 0.5);
    w.theta1 = std::numeric_limits<double>::infinity();
    REQUIRE_THROWS_AS(build_step_operator(w), invalid_params_error);
    REQUIRE_THROWS_AS(make_initial_state(2), invalid_params_error);
    StateVector zero(2 * 6, C(0.0));
    REQUIRE_THROWS_AS(position_distribution(zero), degenerate_state_error);
}
