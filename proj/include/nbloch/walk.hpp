#pragma once

#include <cmath>
#include <complex>
#include <vector>

#include "errors.hpp"
#include "linalg.hpp"

namespace nbloch {

// One period of the split-step walk on L sites with a two-component coin.
// The boundary parameter delta interpolates between open (delta = 0) and
// periodic (delta = 1) chains; gamma sets the gain/loss imbalance of the
// coin amplifier diag(e^gamma, e^-gamma).
struct WalkParams {
    double theta1 = 0.0;
    double theta2 = 0.0;
    double gamma = 0.0;
    double delta = 0.0;
    std::size_t L = 0;
};

using StateVector = std::vector<std::complex<double>>;

struct PositionDistribution {
    std::vector<double> p; // per-site probability, normalized
    double norm_before = 0.0;
};

inline void validate(const WalkParams& w) {
    if (w.L < 4)
        throw invalid_params_error("walk: lattice must have at least 4 sites");
    if (!(w.delta >= 0.0))
        throw invalid_params_error("walk: boundary parameter must be >= 0");
    for (double v : {w.theta1, w.theta2, w.gamma, w.delta})
        if (!std::isfinite(v))
            throw invalid_params_error("walk: non-finite parameter");
}

// Full one-period operator in the site-major, coin-fastest layout
// (index = 2*site + coin; coin 0 carries e^gamma, coin 1 carries e^-gamma).
// Each coin block couples a site to at most its nearest neighbours plus the
// delta-weighted wrap terms; the corner wrap enters with weight delta^2 and
// supplants the corresponding on-site term so that delta = 1 reproduces the
// periodic chain exactly.
inline ComplexMatrix build_step_operator(const WalkParams& w) {
    validate(w);
    using C = std::complex<double>;
    const std::size_t L = w.L;
    const double c1 = std::cos(w.theta1 / 2.0), s1 = std::sin(w.theta1 / 2.0);
    const double c2 = std::cos(w.theta2 / 2.0), s2 = std::sin(w.theta2 / 2.0);
    const double g = std::exp(w.gamma), gi = std::exp(-w.gamma);
    const double d = w.delta, d2 = w.delta * w.delta;

    ComplexMatrix u(2 * L, 2 * L);
    auto at = [&](std::size_t i, int ci, std::size_t j, int cj) -> C& {
        return u(2 * i + ci, 2 * j + cj);
    };

    for (std::size_t i = 0; i < L; ++i) {
        // hop from the right neighbour (wraps L-1 -> 0 with weight delta)
        const std::size_t jr = (i + 1 < L) ? i + 1 : 0;
        const double wr = (i + 1 < L) ? 1.0 : d;
        at(i, 0, jr, 0) += wr * g * c1 * c2;
        at(i, 0, jr, 1) += -wr * g * s1 * c2;

        // hop from the left neighbour (wraps 0 -> L-1 with weight delta)
        const std::size_t jl = (i > 0) ? i - 1 : L - 1;
        const double wl = (i > 0) ? 1.0 : d;
        at(i, 1, jl, 1) += wl * gi * c1 * c2;
        at(i, 1, jl, 0) += wl * gi * s1 * c2;

        // on-site terms; in the e^gamma-row blocks the (L-1, L-1) entry is
        // replaced by the delta^2 corner wrap rather than added to it
        const double w00 = (i + 1 < L) ? 1.0 : d2;
        at(i, 0, i, 0) += -w00 * gi * s1 * s2;
        at(i, 0, i, 1) += -w00 * gi * c1 * s2;
        at(i, 1, i, 1) += -g * s1 * s2;
        at(i, 1, i, 0) += g * c1 * s2;
    }
    return u;
}

// Walker localized at the central site in the amplified coin component.
inline StateVector make_initial_state(std::size_t L) {
    if (L < 4)
        throw invalid_params_error("walk: lattice must have at least 4 sites");
    StateVector psi(2 * L, std::complex<double>(0.0, 0.0));
    psi[2 * ((L - 1) / 2) + 1] = std::complex<double>(1.0, 0.0);
    return psi;
}

// Site index -> signed position with the central site at x = 0.
inline long position_of_site(std::size_t site, std::size_t L) {
    return static_cast<long>(site) - static_cast<long>((L - 1) / 2);
}

// States after 0, 1, ..., steps applications of u.
inline std::vector<StateVector> evolve(const ComplexMatrix& u,
                                       const StateVector& psi0,
                                       std::size_t steps) {
    if (u.rows != u.cols || u.rows != psi0.size())
        throw dimension_error("evolve: operator and state size mismatch");
    std::vector<StateVector> out;
    out.reserve(steps + 1);
    out.push_back(psi0);
    for (std::size_t t = 0; t < steps; ++t)
        out.push_back(matvec(u, out.back()));
    return out;
}

inline PositionDistribution position_distribution(const StateVector& psi) {
    if (psi.size() < 8 || psi.size() % 2 != 0)
        throw dimension_error("position_distribution: state must hold 2L >= 8 amplitudes");
    PositionDistribution out;
    out.p.resize(psi.size() / 2);
    double total = 0.0;
    for (std::size_t s = 0; s < out.p.size(); ++s) {
        out.p[s] = std::norm(psi[2 * s]) + std::norm(psi[2 * s + 1]);
        total += out.p[s];
    }
    out.norm_before = std::sqrt(total);
    if (total <= 0.0)
        throw degenerate_state_error("position_distribution: zero-norm state");
    for (double& v : out.p) v /= total;
    return out;
}

} // namespace nbloch
