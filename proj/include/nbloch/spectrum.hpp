#pragma once

#include <cmath>
#include <complex>
#include <vector>

#include "errors.hpp"
#include "linalg.hpp"
#include "walk.hpp"

namespace nbloch {

// Quasienergy spectrum of one walk period under the boundary parameter
// delta.  Eigenvalues lambda of the step operator map to energies
// E = i Log lambda, so lambda = e^{-iE}; Re E lives in (-pi, pi] with the
// branch cut resolved toward +pi.
struct SpectrumResult {
    WalkParams params;
    std::vector<std::complex<double>> lambdas;
    std::vector<std::complex<double>> energies;
};

inline std::complex<double> energy_of_lambda(std::complex<double> lambda) {
    if (std::abs(lambda) == 0.0)
        throw singular_input_error("energy_of_lambda: zero eigenvalue has no log");
    const std::complex<double> e =
        std::complex<double>(0.0, 1.0) * std::log(lambda);
    double re = e.real();
    if (re <= -M_PI) re += 2.0 * M_PI;
    return {re, e.imag()};
}

inline SpectrumResult gbc_spectrum(const WalkParams& w) {
    SpectrumResult out;
    out.params = w;
    const ComplexMatrix u = build_step_operator(w);
    auto pairs = eigendecompose(u, 1e-8);
    out.lambdas.reserve(pairs.size());
    out.energies.reserve(pairs.size());
    for (const auto& p : pairs) {
        out.lambdas.push_back(p.value);
        // Fully open boundaries make the truncated shifts singular, so a
        // boundary mode can come out with an exactly zero eigenvalue.  Its
        // quasienergy is represented at the numeric floor (Im E ~ -690, an
        // infinitely fast decaying mode); |e^{-iE} - lambda| stays far below
        // tolerance, and gap or contour consumers ignore it naturally.
        std::complex<double> lam = p.value;
        if (std::abs(lam) < 1e-300)
            lam = (lam == std::complex<double>(0.0, 0.0))
                      ? std::complex<double>(1e-300, 0.0)
                      : lam / std::abs(lam) * 1e-300;
        out.energies.push_back(energy_of_lambda(lam));
    }
    return out;
}

// Distance of the spectrum from the two gap-closing energies 0 and +-pi,
// measured as a complex modulus.
inline double floquet_gap(const SpectrumResult& s) {
    if (s.energies.empty())
        throw dimension_error("floquet_gap: empty spectrum");
    double gap = 1e300;
    for (const auto& e : s.energies) {
        const double d0 = std::abs(e);
        const double dp = std::abs(e - std::complex<double>(M_PI, 0.0));
        const double dm = std::abs(e + std::complex<double>(M_PI, 0.0));
        gap = std::min({gap, d0, dp, dm});
    }
    return gap;
}

// --- translation-invariant dispersion helpers -------------------------------
//
// For the periodic chain the step operator block-diagonalizes over momentum;
// with alpha = e^gamma and beta on the unit circle (or on a general contour
// for non-periodic boundaries),
//   cos E = -(alpha + 1/alpha)/2 sin(t1/2) sin(t2/2)
//           + (beta alpha + 1/(beta alpha))/2 cos(t1/2) cos(t2/2).

inline std::complex<double> bloch_cos(const WalkParams& w,
                                      std::complex<double> beta) {
    const double c1 = std::cos(w.theta1 / 2.0), s1 = std::sin(w.theta1 / 2.0);
    const double c2 = std::cos(w.theta2 / 2.0), s2 = std::sin(w.theta2 / 2.0);
    const double a = std::exp(w.gamma);
    const std::complex<double> ba = beta * a;
    return -(a + 1.0 / a) / 2.0 * (s1 * s2) + (ba + 1.0 / ba) / 2.0 * (c1 * c2);
}

// Both quasienergy branches at a given beta: E and -E with E = arccos(...).
inline std::pair<std::complex<double>, std::complex<double>>
dispersion_energies(const WalkParams& w, std::complex<double> beta) {
    const std::complex<double> e = std::acos(bloch_cos(w, beta));
    return {e, -e};
}

} // namespace nbloch
