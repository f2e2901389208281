#pragma once

#include <cmath>
#include <complex>
#include <utility>

#include "errors.hpp"

namespace nbloch {

// Roots of the monic quadratic z^2 + b z + c = 0.
// Cancellation-safe: the larger-magnitude root comes from the sign-stable
// formula, the other from the product of roots; one Newton step polishes
// both.  Ordering contract: |first| <= |second|, ties broken by the smaller
// principal argument.
inline std::pair<std::complex<double>, std::complex<double>>
solve_quadratic(std::complex<double> b, std::complex<double> c) {
    using C = std::complex<double>;
    if (!std::isfinite(b.real()) || !std::isfinite(b.imag()) ||
        !std::isfinite(c.real()) || !std::isfinite(c.imag()))
        throw singular_input_error("solve_quadratic: non-finite coefficient");

    C big, small;
    if (b == C(0)) {
        big = std::sqrt(-c);
        small = -big;
    } else {
        const C disc = std::sqrt(b * b - 4.0 * c);
        // pick the sign that avoids cancellation in -b -/+ disc
        const C q = (std::real(std::conj(b) * disc) >= 0.0) ? C(-0.5) * (b + disc)
                                                            : C(-0.5) * (b - disc);
        big = q;                       // |q| is the larger root magnitude
        small = (q != C(0)) ? c / q : -b;
    }

    auto polish = [&](C z) {
        const C f = (z + b) * z + c;
        const C fp = 2.0 * z + b;
        if (std::abs(fp) > 0.0) z -= f / fp;
        return z;
    };
    big = polish(big);
    small = polish(small);

    const double m1 = std::abs(small), m2 = std::abs(big);
    if (m1 < m2) return {small, big};
    if (m2 < m1) return {big, small};
    return (std::arg(small) <= std::arg(big)) ? std::make_pair(small, big)
                                              : std::make_pair(big, small);
}

} // namespace nbloch
