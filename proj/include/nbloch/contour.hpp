#pragma once

#include <algorithm>
#include <cmath>
#include <complex>
#include <vector>

#include "errors.hpp"

namespace nbloch {

// Orders a scattered set of points on a closed loop into counter-clockwise
// traversal order by principal argument about the centroid.  The first point
// is the one with the smallest non-negative angle.  At least 8 points are
// required; points that share an angle about the centroid but sit at
// different radii indicate the samples do not lie on a single closed loop.
inline std::vector<std::complex<double>>
order_contour(std::vector<std::complex<double>> pts) {
    using C = std::complex<double>;
    if (pts.size() < 8)
        throw insufficient_sampling_error(
            "order_contour: need at least 8 points, got " +
            std::to_string(pts.size()));

    C centroid(0.0, 0.0);
    for (const C& p : pts) centroid += p;
    centroid /= static_cast<double>(pts.size());

    struct Node {
        double ang;   // in [0, 2*pi)
        double rad;
        C p;
    };
    std::vector<Node> nodes;
    nodes.reserve(pts.size());
    const double two_pi = 2.0 * M_PI;
    for (const C& p : pts) {
        double a = std::arg(p - centroid);
        if (a < 0.0) a += two_pi;
        nodes.push_back({a, std::abs(p - centroid), p});
    }
    std::sort(nodes.begin(), nodes.end(), [](const Node& x, const Node& y) {
        if (x.ang != y.ang) return x.ang < y.ang;
        return x.rad < y.rad;
    });

    // Duplicate angles with substantially different radii mean two separate
    // loop branches project onto the same ray from the centroid.  A single
    // accidental tie can occur legitimately (e.g. a symmetry pins two nearby
    // crossings to the real axis), so only a systematic pattern of tied
    // rays — as with two concentric loops — marks the sample as malformed.
    std::size_t tied = 0;
    for (std::size_t i = 1; i < nodes.size(); ++i) {
        const double da = nodes[i].ang - nodes[i - 1].ang;
        const double rscale = std::max({nodes[i].rad, nodes[i - 1].rad, 1e-300});
        if (da < 1e-12 && std::abs(nodes[i].rad - nodes[i - 1].rad) > 0.35 * rscale)
            tied += 2;
    }
    if (tied * 5 > nodes.size())
        throw malformed_contour_error(
            "order_contour: points at equal angle but different radii; "
            "samples do not trace a single closed loop");

    std::vector<C> out;
    out.reserve(nodes.size());
    for (const Node& n : nodes) out.push_back(n.p);
    return out;
}

} // namespace nbloch
