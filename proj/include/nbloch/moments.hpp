#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <vector>

#include "errors.hpp"
#include "parallel.hpp"
#include "walk.hpp"

namespace nbloch {

// Absolute displacement moments of a walk distribution, their sweeps over
// the first coin angle, and the slope-discontinuity detector that marks
// topological transitions in those sweeps.

struct MomentSeries {
    std::vector<double> sweep_values; // first coin angle per point (radians)
    std::vector<double> moments;      // normalized moment M_l / N^l per point
    double l = 0.1;                   // moment order
    std::size_t N = 80;               // step count
    std::vector<double> kinks;        // detected transition locations
};

// Sum of |m|^l weighted by the site probabilities, with the displacement m
// measured from the origin site; |0|^l is 0 for l > 0 and 1 for l = 0.
inline double moment(const PositionDistribution& dist, double l,
                     std::size_t origin) {
    if (!(l >= 0.0))
        throw invalid_params_error("moment: order must be >= 0");
    if (origin >= dist.p.size())
        throw invalid_params_error("moment: origin site outside the lattice");
    double total = 0.0;
    for (std::size_t s = 0; s < dist.p.size(); ++s) {
        const double m = (s >= origin) ? static_cast<double>(s - origin)
                                       : static_cast<double>(origin - s);
        if (m == 0.0) {
            if (l == 0.0) total += dist.p[s];
            continue;
        }
        total += std::pow(m, l) * dist.p[s];
    }
    return total;
}

// Runs the walk at every grid angle with all other parameters fixed and
// returns the moments normalized by N^l.  Displacement is measured from the
// walker's start site.  Points are independent and run on the worker pool;
// each index writes only its own slot, so the series is identical for any
// worker count.
inline MomentSeries sweep_moments(const WalkParams& p_base,
                                  const std::vector<double>& theta1_grid,
                                  double l, std::size_t N,
                                  std::size_t workers = 0) {
    if (theta1_grid.empty())
        throw invalid_params_error("sweep_moments: empty grid");
    for (std::size_t k = 1; k < theta1_grid.size(); ++k)
        if (!(theta1_grid[k] >= theta1_grid[k - 1]))
            throw invalid_params_error("sweep_moments: grid must be ascending");
    if (N < 1)
        throw invalid_params_error("sweep_moments: need at least one step");
    if (!(l >= 0.0))
        throw invalid_params_error("sweep_moments: order must be >= 0");
    validate(p_base);

    MomentSeries series;
    series.sweep_values = theta1_grid;
    series.moments.resize(theta1_grid.size());
    series.l = l;
    series.N = N;

    const std::size_t origin = (p_base.L - 1) / 2;
    const double scale = std::pow(static_cast<double>(N), l);
    parallel_for(theta1_grid.size(), workers, [&](std::size_t k) {
        WalkParams p = p_base;
        p.theta1 = theta1_grid[k];
        const ComplexMatrix u = build_step_operator(p);
        const StateVector psi = evolve(u, make_initial_state(p.L), N).back();
        series.moments[k] = moment(position_distribution(psi), l, origin) / scale;
    });
    return series;
}

// Flags slope discontinuities: positions where the centered second
// difference is a local maximum in magnitude and exceeds the given multiple
// of the median magnitude.  Flags closer than two grid steps merge into the
// strongest one.  Requires a uniform ascending grid of at least 7 points.
inline std::vector<double> detect_kinks(const MomentSeries& series,
                                        double sensitivity = 5.0) {
    const std::vector<double>& x = series.sweep_values;
    const std::vector<double>& y = series.moments;
    if (x.size() != y.size())
        throw grid_error("detect_kinks: series lists differ in length");
    if (x.size() < 7)
        throw grid_error("detect_kinks: need at least 7 grid points");
    if (!(sensitivity > 0.0))
        throw invalid_params_error("detect_kinks: sensitivity must be positive");
    const double h = x[1] - x[0];
    if (!(h > 0.0))
        throw grid_error("detect_kinks: grid must be strictly ascending");
    for (std::size_t k = 1; k < x.size(); ++k)
        if (std::abs((x[k] - x[k - 1]) - h) > 1e-6 * h)
            throw grid_error("detect_kinks: grid spacing must be uniform");

    const std::size_t n = x.size();
    std::vector<double> d(n, 0.0); // |second difference|, interior points
    for (std::size_t k = 1; k + 1 < n; ++k)
        d[k] = std::abs((y[k + 1] - 2.0 * y[k] + y[k - 1]) / (h * h));

    std::vector<double> interior(d.begin() + 1, d.end() - 1);
    std::nth_element(interior.begin(), interior.begin() + interior.size() / 2,
                     interior.end());
    const double median = interior[interior.size() / 2];
    const double threshold = sensitivity * median;

    std::vector<std::size_t> flags;
    for (std::size_t k = 1; k + 1 < n; ++k) {
        if (!(d[k] > threshold)) continue;
        if (k > 1 && d[k] < d[k - 1]) continue;
        if (k + 2 < n && d[k] < d[k + 1]) continue;
        flags.push_back(k);
    }

    // merge clusters closer than 2h, keeping the strongest representative
    std::vector<double> kinks;
    std::size_t c = 0;
    while (c < flags.size()) {
        std::size_t best = flags[c];
        std::size_t e = c + 1;
        while (e < flags.size() && x[flags[e]] - x[flags[e - 1]] < 2.0 * h) {
            if (d[flags[e]] > d[best]) best = flags[e];
            ++e;
        }
        kinks.push_back(x[best]);
        c = e;
    }
    return kinks;
}

} // namespace nbloch
