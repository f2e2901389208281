#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <vector>

#include "errors.hpp"
#include "moments.hpp"
#include "parallel.hpp"
#include "walk.hpp"

namespace nbloch {

// Stochastic twin of the time-multiplexed photonic measurement: ideal walk
// intensities, per-round-trip out-coupling loss, polarization attenuation,
// and per-bin Poisson counting statistics.

struct ExperimentConfig {
    double photons_per_run = 1e5;  // photons launched into the loop per run
    double outcoupling = 0.05;     // fraction leaving the loop per round trip
    double attenuation_power = 1.0; // intensity factor on the damped coin path
    std::uint64_t rng_seed = 0;
};

// Configuration whose attenuation matches the walk's gain parameter: the
// hardware convention rescales the balanced coin multiplier into a pure
// intensity attenuation per step, a global factor that drops out of every
// normalized distribution.
inline ExperimentConfig matched_experiment(const WalkParams& p,
                                           double photons,
                                           std::uint64_t seed) {
    ExperimentConfig cfg;
    cfg.photons_per_run = photons;
    cfg.attenuation_power = std::exp(2.0 * p.gamma);
    cfg.rng_seed = seed;
    return cfg;
}

inline void validate(const ExperimentConfig& cfg) {
    if (!(cfg.photons_per_run >= 1.0))
        throw invalid_params_error("expsim: need at least one photon per run");
    if (!(cfg.outcoupling > 0.0 && cfg.outcoupling < 1.0))
        throw invalid_params_error("expsim: outcoupling must be in (0, 1)");
    if (!(cfg.attenuation_power > 0.0))
        throw invalid_params_error("expsim: attenuation power must be positive");
}

struct SampleResult {
    PositionDistribution empirical;   // normalized from the detected counts
    std::vector<std::uint64_t> counts; // raw detected photons per site bin
    double expected_total = 0.0;       // Poisson mean of the summed counts
};

namespace detail {

// One run at one sweep index: expected per-bin means and Poisson draws.
// Each index owns an independent, platform-stable random stream derived
// from (seed, index), so sweep results never depend on scheduling.
inline SampleResult sample_core(const WalkParams& p,
                                const ExperimentConfig& cfg, std::size_t steps,
                                std::size_t index) {
    validate(cfg);
    const StateVector psi =
        evolve(build_step_operator(p), make_initial_state(p.L), steps).back();

    // detected mean per bin: launched photons, loop survival with the final
    // out-coupling, and the per-step intensity attenuation of the hardware
    // convention on top of the balanced-convention state
    const double survival =
        std::pow(1.0 - cfg.outcoupling, static_cast<double>(steps)) *
        cfg.outcoupling;
    const double attenuation =
        std::pow(cfg.attenuation_power, static_cast<double>(steps));

    const std::size_t sites = p.L;
    std::vector<double> lambda(sites, 0.0);
    SampleResult out;
    for (std::size_t s = 0; s < sites; ++s) {
        const double intensity =
            std::norm(psi[2 * s]) + std::norm(psi[2 * s + 1]);
        lambda[s] = cfg.photons_per_run * survival * attenuation * intensity;
        out.expected_total += lambda[s];
    }

    std::seed_seq seq{static_cast<std::uint32_t>(cfg.rng_seed),
                      static_cast<std::uint32_t>(cfg.rng_seed >> 32),
                      static_cast<std::uint32_t>(index),
                      static_cast<std::uint32_t>(index >> 32)};
    std::mt19937_64 rng(seq);
    out.counts.resize(sites, 0);
    for (std::size_t s = 0; s < sites; ++s) {
        if (lambda[s] <= 0.0) continue;
        std::poisson_distribution<std::uint64_t> draw(lambda[s]);
        out.counts[s] = draw(rng);
    }
    return out;
}

inline std::uint64_t total_counts(const SampleResult& r) {
    std::uint64_t total = 0;
    for (std::uint64_t c : r.counts) total += c;
    return total;
}

} // namespace detail

// One measured distribution at step N.  Refuses configurations whose
// expected detected total is below 10 photons, where the empirical
// normalization is meaningless.
inline SampleResult sample_distribution(const WalkParams& p,
                                        const ExperimentConfig& cfg,
                                        std::size_t steps,
                                        std::size_t index = 0) {
    SampleResult r = detail::sample_core(p, cfg, steps, index);
    if (r.expected_total < 10.0)
        throw insufficient_statistics_error(
            "sample_distribution: expected detected total below 10 photons");
    const std::uint64_t total = detail::total_counts(r);
    if (total == 0)
        throw insufficient_statistics_error(
            "sample_distribution: no photons detected in this run");
    r.empirical.p.resize(r.counts.size());
    for (std::size_t s = 0; s < r.counts.size(); ++s)
        r.empirical.p[s] =
            static_cast<double>(r.counts[s]) / static_cast<double>(total);
    r.empirical.norm_before = std::sqrt(static_cast<double>(total));
    return r;
}

struct NoisySweep {
    MomentSeries series;
    bool low_confidence = false;      // sparse detection somewhere on the grid
    double min_expected_total = 0.0;  // smallest per-point detected mean
};

// Detected-photon floor below which a sweep point is considered too sparse
// for a trustworthy moment estimate.
inline constexpr double kConfidentCounts = 100.0;

// Noisy moment sweep: one simulated run per grid angle (independent random
// streams keyed by grid index), moments of the empirical distributions, and
// the kink detector on the assembled series.  Points that detect nothing
// contribute a zero moment and force the low-confidence flag.
inline NoisySweep noisy_sweep(const WalkParams& p_base,
                              const std::vector<double>& theta1_grid,
                              const ExperimentConfig& cfg, std::size_t steps,
                              double l, std::size_t workers = 0) {
    if (theta1_grid.size() < 7)
        throw grid_error("noisy_sweep: need at least 7 grid points");
    for (std::size_t k = 1; k < theta1_grid.size(); ++k)
        if (!(theta1_grid[k] >= theta1_grid[k - 1]))
            throw invalid_params_error("noisy_sweep: grid must be ascending");
    if (steps < 1)
        throw invalid_params_error("noisy_sweep: need at least one step");
    if (!(l >= 0.0))
        throw invalid_params_error("noisy_sweep: order must be >= 0");
    validate(cfg);
    validate(p_base);

    NoisySweep out;
    out.series.sweep_values = theta1_grid;
    out.series.moments.resize(theta1_grid.size());
    out.series.l = l;
    out.series.N = steps;
    out.min_expected_total = 1e300;

    const std::size_t origin = (p_base.L - 1) / 2;
    const double scale = std::pow(static_cast<double>(steps), l);
    std::vector<double> expected(theta1_grid.size(), 0.0);
    std::vector<std::uint8_t> empty_point(theta1_grid.size(), 0);

    parallel_for(theta1_grid.size(), workers, [&](std::size_t k) {
        WalkParams p = p_base;
        p.theta1 = theta1_grid[k];
        const SampleResult r = detail::sample_core(p, cfg, steps, k);
        expected[k] = r.expected_total;
        const std::uint64_t total = detail::total_counts(r);
        if (total == 0) {
            empty_point[k] = 1;
            out.series.moments[k] = 0.0;
            return;
        }
        PositionDistribution d;
        d.p.resize(r.counts.size());
        for (std::size_t s = 0; s < r.counts.size(); ++s)
            d.p[s] = static_cast<double>(r.counts[s]) /
                     static_cast<double>(total);
        d.norm_before = std::sqrt(static_cast<double>(total));
        out.series.moments[k] = moment(d, l, origin) / scale;
    });

    for (std::size_t k = 0; k < theta1_grid.size(); ++k) {
        out.min_expected_total = std::min(out.min_expected_total, expected[k]);
        if (empty_point[k]) out.low_confidence = true;
    }
    if (out.min_expected_total < kConfidentCounts) out.low_confidence = true;
    out.series.kinks = detect_kinks(out.series);
    return out;
}

} // namespace nbloch
