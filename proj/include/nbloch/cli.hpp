#pragma once

#include <charconv>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "errors.hpp"
#include "expsim.hpp"
#include "gbz.hpp"
#include "invariant.hpp"
#include "io.hpp"
#include "moments.hpp"
#include "parallel.hpp"
#include "phases.hpp"
#include "spectrum.hpp"
#include "walk.hpp"

namespace nbloch::cli {

using nlohmann::json;

// Usage-level problems (bad literals, inconsistent flag combinations) exit
// with code 2, distinct from domain errors (1).
struct usage_error {
    std::string message;
};

// ---------------------------------------------------------------------------
// angle literals: plain radians or `Xpi` notation
// ---------------------------------------------------------------------------

inline std::string shortest(double v) {
    char buf[64];
    const auto res = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, res.ptr);
}

struct Angle {
    double radians = 0.0;
    bool pi_form = false;
    double coeff = 0.0;  // radians = coeff * pi when pi_form
    std::string text;    // canonical literal: format(parse(s)) == text
};

inline Angle parse_angle(const std::string& s) {
    Angle a;
    std::string t = s;
    if (t.size() >= 2 && t.compare(t.size() - 2, 2, "pi") == 0) {
        a.pi_form = true;
        t.erase(t.size() - 2);
        if (t.empty() || t == "+") t = "1";
        else if (t == "-") t = "-1";
    }
    double c = 0.0;
    try {
        c = io::parse_double(t);
    } catch (const io_error&) {
        throw usage_error{"invalid angle literal '" + s +
                          "' (use radians or Xpi, e.g. 0.58pi)"};
    }
    if (a.pi_form) {
        a.coeff = c;
        a.radians = c * M_PI;
        a.text = shortest(c) + "pi";
    } else {
        a.radians = c;
        a.text = shortest(c);
    }
    return a;
}

inline std::string format_angle(const Angle& a) { return a.text; }

// ---------------------------------------------------------------------------
// shared option plumbing
// ---------------------------------------------------------------------------

namespace detail {

struct GammaOpts {
    double gamma = 0.0;
    double gamma_exp = 1.0;
    double exp_raw = 0.0, gamma_raw = 0.0;
    CLI::Option* opt_exp = nullptr;
    CLI::Option* opt_gamma = nullptr;

    void add(CLI::App& app) {
        opt_exp = app.add_option("--gamma-exp", exp_raw,
                                 "gain/loss factor e^gamma (e.g. 0.82)");
        opt_gamma = app.add_option("--gamma", gamma_raw, "gain/loss exponent gamma");
        opt_exp->excludes(opt_gamma);
        opt_gamma->excludes(opt_exp);
    }
    void resolve() {
        if (opt_exp->count()) {
            if (!(exp_raw > 0.0))
                throw usage_error{"--gamma-exp must be positive"};
            gamma_exp = exp_raw;
            gamma = std::log(exp_raw);
        } else if (opt_gamma->count()) {
            gamma = gamma_raw;
            gamma_exp = std::exp(gamma_raw);
        }
    }
    void echo(json& cfg) const {
        // derived canonically from the resolved exponent so regenerated
        // outputs are byte-identical regardless of which flag was given
        cfg["gamma"] = gamma;
        cfg["gamma_exp"] = std::exp(gamma);
    }
};

struct AngleOpt {
    std::string raw;
    Angle value;
    CLI::Option* opt = nullptr;

    CLI::Option* add(CLI::App& app, const std::string& flag,
                     const std::string& desc, const char* preset = nullptr) {
        if (preset) {
            raw = preset;
            value = parse_angle(raw);
        }
        opt = app.add_option(flag, raw, desc);
        return opt;
    }
    void resolve() {
        if (opt->count()) value = parse_angle(raw);
    }
    void echo(json& cfg, const std::string& key) const {
        cfg[key] = value.radians;
        cfg[key + "_text"] = value.text;
    }
};

// Output sink: '-' streams to the console stream handed to run().
struct Output {
    std::ofstream file;
    std::ostream* os = nullptr;

    void open(const std::string& path, std::ostream& console, bool append) {
        if (path == "-") {
            os = &console;
            return;
        }
        file.open(path, append ? (std::ios::out | std::ios::app)
                               : (std::ios::out | std::ios::trunc));
        if (!file)
            throw io_error("cannot open output path '" + path + "'");
        os = &file;
    }
};

inline std::vector<double> parse_delta_list(const std::string& s) {
    std::vector<double> out;
    std::string cur;
    std::istringstream is(s);
    while (std::getline(is, cur, ',')) {
        try {
            out.push_back(io::parse_double(cur));
        } catch (const io_error&) {
            throw usage_error{"invalid delta list entry '" + cur + "'"};
        }
        if (!(out.back() >= 0.0))
            throw usage_error{"delta values must be nonnegative"};
    }
    if (out.empty()) throw usage_error{"empty delta list"};
    return out;
}

inline Scheme parse_scheme(const std::string& s) {
    if (s == "wilson") return Scheme::wilson;
    if (s == "derivative") return Scheme::derivative;
    throw usage_error{"unknown scheme '" + s + "' (wilson or derivative)"};
}

inline ContourSide parse_side(const std::string& s) {
    if (s == "inside") return ContourSide::inside;
    if (s == "outside") return ContourSide::outside;
    throw usage_error{"unknown contour side '" + s + "' (inside or outside)"};
}

inline PhaseClass parse_phase_class(const std::string& s) {
    for (PhaseClass c : {PhaseClass::trivial, PhaseClass::nontrivial_plus,
                         PhaseClass::nontrivial_minus, PhaseClass::exceptional,
                         PhaseClass::unconverged})
        if (s == phase_class_name(c)) return c;
    throw io_error("unknown phase class '" + s + "' in resume file");
}

inline long parse_long(const std::string& s, const char* what) {
    long v = 0;
    const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
    if (res.ec != std::errc{} || res.ptr != s.data() + s.size())
        throw io_error(std::string("malformed integer field for ") + what +
                       ": '" + s + "'");
    return v;
}

// Default open-boundary window: the wavefront of an N-step run never
// reaches the edges of a (2N+3)-site chain.
inline std::size_t default_window(std::size_t steps, double delta) {
    if (delta == 0.0) return std::max<std::size_t>(4, 2 * steps + 3);
    return 64;
}

inline void enforce_window(std::size_t L, std::size_t steps, double delta) {
    if (delta == 0.0 && L < 2 * steps + 3)
        throw usage_error{
            "open-boundary runs need --length >= 2*steps + 3 = " +
            std::to_string(2 * steps + 3) +
            " so the wavefront never reaches the edge"};
}

} // namespace detail

// ---------------------------------------------------------------------------
// subcommand runners
// ---------------------------------------------------------------------------

namespace detail {

struct WalkCmd {
    AngleOpt theta1, theta2;
    GammaOpts gamma;
    double delta = 0.0;
    std::size_t steps = 0;
    std::size_t length = 0;
    CLI::Option* opt_length = nullptr;
    std::string output = "-";
    CLI::App* app = nullptr;

    void add(CLI::App& root) {
        app = root.add_subcommand("walk", "evolve the walk and emit the "
                                          "position distribution per step");
        theta1.add(*app, "--theta1", "first coin angle (radians or Xpi)")->required();
        theta2.add(*app, "--theta2", "second coin angle (radians or Xpi)")->required();
        gamma.add(*app);
        app->add_option("--delta", delta, "boundary wrap weight (0 = open chain)");
        app->add_option("--steps", steps, "number of steps")->required();
        opt_length = app->add_option("--length", length, "chain sites (default 2*steps+3 when delta=0, else 64)");
        app->add_option("--output,-o", output, "output CSV path ('-' = stdout)");
    }

    int run(std::ostream& console) {
        theta1.resolve();
        theta2.resolve();
        gamma.resolve();
        if (!opt_length->count()) length = default_window(steps, delta);
        enforce_window(length, steps, delta);

        WalkParams p{theta1.value.radians, theta2.value.radians,
                     gamma.gamma, delta, length};
        const auto states = evolve(build_step_operator(p), make_initial_state(length), steps);

        json cfg;
        theta1.echo(cfg, "theta1");
        theta2.echo(cfg, "theta2");
        gamma.echo(cfg);
        cfg["delta"] = delta;
        cfg["steps"] = steps;
        cfg["length"] = length;
        cfg["output"] = output;

        json meta;
        meta["command"] = "walk";
        meta["config"] = cfg;

        const PositionDistribution final_dist = position_distribution(states.back());
        meta["final_norm"] = final_dist.norm_before;

        Output sink;
        sink.open(output, console, false);
        io::write_csv_header(*sink.os, meta.dump(), {"step", "position", "probability"});
        for (std::size_t n = 0; n < states.size(); ++n) {
            const PositionDistribution d = position_distribution(states[n]);
            for (std::size_t s = 0; s < d.p.size(); ++s)
                io::write_csv_row(*sink.os,
                                  {static_cast<long long>(n),
                                   position_of_site(s, length), d.p[s]});
        }
        return 0;
    }
};

struct SpectrumCmd {
    AngleOpt theta1, theta2;
    GammaOpts gamma;
    std::string deltas_raw = "0,0.001,0.01,0.1,1";
    std::size_t length = 64;
    std::string output = "-";
    CLI::App* app = nullptr;

    void add(CLI::App& root) {
        app = root.add_subcommand("spectrum", "diagonalize the step operator "
                                              "across boundary couplings");
        theta1.add(*app, "--theta1", "first coin angle")->required();
        theta2.add(*app, "--theta2", "second coin angle")->required();
        gamma.add(*app);
        app->add_option("--deltas", deltas_raw, "comma-separated boundary wrap weights");
        app->add_option("--length", length, "chain sites");
        app->add_option("--output,-o", output, "output CSV path ('-' = stdout)");
    }

    int run(std::ostream& console) {
        theta1.resolve();
        theta2.resolve();
        gamma.resolve();
        const std::vector<double> deltas = parse_delta_list(deltas_raw);

        json cfg;
        theta1.echo(cfg, "theta1");
        theta2.echo(cfg, "theta2");
        gamma.echo(cfg);
        cfg["deltas"] = deltas;
        cfg["length"] = length;
        cfg["output"] = output;

        json gaps = json::array();
        std::vector<SpectrumResult> results;
        for (double d : deltas) {
            WalkParams p{theta1.value.radians, theta2.value.radians,
                         gamma.gamma, d, length};
            results.push_back(gbc_spectrum(p));
            gaps.push_back({d, floquet_gap(results.back())});
        }

        json meta;
        meta["command"] = "spectrum";
        meta["config"] = cfg;
        meta["floquet_gap"] = gaps;

        Output sink;
        sink.open(output, console, false);
        io::write_csv_header(*sink.os, meta.dump(),
                             {"delta", "re_lambda", "im_lambda", "re_E", "im_E"});
        for (std::size_t k = 0; k < results.size(); ++k)
            for (std::size_t j = 0; j < results[k].lambdas.size(); ++j)
                io::write_csv_row(*sink.os,
                                  {deltas[k], results[k].lambdas[j].real(),
                                   results[k].lambdas[j].imag(),
                                   results[k].energies[j].real(),
                                   results[k].energies[j].imag()});
        return 0;
    }
};

struct GbzCmd {
    AngleOpt theta1, theta2;
    GammaOpts gamma;
    std::string deltas_raw = "0.1,0.01,0.001";
    std::size_t length = 64;
    std::string output = "-";
    CLI::App* app = nullptr;

    void add(CLI::App& root) {
        app = root.add_subcommand("gbz", "construct generalized Brillouin zone "
                                         "contours across boundary couplings");
        theta1.add(*app, "--theta1", "first coin angle")->required();
        theta2.add(*app, "--theta2", "second coin angle")->required();
        gamma.add(*app);
        app->add_option("--deltas", deltas_raw, "comma-separated boundary wrap weights (> 0)");
        app->add_option("--length", length, "chain sites");
        app->add_option("--output,-o", output, "output CSV path ('-' = stdout)");
    }

    int run(std::ostream& console) {
        theta1.resolve();
        theta2.resolve();
        gamma.resolve();
        const std::vector<double> deltas = parse_delta_list(deltas_raw);
        for (double d : deltas)
            if (!(d > 0.0))
                throw usage_error{"gbz deltas must be positive (the open chain "
                                  "is emitted automatically as side 'obc')"};

        json cfg;
        theta1.echo(cfg, "theta1");
        theta2.echo(cfg, "theta2");
        gamma.echo(cfg);
        cfg["deltas"] = deltas;
        cfg["length"] = length;
        cfg["output"] = output;

        WalkParams base{theta1.value.radians, theta2.value.radians,
                        gamma.gamma, 0.0, length};
        std::vector<GbzPair> pairs;
        json fits = json::array();
        for (double d : deltas) {
            WalkParams p = base;
            p.delta = d;
            pairs.push_back(build_contours(p));
            for (const GbzContour* c : {&pairs.back().inside, &pairs.back().outside})
                fits.push_back({{"delta", d},
                                {"side", to_string(c->side)},
                                {"radius_fit", c->radius_fit},
                                {"radius_spread", c->radius_spread}});
        }
        const GbzContour circle = obc_circle(base, 2 * length);
        fits.push_back({{"delta", 0.0},
                        {"side", to_string(circle.side)},
                        {"radius_fit", circle.radius_fit},
                        {"radius_spread", circle.radius_spread}});

        json meta;
        meta["command"] = "gbz";
        meta["config"] = cfg;
        meta["radius"] = fits;

        Output sink;
        sink.open(output, console, false);
        io::write_csv_header(*sink.os, meta.dump(),
                             {"delta", "side", "re_beta", "im_beta", "abs_beta"});
        auto emit = [&](const GbzContour& c) {
            for (const auto& b : c.betas)
                io::write_csv_row(*sink.os, {c.delta, to_string(c.side),
                                             b.real(), b.imag(), std::abs(b)});
        };
        for (const auto& pr : pairs) {
            emit(pr.inside);
            emit(pr.outside);
        }
        emit(circle);
        return 0;
    }
};

struct InvariantCmd {
    AngleOpt theta1, theta2;
    GammaOpts gamma;
    std::string deltas_raw = "0.1,0.03,0.01,0.003,0.001";
    std::string scheme_raw = "wilson";
    std::string side_raw = "inside";
    std::size_t length = 64;
    std::string output = "-";
    CLI::App* app = nullptr;

    void add(CLI::App& root) {
        app = root.add_subcommand("invariant", "compute the non-Bloch winding "
                                               "number with its convergence trace");
        theta1.add(*app, "--theta1", "first coin angle")->required();
        theta2.add(*app, "--theta2", "second coin angle")->required();
        gamma.add(*app);
        app->add_option("--deltas", deltas_raw, "decreasing boundary-coupling ladder");
        app->add_option("--scheme", scheme_raw, "integration scheme: wilson | derivative");
        app->add_option("--side", side_raw, "contour family: inside | outside");
        app->add_option("--length", length, "chain sites");
        app->add_option("--output,-o", output, "output CSV path ('-' = stdout)");
    }

    int run(std::ostream& console) {
        theta1.resolve();
        theta2.resolve();
        gamma.resolve();
        const std::vector<double> deltas = parse_delta_list(deltas_raw);
        const Scheme scheme = parse_scheme(scheme_raw);
        const ContourSide side = parse_side(side_raw);

        WalkParams p{theta1.value.radians, theta2.value.radians,
                     gamma.gamma, 1.0, length};
        const WindingScan scan = winding_scan(p, deltas);
        const InvariantResult res = winding_from_scan(scan, scheme, side);

        p.delta = 0.0;
        const double gap = floquet_gap(gbc_spectrum(p));

        json cfg;
        theta1.echo(cfg, "theta1");
        theta2.echo(cfg, "theta2");
        gamma.echo(cfg);
        cfg["deltas"] = deltas;
        cfg["scheme"] = scheme_raw;
        cfg["side"] = side_raw;
        cfg["length"] = length;
        cfg["output"] = output;

        json trace = json::array();
        for (const auto& [d, raw] : res.v_raw_per_delta)
            trace.push_back({d, raw.real(), raw.imag()});

        json meta;
        meta["command"] = "invariant";
        meta["config"] = cfg;
        meta["trace"] = trace;
        meta["v_quantized_num"] = res.v_quantized.num;
        meta["v_quantized_den"] = res.v_quantized.den;
        meta["min_margin"] = res.min_margin;
        meta["schemes_agree"] = res.schemes_agree;
        meta["contour_trusted"] = res.contour_trusted;
        meta["contour_size"] = res.contour_size;
        meta["refined"] = scan.refined;

        const std::complex<double> raw_last = res.v_raw_per_delta.back().second;

        Output sink;
        sink.open(output, console, false);
        io::write_csv_header(*sink.os, meta.dump(),
                             {"theta1", "theta2", "gamma", "v_raw_re", "v_raw_im",
                              "v_quantized", "converged", "gap"});
        io::write_csv_row(*sink.os,
                          {theta1.value.radians, theta2.value.radians, gamma.gamma,
                           raw_last.real(), raw_last.imag(),
                           res.v_quantized.value(), res.converged, gap});
        return 0;
    }
};

struct PhasesCmd {
    std::size_t resolution = 64;
    AngleOpt t1_min, t1_max, t2_min, t2_max;
    GammaOpts gamma;
    std::size_t length = 64;
    std::size_t workers = 0;
    bool resume = false;
    std::string output = "phases.csv";
    CLI::App* app = nullptr;

    void add(CLI::App& root) {
        app = root.add_subcommand("phases", "classify the (theta1, theta2) plane "
                                            "into a phase-diagram grid");
        app->add_option("--grid", resolution, "points per axis (>= 8)");
        t1_min.add(*app, "--theta1-min", "theta1 range start", "0");
        t1_max.add(*app, "--theta1-max", "theta1 range end (exclusive)", "2pi");
        t2_min.add(*app, "--theta2-min", "theta2 range start", "0");
        t2_max.add(*app, "--theta2-max", "theta2 range end (exclusive)", "2pi");
        gamma.add(*app);
        app->add_option("--length", length, "chain sites for invariant and gap");
        app->add_option("--workers", workers, "worker threads (0 = NBLOCH_WORKERS or hardware)");
        app->add_flag("--resume", resume, "reuse rows already present in the output file");
        app->add_option("--output,-o", output, "grid CSV path; plot-data and "
                                               "boundary files are written beside it");
    }

    static std::string stem(const std::string& path) {
        if (path.size() > 4 && path.compare(path.size() - 4, 4, ".csv") == 0)
            return path.substr(0, path.size() - 4);
        return path;
    }

    int run(std::ostream& console) {
        t1_min.resolve();
        t1_max.resolve();
        t2_min.resolve();
        t2_max.resolve();
        gamma.resolve();
        if (output == "-")
            throw usage_error{"phases writes multiple files; --output must be a path"};

        PhaseGridSpec spec;
        spec.theta1_lo = t1_min.value.radians;
        spec.theta1_hi = t1_max.value.radians;
        spec.theta2_lo = t2_min.value.radians;
        spec.theta2_hi = t2_max.value.radians;
        spec.resolution = resolution;
        spec.gamma = gamma.gamma;
        spec.opts.L = length;
        spec.workers = workers;

        json cfg;
        cfg["grid"] = resolution;
        t1_min.echo(cfg, "theta1_min");
        t1_max.echo(cfg, "theta1_max");
        t2_min.echo(cfg, "theta2_min");
        t2_max.echo(cfg, "theta2_max");
        gamma.echo(cfg);
        cfg["length"] = length;
        cfg["delta_schedule"] = spec.opts.deltas;
        cfg["output"] = output;

        json meta;
        meta["command"] = "phases";
        meta["config"] = cfg;
        meta["workers"] = worker_count(workers);

        const std::vector<std::string> columns = {
            "theta1", "theta2", "v_quantized_num", "v_quantized_den", "gap", "class"};

        // A resume run reuses every on-grid row already in the file and
        // appends only the missing points, so interrupted sweeps finish
        // without recomputation.
        std::vector<std::optional<PhasePoint>> done(resolution * resolution);
        bool have_previous = false;
        if (resume) have_previous = load_previous(spec, cfg, done);

        Output sink;
        sink.open(output, console, have_previous);
        if (!have_previous)
            io::write_csv_header(*sink.os, meta.dump(), columns);

        auto write_point = [&](const PhasePoint& pt) {
            io::write_csv_row(*sink.os,
                              {pt.theta1, pt.theta2, pt.v_quantized.num,
                               pt.v_quantized.den, pt.gap,
                               phase_class_name(pt.phase_class)});
            sink.os->flush();
        };
        const PhaseGrid grid = phase_grid(
            spec, [&](std::size_t, const PhasePoint& pt) { write_point(pt); },
            have_previous ? &done : nullptr);

        write_plot_file(grid, meta);
        write_boundary_file(grid, meta, console);
        return 0;
    }

    bool load_previous(const PhaseGridSpec& spec, const json& cfg,
                       std::vector<std::optional<PhasePoint>>& done) const {
        std::ifstream in(output);
        if (!in) return false;
        const io::CsvDocument doc = io::read_csv(in);
        if (doc.metadata_json.empty() && doc.rows.empty()) return false;

        json old = json::parse(doc.metadata_json, nullptr, false);
        if (old.is_discarded() || !old.contains("config") || old["config"] != cfg)
            throw io_error("resume: existing '" + output +
                           "' was produced with a different configuration");

        PhaseGrid probe;
        probe.spec = spec;
        const double h1 = (spec.theta1_hi - spec.theta1_lo) /
                          static_cast<double>(spec.resolution);
        const double h2 = (spec.theta2_hi - spec.theta2_lo) /
                          static_cast<double>(spec.resolution);
        for (const auto& row : doc.rows) {
            if (row.size() != 6)
                throw io_error("resume: unexpected column count in '" + output + "'");
            PhasePoint pt;
            pt.theta1 = io::parse_double(row[0]);
            pt.theta2 = io::parse_double(row[1]);
            pt.v_quantized.num = parse_long(row[2], "v_quantized_num");
            pt.v_quantized.den = parse_long(row[3], "v_quantized_den");
            pt.gap = io::parse_double(row[4]);
            pt.phase_class = parse_phase_class(row[5]);

            const long i1 = std::lround((pt.theta1 - spec.theta1_lo) / h1);
            const long i2 = std::lround((pt.theta2 - spec.theta2_lo) / h2);
            if (i1 < 0 || i2 < 0 ||
                static_cast<std::size_t>(i1) >= spec.resolution ||
                static_cast<std::size_t>(i2) >= spec.resolution ||
                probe.theta1_of(static_cast<std::size_t>(i1)) != pt.theta1 ||
                probe.theta2_of(static_cast<std::size_t>(i2)) != pt.theta2)
                throw io_error("resume: row does not sit on the requested grid");
            done[static_cast<std::size_t>(i1) * spec.resolution +
                 static_cast<std::size_t>(i2)] = pt;
        }
        return true;
    }

    void write_plot_file(const PhaseGrid& grid, json meta) const {
        const std::string path = stem(output) + "_plot.txt";
        std::ofstream os(path);
        if (!os) throw io_error("cannot open output path '" + path + "'");

        json x = json::array(), y = json::array();
        for (std::size_t i = 0; i < grid.spec.resolution; ++i) {
            x.push_back(grid.theta1_of(i));
            y.push_back(grid.theta2_of(i));
        }
        json legend;
        for (PhaseClass c : {PhaseClass::trivial, PhaseClass::nontrivial_plus,
                             PhaseClass::nontrivial_minus, PhaseClass::exceptional,
                             PhaseClass::unconverged})
            legend[std::to_string(phase_class_index(c))] = phase_class_name(c);
        json census = json::object();
        for (const auto& pt : grid.points) {
            const char* name = phase_class_name(pt.phase_class);
            census[name] = census.value(name, 0) + 1;
        }
        meta["x"] = x;
        meta["y"] = y;
        meta["legend"] = legend;
        meta["census"] = census;
        meta["layout"] = "rows follow theta1 (x), columns follow theta2 (y)";

        os << "# " << meta.dump() << '\n';
        for (std::size_t i1 = 0; i1 < grid.spec.resolution; ++i1) {
            for (std::size_t i2 = 0; i2 < grid.spec.resolution; ++i2)
                os << phase_class_index(grid.at(i1, i2).phase_class)
                   << (i2 + 1 < grid.spec.resolution ? " " : "");
            os << '\n';
        }
    }

    void write_boundary_file(const PhaseGrid& grid, json meta,
                             std::ostream& console) const {
        const std::string path = stem(output) + "_boundaries.csv";
        Output sink;
        sink.open(path, console, false);
        meta["segments"] = "edges between differing phase-class cells";
        io::write_csv_header(*sink.os, meta.dump(), {"x0", "y0", "x1", "y1"});
        for (const auto& s : phase_boundaries(grid))
            io::write_csv_row(*sink.os, {s.x0, s.y0, s.x1, s.y1});
    }
};

struct MomentsCmd {
    AngleOpt theta2, t1_min, t1_max;
    GammaOpts gamma;
    std::size_t points = 101;
    double l = 0.1;
    std::size_t steps = 80;
    double sensitivity = 5.0;
    double delta = 0.0;
    std::size_t length = 0;
    CLI::Option* opt_length = nullptr;
    std::size_t workers = 0;
    std::string output = "-";
    CLI::App* app = nullptr;

    void add(CLI::App& root) {
        app = root.add_subcommand("moments", "sweep theta1, compute normalized "
                                             "distribution moments, detect kinks");
        theta2.add(*app, "--theta2", "second coin angle")->required();
        t1_min.add(*app, "--theta1-min", "sweep start", "0");
        t1_max.add(*app, "--theta1-max", "sweep end (inclusive)", "1pi");
        app->add_option("--points", points, "sweep grid size");
        gamma.add(*app);
        app->add_option("--l", l, "moment order (>= 0)");
        app->add_option("--steps", steps, "walk steps N");
        app->add_option("--sensitivity", sensitivity, "kink detector threshold factor");
        app->add_option("--delta", delta, "boundary wrap weight (0 = open chain)");
        opt_length = app->add_option("--length", length, "chain sites (default 2*steps+3 when delta=0)");
        app->add_option("--workers", workers, "worker threads (0 = NBLOCH_WORKERS or hardware)");
        app->add_option("--output,-o", output, "output CSV path ('-' = stdout)");
    }

    int run(std::ostream& console) {
        theta2.resolve();
        t1_min.resolve();
        t1_max.resolve();
        gamma.resolve();
        if (points < 2) throw usage_error{"--points must be at least 2"};
        if (!(t1_max.value.radians > t1_min.value.radians))
            throw usage_error{"--theta1-max must exceed --theta1-min"};
        if (!opt_length->count()) length = default_window(steps, delta);
        enforce_window(length, steps, delta);

        std::vector<double> grid(points);
        for (std::size_t k = 0; k < points; ++k)
            grid[k] = t1_min.value.radians +
                      (t1_max.value.radians - t1_min.value.radians) *
                          static_cast<double>(k) / static_cast<double>(points - 1);

        WalkParams base{0.0, theta2.value.radians, gamma.gamma, delta, length};
        MomentSeries series = sweep_moments(base, grid, l, steps, workers);
        series.kinks = detect_kinks(series, sensitivity);

        json cfg;
        theta2.echo(cfg, "theta2");
        t1_min.echo(cfg, "theta1_min");
        t1_max.echo(cfg, "theta1_max");
        gamma.echo(cfg);
        cfg["points"] = points;
        cfg["l"] = l;
        cfg["steps"] = steps;
        cfg["sensitivity"] = sensitivity;
        cfg["delta"] = delta;
        cfg["length"] = length;
        cfg["output"] = output;

        json meta;
        meta["command"] = "moments";
        meta["config"] = cfg;
        meta["kinks"] = series.kinks;
        meta["workers"] = worker_count(workers);

        std::set<double> kink_set(series.kinks.begin(), series.kinks.end());

        Output sink;
        sink.open(output, console, false);
        io::write_csv_header(*sink.os, meta.dump(),
                             {"theta1", "moment_normalized", "is_kink"});
        for (std::size_t k = 0; k < points; ++k)
            io::write_csv_row(*sink.os, {grid[k], series.moments[k],
                                         kink_set.count(grid[k]) > 0});
        return 0;
    }
};

struct ExpsimCmd {
    AngleOpt theta2, t1_min, t1_max;
    GammaOpts gamma;
    std::size_t points = 101;
    double photons = 1e5;
    double outcoupling = 0.05;
    double attenuation = 0.0;
    CLI::Option* opt_attenuation = nullptr;
    std::uint64_t seed = 0;
    double l = 0.1;
    std::size_t steps = 7;
    double sensitivity = 5.0;
    std::size_t length = 0;
    CLI::Option* opt_length = nullptr;
    std::size_t workers = 0;
    std::string output = "-";
    CLI::App* app = nullptr;

    void add(CLI::App& root) {
        app = root.add_subcommand("expsim", "sample photon-counting statistics "
                                            "of the lossy walk across a theta1 sweep");
        theta2.add(*app, "--theta2", "second coin angle")->required();
        t1_min.add(*app, "--theta1-min", "sweep start", "0");
        t1_max.add(*app, "--theta1-max", "sweep end (inclusive)", "1pi");
        app->add_option("--points", points, "sweep grid size");
        gamma.add(*app);
        app->add_option("--photons", photons, "launched photons per data point");
        app->add_option("--outcoupling", outcoupling, "per-round-trip detection coupling");
        opt_attenuation = app->add_option("--attenuation", attenuation,
                                          "per-step intensity attenuation "
                                          "(default e^{2 gamma}, matched to the walk)");
        app->add_option("--seed", seed, "RNG seed");
        app->add_option("--l", l, "moment order for the noisy kink scan");
        app->add_option("--steps", steps, "walk steps N");
        app->add_option("--sensitivity", sensitivity, "kink detector threshold factor");
        opt_length = app->add_option("--length", length, "chain sites (default 2*steps+3)");
        app->add_option("--workers", workers, "worker threads (0 = NBLOCH_WORKERS or hardware)");
        app->add_option("--output,-o", output, "output CSV path ('-' = stdout)");
    }

    int run(std::ostream& console) {
        theta2.resolve();
        t1_min.resolve();
        t1_max.resolve();
        gamma.resolve();
        if (points < 2) throw usage_error{"--points must be at least 2"};
        if (!(t1_max.value.radians > t1_min.value.radians))
            throw usage_error{"--theta1-max must exceed --theta1-min"};
        if (!opt_length->count()) length = default_window(steps, 0.0);
        enforce_window(length, steps, 0.0);

        WalkParams base{0.0, theta2.value.radians, gamma.gamma, 0.0, length};
        ExperimentConfig ecfg = matched_experiment(base, photons, seed);
        ecfg.outcoupling = outcoupling;
        if (opt_attenuation->count()) ecfg.attenuation_power = attenuation;
        validate(ecfg);

        std::vector<double> grid(points);
        for (std::size_t k = 0; k < points; ++k)
            grid[k] = t1_min.value.radians +
                      (t1_max.value.radians - t1_min.value.radians) *
                          static_cast<double>(k) / static_cast<double>(points - 1);

        const NoisySweep noisy = noisy_sweep(base, grid, ecfg, steps, l, workers);
        NoisySweep scanned = noisy;
        scanned.series.kinks = detect_kinks(scanned.series, sensitivity);

        json cfg;
        theta2.echo(cfg, "theta2");
        t1_min.echo(cfg, "theta1_min");
        t1_max.echo(cfg, "theta1_max");
        gamma.echo(cfg);
        cfg["points"] = points;
        cfg["photons"] = ecfg.photons_per_run;
        cfg["outcoupling"] = ecfg.outcoupling;
        cfg["attenuation"] = ecfg.attenuation_power;
        cfg["seed"] = ecfg.rng_seed;
        cfg["l"] = l;
        cfg["steps"] = steps;
        cfg["sensitivity"] = sensitivity;
        cfg["length"] = length;
        cfg["output"] = output;

        json meta;
        meta["command"] = "expsim";
        meta["config"] = cfg;
        meta["kinks"] = scanned.series.kinks;
        meta["low_confidence"] = scanned.low_confidence;
        meta["min_expected_total"] = scanned.min_expected_total;
        meta["moment_normalized"] = scanned.series.moments;
        meta["workers"] = worker_count(workers);

        Output sink;
        sink.open(output, console, false);
        io::write_csv_header(*sink.os, meta.dump(), {"theta1", "bin", "counts"});
        for (std::size_t k = 0; k < points; ++k) {
            WalkParams p = base;
            p.theta1 = grid[k];
            const SampleResult r = nbloch::detail::sample_core(p, ecfg, steps, k);
            for (std::size_t s = 0; s < r.counts.size(); ++s)
                io::write_csv_row(*sink.os,
                                  {grid[k], position_of_site(s, length),
                                   static_cast<unsigned long long>(r.counts[s])});
        }
        return 0;
    }
};

} // namespace detail

// ---------------------------------------------------------------------------
// entry point
// ---------------------------------------------------------------------------

inline int run(const std::vector<std::string>& args, std::ostream& out,
               std::ostream& err) {
    CLI::App app{"non-Bloch quantum-walk toolkit: spectra, GBZ contours, "
                 "winding invariants, phase diagrams, moments, photon counting"};
    app.require_subcommand(1);

    detail::WalkCmd walk_cmd;
    detail::SpectrumCmd spectrum_cmd;
    detail::GbzCmd gbz_cmd;
    detail::InvariantCmd invariant_cmd;
    detail::PhasesCmd phases_cmd;
    detail::MomentsCmd moments_cmd;
    detail::ExpsimCmd expsim_cmd;

    walk_cmd.add(app);
    spectrum_cmd.add(app);
    gbz_cmd.add(app);
    invariant_cmd.add(app);
    phases_cmd.add(app);
    moments_cmd.add(app);
    expsim_cmd.add(app);

    std::vector<const char*> argv;
    argv.push_back("nbloch");
    for (const auto& a : args) argv.push_back(a.c_str());

    try {
        app.parse(static_cast<int>(argv.size()), argv.data());
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e, out, err);
        return code == 0 ? 0 : 2;
    }

    try {
        if (*walk_cmd.app) return walk_cmd.run(out);
        if (*spectrum_cmd.app) return spectrum_cmd.run(out);
        if (*gbz_cmd.app) return gbz_cmd.run(out);
        if (*invariant_cmd.app) return invariant_cmd.run(out);
        if (*phases_cmd.app) return phases_cmd.run(out);
        if (*moments_cmd.app) return moments_cmd.run(out);
        if (*expsim_cmd.app) return expsim_cmd.run(out);
    } catch (const usage_error& u) {
        err << u.message << '\n';
        return 2;
    } catch (const nbloch::error& e) {
        err << e.name() << ": " << e.what() << '\n';
        return 1;
    }
    return 2; // unreachable with require_subcommand(1)
}

} // namespace nbloch::cli
