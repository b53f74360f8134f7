// Command line front end: evolve closed curves under anisotropic surface
// diffusion, run convergence studies, tabulate minimal stabilizing functions,
// emit Frank diagrams and measure manifold distances between curve snapshots.
//
// Exit codes: 0 success, 2 configuration/schema error, 3 numerical failure.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "anisodiff/clip.hpp"
#include "anisodiff/config.hpp"
#include "anisodiff/convergence.hpp"
#include "anisodiff/io.hpp"
#include "anisodiff/stabilizer.hpp"
#include "anisodiff/svg.hpp"

namespace {

using namespace anisodiff;
namespace fs = std::filesystem;

struct EvolveArgs {
    std::string config_path;
    std::string out_dir;
    long snapshot_every = -1; // -1: keep the config value
};

struct ConvergeArgs {
    std::string config_path;
    std::string out_dir;
    double t_eval = 0.5;
    std::string h_exps = "3,4,5,6";
    int ref_h_exp = 7;
    int ref_tau_exp = 14;
};

struct K0Args {
    std::string config_path;
    std::string out_file = "k0.csv";
    int resolution = 360;
};

struct FrankArgs {
    std::string config_path;
    std::string out_file = "frank.txt";
    std::string svg_file;
    int points = 256;
};

struct DistanceArgs {
    std::string file_a;
    std::string file_b;
    std::string method = "auto";
    int grid = 2048;
};

std::string snapshot_name(long step) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "snapshot_%08ld.txt", step);
    return buf;
}

void emit_snapshot(const fs::path& dir, bool svg, const CurveState& state, long step) {
    const fs::path txt = dir / snapshot_name(step);
    write_snapshot(txt, state.curve, state.time);
    if (svg) {
        fs::path img = txt;
        img.replace_extension(".svg");
        write_svg(img, state.curve.vertices());
    }
}

int run_evolve(const EvolveArgs& args) {
    RunConfig cfg = load_run_config(args.config_path);
    if (!cfg.initial || !cfg.geometry)
        throw ConfigError("evolve needs a 'geometry' section");
    if (!cfg.scheme) throw ConfigError("evolve needs a 'scheme' section");
    if (!cfg.run) throw ConfigError("evolve needs a 'run' section");
    if (!args.out_dir.empty()) cfg.output.dir = args.out_dir;
    if (args.snapshot_every >= 0) cfg.run->snapshot_every = args.snapshot_every;

    const fs::path dir(cfg.output.dir);
    fs::create_directories(dir);

    EvolveOptions opts;
    opts.n_steps = cfg.run->n_steps;
    opts.t_end = cfg.run->t_end;
    opts.snapshot_every = cfg.run->snapshot_every;
    opts.plateau_stop = cfg.run->plateau_stop;
    long last_emitted = -1;
    if (opts.snapshot_every > 0)
        opts.snapshot_sink = [&](const CurveState& state, long step) {
            emit_snapshot(dir, cfg.output.svg, state, step);
            last_emitted = step;
        };

    const EvolveResult result = evolve(*cfg.initial, *cfg.scheme, cfg.anisotropy, opts);
    const long final_step = result.records.back().step;
    if (opts.snapshot_every > 0 && last_emitted != final_step)
        emit_snapshot(dir, cfg.output.svg, result.final_state, final_step);

    write_diagnostics_csv(dir / "diagnostics.csv", result.records);

    const DiagnosticsRecord& last = result.records.back();
    double max_area_loss = 0.0;
    for (const auto& r : result.records)
        max_area_loss = std::max(max_area_loss, std::abs(r.area_loss_rel));
    std::span<const DiagnosticsRecord> solves(result.records.data() + 1,
                                              result.records.size() - 1);
    const IterationStats stats = iteration_stats(solves);
    std::cout << "steps " << final_step << "  t " << format_real(last.time)
              << "  area_loss_rel " << format_real(last.area_loss_rel) << " (max "
              << format_real(max_area_loss) << ")  energy_norm " << format_real(last.energy_norm)
              << "  median_newton_iters " << stats.median
              << (result.stopped_at_plateau ? "  (stopped at energy plateau)" : "") << "\n";
    return 0;
}

int run_converge(const ConvergeArgs& args) {
    RunConfig cfg = load_run_config(args.config_path);
    if (!cfg.geometry) throw ConfigError("converge needs a 'geometry' section");
    if (cfg.geometry->shape == GeometryConfig::Shape::polygon)
        throw ConfigError("converge needs a parametric shape (ellipse or rectangle)");
    if (!args.out_dir.empty()) cfg.output.dir = args.out_dir;

    StudySetup setup;
    setup.aniso = cfg.anisotropy;
    setup.stabilizer = cfg.stabilizer;
    if (cfg.scheme) {
        setup.variant = cfg.scheme->variant;
        setup.newton_tol = cfg.scheme->newton_tol;
        setup.newton_max_iters = cfg.scheme->newton_max_iters;
    }
    const GeometryConfig geo = *cfg.geometry;
    setup.initial_builder = [geo](int n) {
        return geo.shape == GeometryConfig::Shape::ellipse ? make_ellipse(geo.a, geo.b, n)
                                                           : make_rectangle(geo.w, geo.h, n);
    };

    std::vector<int> exps;
    std::stringstream ss(args.h_exps);
    std::string tok;
    while (std::getline(ss, tok, ',')) exps.push_back(std::stoi(tok));

    const ConvergenceStudyResult result =
        convergence_study(setup, {args.t_eval}, exps, args.ref_h_exp, args.ref_tau_exp);

    const fs::path dir(cfg.output.dir);
    fs::create_directories(dir);
    const ConvergenceTable& table = result.per_time[0].second;
    write_convergence_csv(dir / "convergence.csv", table);
    std::cout << "t " << format_real(args.t_eval);
    if (table.rows.size() >= 3) std::cout << "  fitted_order " << format_real(order_fit(table));
    std::cout << "\n";
    return 0;
}

int run_k0(const K0Args& args) {
    RunConfig cfg = load_run_config(args.config_path);
    if (args.resolution < 4) throw ConfigError("k0 table needs resolution >= 4");
    std::ofstream f(args.out_file);
    if (!f) throw ConfigError("cannot open " + args.out_file + " for writing");
    f << "theta,k0,k_explicit,gap\n";
    for (int i = 0; i < args.resolution; ++i) {
        const double theta =
            -AnisotropySpec::pi() + 2.0 * AnisotropySpec::pi() * i / args.resolution;
        const double numeric = k0_numeric(cfg.anisotropy, theta);
        const auto explicit_k =
            k0_explicit(cfg.anisotropy, AnisotropySpec::normal_of_theta(theta));
        f << format_real(theta) << ',' << format_real(numeric) << ',';
        if (explicit_k) f << format_real(*explicit_k) << ',' << format_real(*explicit_k - numeric);
        else f << ',';
        f << '\n';
    }
    std::cout << "wrote " << args.out_file << "\n";
    return 0;
}

int run_frank(const FrankArgs& args) {
    RunConfig cfg = load_run_config(args.config_path);
    const FrankDiagram fd = frank_diagram(cfg.anisotropy, args.points);
    std::ofstream f(args.out_file);
    if (!f) throw ConfigError("cannot open " + args.out_file + " for writing");
    f << "N " << fd.points.size() << " t " << format_real(0.0) << "\n";
    for (const auto& p : fd.points) f << format_real(p.x) << ' ' << format_real(p.y) << '\n';
    if (!args.svg_file.empty()) write_svg(args.svg_file, fd.points);
    std::cout << "convex " << (fd.convex ? "true" : "false") << "\n";
    return 0;
}

int run_distance(const DistanceArgs& args) {
    const Snapshot a = read_snapshot(args.file_a);
    const Snapshot b = read_snapshot(args.file_b);
    double d = 0.0;
    if (args.method == "exact") {
        d = manifold_distance(a.curve, b.curve);
    } else if (args.method == "raster") {
        d = manifold_distance_raster(a.curve, b.curve, args.grid);
    } else if (args.method == "auto") {
        if (is_simple_polygon(a.curve) && is_simple_polygon(b.curve)) {
            d = manifold_distance(a.curve, b.curve);
        } else {
            std::cerr << "[anisodiff] notice: self-overlapping curve, using the rasterized "
                         "estimator\n";
            d = manifold_distance_raster(a.curve, b.curve, args.grid);
        }
    } else {
        throw ConfigError("distance method must be auto, exact or raster");
    }
    std::cout << format_real(d) << "\n";
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Structure-preserving simulation of anisotropic surface diffusion of closed "
                 "planar curves"};
    app.require_subcommand(1);

    EvolveArgs evolve_args;
    CLI::App* evolve_cmd =
        app.add_subcommand("evolve", "advance a curve and emit snapshots + diagnostics.csv");
    evolve_cmd->add_option("--config", evolve_args.config_path, "run configuration file")
        ->required();
    evolve_cmd->add_option("--out", evolve_args.out_dir, "output directory (overrides config)");
    evolve_cmd->add_option("--snapshot-every", evolve_args.snapshot_every,
                           "snapshot cadence in steps (overrides config)");

    ConvergeArgs converge_args;
    CLI::App* converge_cmd =
        app.add_subcommand("converge", "mesh refinement study against a fine reference run");
    converge_cmd->add_option("--config", converge_args.config_path, "run configuration file")
        ->required();
    converge_cmd->add_option("--out", converge_args.out_dir, "output directory");
    converge_cmd->add_option("--t", converge_args.t_eval, "evaluation time");
    converge_cmd->add_option("--hexp", converge_args.h_exps,
                             "comma list of mesh exponents e (h = 2^-e)");
    converge_cmd->add_option("--ref-hexp", converge_args.ref_h_exp, "reference mesh exponent");
    converge_cmd->add_option("--ref-tauexp", converge_args.ref_tau_exp,
                             "reference time step exponent (tau_e = 2^-e)");

    K0Args k0_args;
    CLI::App* k0_cmd =
        app.add_subcommand("k0", "tabulate the minimal stabilizing function over angles");
    k0_cmd->add_option("--config", k0_args.config_path, "configuration with an anisotropy")
        ->required();
    k0_cmd->add_option("--out", k0_args.out_file, "output CSV file");
    k0_cmd->add_option("--resolution", k0_args.resolution, "number of angle samples");

    FrankArgs frank_args;
    CLI::App* frank_cmd = app.add_subcommand("frank", "emit the 1/gamma Frank diagram polyline");
    frank_cmd->add_option("--config", frank_args.config_path, "configuration with an anisotropy")
        ->required();
    frank_cmd->add_option("--m", frank_args.points, "number of polyline points");
    frank_cmd->add_option("--out", frank_args.out_file, "output polyline file");
    frank_cmd->add_option("--svg", frank_args.svg_file, "also render to this SVG file");

    DistanceArgs distance_args;
    CLI::App* distance_cmd =
        app.add_subcommand("distance", "symmetric-difference area between two curve snapshots");
    distance_cmd->add_option("fileA", distance_args.file_a, "first snapshot")->required();
    distance_cmd->add_option("fileB", distance_args.file_b, "second snapshot")->required();
    distance_cmd->add_option("--method", distance_args.method, "auto | exact | raster");
    distance_cmd->add_option("--grid", distance_args.grid, "raster grid resolution");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 2;
    }

    try {
        if (evolve_cmd->parsed()) return run_evolve(evolve_args);
        if (converge_cmd->parsed()) return run_converge(converge_args);
        if (k0_cmd->parsed()) return run_k0(k0_args);
        if (frank_cmd->parsed()) return run_frank(frank_args);
        if (distance_cmd->parsed()) return run_distance(distance_args);
    } catch (const ConfigError& e) {
        std::cerr << "configuration error: " << e.what() << "\n";
        return 2;
    } catch (const NumericalError& e) {
        std::cerr << "numerical failure: " << e.what() << "\n";
        return 3;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 3;
    }
    return 0;
}
