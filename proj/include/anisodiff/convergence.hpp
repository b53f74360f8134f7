#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <future>
#include <utility>
#include <vector>

#include "anisodiff/clip.hpp"
#include "anisodiff/diagnostics.hpp"
#include "anisodiff/scheme.hpp"
#include "anisodiff/vec.hpp"

namespace anisodiff {

/// Everything a convergence study needs to rerun the same problem at several
/// resolutions: the energy, the stabilizer, how to build the initial curve at
/// a given node count, and the solver settings.
struct StudySetup {
    AnisotropySpec aniso = AnisotropySpec::isotropic();
    StabilizerChoice stabilizer = StabilizerChoice::explicit_formula();
    std::function<PolygonalCurve(int n)> initial_builder;
    SchemeVariant variant = SchemeVariant::sp_implicit;
    double newton_tol = 1e-12;
    int newton_max_iters = 50;
};

struct ConvergenceStudyResult {
    std::vector<std::pair<double, ConvergenceTable>> per_time; // one table per evaluation time
};

namespace detail {

struct TimedSnapshots {
    std::vector<PolygonalCurve> curves; // one per evaluation time, in order
};

inline TimedSnapshots run_capturing(const StudySetup& setup, const KProvider& k, int n_nodes,
                                    double tau, const std::vector<double>& t_evals) {
    SchemeConfig config;
    config.n = n_nodes;
    config.tau = tau;
    config.newton_tol = setup.newton_tol;
    config.newton_max_iters = setup.newton_max_iters;
    config.variant = setup.variant;

    std::vector<long> target_steps;
    for (double t : t_evals) {
        const double steps = t / tau;
        if (std::abs(steps - std::llround(steps)) > 1e-9)
            throw ConfigError("evaluation time must be an integer multiple of every tau");
        target_steps.push_back(std::llround(steps));
    }

    TimedSnapshots snaps;
    EvolveOptions opts;
    opts.n_steps = *std::max_element(target_steps.begin(), target_steps.end());
    opts.snapshot_every = 1;
    opts.snapshot_sink = [&](const CurveState& state, long step) {
        for (std::size_t i = 0; i < target_steps.size(); ++i)
            if (step == target_steps[i]) snaps.curves.push_back(state.curve);
    };
    if (opts.n_steps == 0) {
        // all evaluation times are zero
        const PolygonalCurve initial = setup.initial_builder(n_nodes);
        for (std::size_t i = 0; i < target_steps.size(); ++i) snaps.curves.push_back(initial);
        return snaps;
    }
    evolve(setup.initial_builder(n_nodes), config, setup.aniso, k, opts);
    return snaps;
}

} // namespace detail

/// Manifold-distance convergence study: coarse runs at h = 2^-e (tau = h^2)
/// against a fine reference run at h = 2^-ref_h_exp, tau = 2^-ref_tau_exp.
/// Coarse runs execute concurrently. Rates log2(e_h / e_{h/2}) are attached to
/// the finer of each pair of rows.
inline ConvergenceStudyResult convergence_study(const StudySetup& setup,
                                                std::vector<double> t_evals,
                                                const std::vector<int>& h_exponents,
                                                int ref_h_exp, int ref_tau_exp) {
    if (!setup.initial_builder) throw ConfigError("convergence study needs an initial builder");
    if (h_exponents.size() < 2) throw ConfigError("convergence study needs at least 2 mesh sizes");
    for (std::size_t i = 1; i < h_exponents.size(); ++i)
        if (h_exponents[i] != h_exponents[i - 1] + 1)
            throw ConfigError("mesh sizes must halve between consecutive study rows");
    if (t_evals.empty()) throw ConfigError("convergence study needs evaluation times");
    std::sort(t_evals.begin(), t_evals.end());

    const KProvider k(setup.aniso, setup.stabilizer);

    // Reference run (failures here abort the whole study).
    detail::TimedSnapshots ref = detail::run_capturing(setup, k, 1 << ref_h_exp,
                                                       std::ldexp(1.0, -ref_tau_exp), t_evals);

    std::vector<std::future<detail::TimedSnapshots>> futures;
    futures.reserve(h_exponents.size());
    for (int e : h_exponents) {
        futures.push_back(std::async(std::launch::async, [&, e] {
            const double h = std::ldexp(1.0, -e);
            return detail::run_capturing(setup, k, 1 << e, h * h, t_evals);
        }));
    }
    std::vector<detail::TimedSnapshots> coarse;
    coarse.reserve(futures.size());
    for (auto& f : futures) coarse.push_back(f.get());

    ConvergenceStudyResult result;
    for (std::size_t it = 0; it < t_evals.size(); ++it) {
        ConvergenceTable table;
        for (std::size_t ie = 0; ie < h_exponents.size(); ++ie) {
            ConvergenceRow row;
            row.h = std::ldexp(1.0, -h_exponents[ie]);
            row.tau = row.h * row.h;
            row.error = manifold_distance(coarse[ie].curves[it], ref.curves[it]);
            if (ie > 0 && table.rows[ie - 1].error > 0.0 && row.error > 0.0)
                row.order = std::log2(table.rows[ie - 1].error / row.error);
            table.rows.push_back(row);
        }
        result.per_time.emplace_back(t_evals[it], std::move(table));
    }
    return result;
}

} // namespace anisodiff
