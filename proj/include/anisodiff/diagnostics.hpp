#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <span>
#include <vector>

#include "anisodiff/vec.hpp"

namespace anisodiff {

/// Per-step time series entry of an evolution run. area_loss_rel is measured
/// against the step-0 area, energy_norm against the step-0 energy.
struct DiagnosticsRecord {
    long step = 0;
    double time = 0.0;
    double area = 0.0;
    double area_loss_rel = 0.0;
    double energy = 0.0;
    double energy_norm = 1.0;
    double mesh_ratio = 1.0;
    int newton_iters = 0;
    double residual = 0.0;
};

/// Convergence study row: error at mesh size h (with tau = h^2) and the rate
/// log2(e_h / e_{h/2}) attached to the finer of the two rows.
struct ConvergenceRow {
    double h = 0.0;
    double tau = 0.0;
    double error = 0.0;
    double order = std::numeric_limits<double>::quiet_NaN(); // NaN on the coarsest row
};

struct ConvergenceTable {
    std::vector<ConvergenceRow> rows;
};

/// Least-squares slope of log(error) against log(h).
inline double order_fit(const ConvergenceTable& table) {
    if (table.rows.size() < 3) throw ConfigError("order_fit needs at least 3 rows");
    double sx = 0.0, sy = 0.0;
    const std::size_t n = table.rows.size();
    std::vector<double> lx(n), ly(n);
    for (std::size_t i = 0; i < n; ++i) {
        if (!(table.rows[i].error > 0.0))
            throw ConfigError("order_fit needs strictly positive errors");
        lx[i] = std::log(table.rows[i].h);
        ly[i] = std::log(table.rows[i].error);
        sx += lx[i];
        sy += ly[i];
    }
    const double mx = sx / static_cast<double>(n);
    const double my = sy / static_cast<double>(n);
    double num = 0.0, den = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        num += (lx[i] - mx) * (ly[i] - my);
        den += (lx[i] - mx) * (lx[i] - mx);
    }
    return num / den;
}

struct IterationStats {
    int min = 0;
    int median = 0;
    int max = 0;
};

inline IterationStats iteration_stats(std::span<const DiagnosticsRecord> records) {
    if (records.empty()) throw ConfigError("iteration_stats needs a nonempty record list");
    std::vector<int> iters;
    iters.reserve(records.size());
    for (const auto& r : records) iters.push_back(r.newton_iters);
    std::sort(iters.begin(), iters.end());
    return {iters.front(), iters[iters.size() / 2], iters.back()};
}

} // namespace anisodiff
