#pragma once

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "anisodiff/curve.hpp"
#include "anisodiff/diagnostics.hpp"
#include "anisodiff/vec.hpp"

namespace anisodiff {

/// Shortest-faithful decimal form used in every emitted file: 17 significant
/// digits round-trip any double bit-exactly, and re-printing a parsed value
/// reproduces the original text.
inline std::string format_real(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

/// Curve snapshot text format: one header line `N <count> t <time>`, then
/// <count> lines `x y`.
inline std::string snapshot_to_string(const PolygonalCurve& curve, double time) {
    std::string out = "N " + std::to_string(curve.size()) + " t " + format_real(time) + "\n";
    for (const auto& v : curve.vertices())
        out += format_real(v.x) + " " + format_real(v.y) + "\n";
    return out;
}

inline void write_snapshot(const std::filesystem::path& path, const PolygonalCurve& curve,
                           double time) {
    std::ofstream f(path);
    if (!f) throw ConfigError("cannot open " + path.string() + " for writing");
    f << snapshot_to_string(curve, time);
}

struct Snapshot {
    PolygonalCurve curve;
    double time = 0.0;
};

inline Snapshot read_snapshot_stream(std::istream& in, const std::string& origin) {
    std::string tag_n, tag_t;
    std::size_t count = 0;
    double time = 0.0;
    if (!(in >> tag_n >> count >> tag_t >> time) || tag_n != "N" || tag_t != "t")
        throw ConfigError(origin + ": malformed snapshot header (expected `N <count> t <time>`)");
    std::vector<Vec2> verts(count);
    for (std::size_t i = 0; i < count; ++i) {
        if (!(in >> verts[i].x >> verts[i].y))
            throw ConfigError(origin + ": snapshot truncated at vertex " + std::to_string(i));
    }
    return {PolygonalCurve(std::move(verts)), time};
}

inline Snapshot read_snapshot(const std::filesystem::path& path) {
    std::ifstream f(path);
    if (!f) throw ConfigError("cannot open " + path.string());
    return read_snapshot_stream(f, path.string());
}

inline void write_diagnostics_csv(const std::filesystem::path& path,
                                  std::span<const DiagnosticsRecord> records) {
    std::ofstream f(path);
    if (!f) throw ConfigError("cannot open " + path.string() + " for writing");
    f << "step,time,area,area_loss_rel,energy,energy_norm,mesh_ratio,newton_iters,residual\n";
    for (const auto& r : records) {
        f << r.step << ',' << format_real(r.time) << ',' << format_real(r.area) << ','
          << format_real(r.area_loss_rel) << ',' << format_real(r.energy) << ','
          << format_real(r.energy_norm) << ',' << format_real(r.mesh_ratio) << ','
          << r.newton_iters << ',' << format_real(r.residual) << '\n';
    }
}

inline void write_convergence_csv(const std::filesystem::path& path,
                                  const ConvergenceTable& table) {
    std::ofstream f(path);
    if (!f) throw ConfigError("cannot open " + path.string() + " for writing");
    f << "h,tau,error,order\n";
    for (const auto& row : table.rows) {
        f << format_real(row.h) << ',' << format_real(row.tau) << ',' << format_real(row.error)
          << ',';
        if (std::isfinite(row.order)) f << format_real(row.order);
        f << '\n';
    }
}

} // namespace anisodiff
