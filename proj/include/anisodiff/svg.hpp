#pragma once

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <span>
#include <string>
#include <vector>

#include "anisodiff/vec.hpp"

namespace anisodiff {

/// Serialize closed polylines as a minimal standalone SVG (one path each).
inline void write_svg(const std::filesystem::path& path,
                      std::span<const std::vector<Vec2>> polylines, int pixels = 800) {
    if (polylines.empty()) throw ConfigError("svg writer needs at least one polyline");
    double lo_x = polylines[0][0].x, hi_x = lo_x, lo_y = polylines[0][0].y, hi_y = lo_y;
    for (const auto& poly : polylines)
        for (const auto& p : poly) {
            lo_x = std::min(lo_x, p.x);
            hi_x = std::max(hi_x, p.x);
            lo_y = std::min(lo_y, p.y);
            hi_y = std::max(hi_y, p.y);
        }
    const double span = std::max(hi_x - lo_x, hi_y - lo_y);
    const double pad = span > 0.0 ? 0.05 * span : 1.0;
    lo_x -= pad;
    hi_x += pad;
    lo_y -= pad;
    hi_y += pad;
    const double scale = pixels / std::max(hi_x - lo_x, hi_y - lo_y);

    std::ofstream f(path);
    if (!f) throw ConfigError("cannot open " + path.string() + " for writing");
    const int width = static_cast<int>((hi_x - lo_x) * scale + 0.5);
    const int height = static_cast<int>((hi_y - lo_y) * scale + 0.5);
    f << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width << "\" height=\""
      << height << "\" viewBox=\"0 0 " << width << " " << height << "\">\n";
    const char* colors[] = {"#004488", "#bb5566", "#228833", "#aa7733"};
    int idx = 0;
    for (const auto& poly : polylines) {
        f << "  <path fill=\"none\" stroke=\"" << colors[idx++ % 4]
          << "\" stroke-width=\"1.5\" d=\"";
        for (std::size_t i = 0; i < poly.size(); ++i) {
            const double px = (poly[i].x - lo_x) * scale;
            const double py = (hi_y - poly[i].y) * scale; // flip y for screen coordinates
            f << (i == 0 ? 'M' : 'L') << px << ' ' << py << ' ';
        }
        f << "Z\"/>\n";
    }
    f << "</svg>\n";
}

inline void write_svg(const std::filesystem::path& path, const std::vector<Vec2>& polyline,
                      int pixels = 800) {
    write_svg(path, std::span<const std::vector<Vec2>>(&polyline, 1), pixels);
}

} // namespace anisodiff
