#pragma once

#include <cmath>
#include <cstddef>
#include <vector>

#include "anisodiff/curve.hpp"
#include "anisodiff/vec.hpp"

namespace anisodiff {

namespace detail {

/// Sample a periodic parametric loop at n points uniformly spaced in
/// arclength, using a dense parameter table for the inversion.
template <class PointFn>
std::vector<Vec2> sample_uniform_arclength(PointFn&& point, int n) {
    if (n < 3) throw ConfigError("initial curve needs at least 3 nodes");
    constexpr int fine = 1 << 18;
    std::vector<double> s(fine + 1, 0.0);
    Vec2 prev = point(0.0);
    for (int i = 1; i <= fine; ++i) {
        const Vec2 cur = point(static_cast<double>(i) / fine);
        s[i] = s[i - 1] + norm(cur - prev);
        prev = cur;
    }
    const double total = s[fine];

    std::vector<Vec2> out(n);
    std::size_t seg = 0;
    for (int j = 0; j < n; ++j) {
        const double target = total * j / n;
        while (seg + 1 < s.size() && s[seg + 1] < target) ++seg;
        const double span = s[seg + 1] - s[seg];
        const double w = span > 0.0 ? (target - s[seg]) / span : 0.0;
        out[j] = point((static_cast<double>(seg) + w) / fine);
    }
    return out;
}

} // namespace detail

/// Clockwise ellipse with semi-axes a and b, n nodes uniform in arclength.
inline PolygonalCurve make_ellipse(double a, double b, int n) {
    if (!(a > 0.0 && b > 0.0)) throw ConfigError("ellipse needs positive semi-axes");
    auto point = [a, b](double u) {
        const double t = 2.0 * AnisotropySpec::pi() * u;
        return Vec2{a * std::cos(t), -b * std::sin(t)};
    };
    return PolygonalCurve(detail::sample_uniform_arclength(point, n));
}

/// Clockwise origin-centered rectangle of width w and height h, n nodes
/// uniform in arclength with the nodes nearest each corner snapped onto it.
inline PolygonalCurve make_rectangle(double w, double h, int n) {
    if (!(w > 0.0 && h > 0.0)) throw ConfigError("rectangle needs positive sides");
    if (n < 8) throw ConfigError("rectangle sampling needs at least 8 nodes");
    const double perim = 2.0 * (w + h);
    const double corner_s[4] = {0.0, h, h + w, 2.0 * h + w};
    const Vec2 corner_p[4] = {{-0.5 * w, -0.5 * h},
                              {-0.5 * w, 0.5 * h},
                              {0.5 * w, 0.5 * h},
                              {0.5 * w, -0.5 * h}};

    auto point_at = [&](double s) -> Vec2 {
        s = std::fmod(s, perim);
        if (s < 0.0) s += perim;
        if (s < h) return corner_p[0] + Vec2{0.0, s};
        s -= h;
        if (s < w) return corner_p[1] + Vec2{s, 0.0};
        s -= w;
        if (s < h) return corner_p[2] + Vec2{0.0, -s};
        s -= h;
        return corner_p[3] + Vec2{-s, 0.0};
    };

    std::vector<Vec2> verts(n);
    for (int j = 0; j < n; ++j) verts[j] = point_at(perim * j / n);
    for (int c = 0; c < 4; ++c) {
        int best = 0;
        double best_d = perim;
        for (int j = 0; j < n; ++j) {
            double d = std::abs(perim * j / n - corner_s[c]);
            d = std::min(d, perim - d);
            if (d < best_d) {
                best_d = d;
                best = j;
            }
        }
        verts[best] = corner_p[c];
    }
    return PolygonalCurve(std::move(verts));
}

} // namespace anisodiff
