#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <string>
#include <vector>

#include "anisodiff/curve.hpp"
#include "anisodiff/vec.hpp"

namespace anisodiff {

namespace detail {

enum class PointSide { inside, outside, boundary };

inline double dist_point_segment(Vec2 p, Vec2 a, Vec2 b) {
    const Vec2 ab = b - a;
    const double len2 = norm_sq(ab);
    if (len2 == 0.0) return norm(p - a);
    const double t = std::clamp(dot(p - a, ab) / len2, 0.0, 1.0);
    return norm(p - (a + t * ab));
}

inline PointSide classify_point(Vec2 p, const std::vector<Vec2>& poly, double boundary_eps) {
    const std::size_t n = poly.size();
    for (std::size_t i = 0; i < n; ++i) {
        if (dist_point_segment(p, poly[i], poly[(i + 1) % n]) <= boundary_eps)
            return PointSide::boundary;
    }
    // even-odd ray crossing, half-open in y to avoid vertex double counts
    bool in = false;
    for (std::size_t i = 0; i < n; ++i) {
        const Vec2 a = poly[i];
        const Vec2 b = poly[(i + 1) % n];
        if ((a.y <= p.y) != (b.y <= p.y)) {
            const double x_cross = a.x + (p.y - a.y) / (b.y - a.y) * (b.x - a.x);
            if (x_cross > p.x) in = !in;
        }
    }
    return in ? PointSide::inside : PointSide::outside;
}

/// Intersection parameters of segment a0->a1 against all edges of poly.
inline void edge_cut_params(Vec2 a0, Vec2 a1, const std::vector<Vec2>& poly,
                            std::vector<double>& ts) {
    const Vec2 da = a1 - a0;
    const std::size_t n = poly.size();
    for (std::size_t i = 0; i < n; ++i) {
        const Vec2 b0 = poly[i];
        const Vec2 b1 = poly[(i + 1) % n];
        const Vec2 db = b1 - b0;
        const double den = cross(da, db);
        const double scale = norm(da) * norm(db);
        if (std::abs(den) <= 1e-14 * std::max(1.0, scale)) continue; // parallel
        const Vec2 r = b0 - a0;
        const double t = cross(r, db) / den;
        const double u = cross(r, da) / den;
        if (t > 0.0 && t < 1.0 && u >= 0.0 && u <= 1.0) ts.push_back(t);
    }
}

/// Green's theorem contribution of the parts of curve A lying inside polygon B.
/// Pieces whose midpoint sits on the boundary of B count with weight 1/2, so
/// coincident boundary segments traversed by both polygons are not double
/// counted (and cancel when the interiors are on opposite sides).
inline double boundary_inside_contribution(const std::vector<Vec2>& a,
                                           const std::vector<Vec2>& b, double boundary_eps) {
    double area = 0.0;
    const std::size_t n = a.size();
    std::vector<double> ts;
    for (std::size_t i = 0; i < n; ++i) {
        const Vec2 p0 = a[i];
        const Vec2 p1 = a[(i + 1) % n];
        ts.clear();
        ts.push_back(0.0);
        ts.push_back(1.0);
        edge_cut_params(p0, p1, b, ts);
        std::sort(ts.begin(), ts.end());
        for (std::size_t s = 0; s + 1 < ts.size(); ++s) {
            const double t0 = ts[s], t1 = ts[s + 1];
            if (t1 - t0 <= 0.0) continue;
            const Vec2 q0 = p0 + t0 * (p1 - p0);
            const Vec2 q1 = p0 + t1 * (p1 - p0);
            const Vec2 mid = 0.5 * (q0 + q1);
            const PointSide side = classify_point(mid, b, boundary_eps);
            if (side == PointSide::outside) continue;
            const double w = side == PointSide::inside ? 1.0 : 0.5;
            area += w * (-0.5) * cross(q0, q1); // clockwise loops have positive area
        }
    }
    return area;
}

inline double polygon_scale(const std::vector<Vec2>& poly) {
    double m = 1.0;
    for (const auto& v : poly) m = std::max({m, std::abs(v.x), std::abs(v.y)});
    return m;
}

} // namespace detail

/// True when no two non-adjacent edges of the closed loop cross or touch.
inline bool is_simple_polygon(const PolygonalCurve& curve) {
    const auto& v = curve.vertices();
    const std::size_t n = v.size();
    const double eps = 1e-12 * detail::polygon_scale(v);
    for (std::size_t i = 0; i < n; ++i) {
        const Vec2 a0 = v[i], a1 = v[(i + 1) % n];
        for (std::size_t j = i + 1; j < n; ++j) {
            const bool adjacent = (j == i + 1) || (i == 0 && j == n - 1);
            if (adjacent) continue;
            const Vec2 b0 = v[j], b1 = v[(j + 1) % n];
            const Vec2 da = a1 - a0, db = b1 - b0;
            const double den = cross(da, db);
            if (std::abs(den) > eps) {
                const Vec2 r = b0 - a0;
                const double t = cross(r, db) / den;
                const double u = cross(r, da) / den;
                if (t > eps && t < 1.0 - eps && u > eps && u < 1.0 - eps) return false;
            } else {
                // parallel: reject overlap of collinear interiors
                if (std::abs(cross(da, b0 - a0)) <= eps * std::max(1.0, norm(da))) {
                    const double la = norm_sq(da);
                    if (la == 0.0) continue;
                    const double u0 = dot(b0 - a0, da) / la;
                    const double u1 = dot(b1 - a0, da) / la;
                    if (std::max(std::min(u0, u1), 0.0) < std::min(std::max(u0, u1), 1.0) - eps)
                        return false;
                }
            }
        }
    }
    return true;
}

/// Area of the symmetric difference of the regions enclosed by two simple
/// closed curves, computed by exact segment-intersection clipping:
/// |O1| + |O2| - 2 |O1 n O2|. Zero iff the regions coincide.
inline double manifold_distance(const PolygonalCurve& c1, const PolygonalCurve& c2) {
    if (!is_simple_polygon(c1) || !is_simple_polygon(c2))
        throw ConfigError("manifold_distance needs simple (non-self-intersecting) curves; "
                          "use the rasterized estimator for self-overlapping curves");
    const auto& v1 = c1.vertices();
    const auto& v2 = c2.vertices();
    const double eps =
        1e-12 * std::max(detail::polygon_scale(v1), detail::polygon_scale(v2));
    const double inter = detail::boundary_inside_contribution(v1, v2, eps) +
                         detail::boundary_inside_contribution(v2, v1, eps);
    const double m = polygon_area(c1) + polygon_area(c2) - 2.0 * inter;
    return std::max(m, 0.0);
}

/// Rasterized symmetric-difference estimator on a grid x grid sampling of the
/// joint bounding box, using nonzero-winding scanline fill. Works for
/// self-overlapping loops (near-cusp equilibria of strongly anisotropic runs).
inline double manifold_distance_raster(const PolygonalCurve& c1, const PolygonalCurve& c2,
                                       int grid = 2048) {
    if (grid < 16) throw ConfigError("raster grid must be at least 16");
    const auto& v1 = c1.vertices();
    const auto& v2 = c2.vertices();

    double lo_x = v1[0].x, hi_x = lo_x, lo_y = v1[0].y, hi_y = lo_y;
    auto grow = [&](const std::vector<Vec2>& vs) {
        for (const auto& p : vs) {
            lo_x = std::min(lo_x, p.x);
            hi_x = std::max(hi_x, p.x);
            lo_y = std::min(lo_y, p.y);
            hi_y = std::max(hi_y, p.y);
        }
    };
    grow(v1);
    grow(v2);
    const double dx = (hi_x - lo_x) / grid;
    const double dy = (hi_y - lo_y) / grid;
    if (!(dx > 0.0) || !(dy > 0.0)) return 0.0;

    struct Crossing {
        double x;
        int dir;
    };
    auto fill_row = [](const std::vector<Vec2>& poly, double y, std::vector<Crossing>& out) {
        out.clear();
        const std::size_t n = poly.size();
        for (std::size_t i = 0; i < n; ++i) {
            const Vec2 a = poly[i];
            const Vec2 b = poly[(i + 1) % n];
            if (a.y == b.y) continue;
            if ((a.y <= y && y < b.y) || (b.y <= y && y < a.y)) {
                const double t = (y - a.y) / (b.y - a.y);
                out.push_back({a.x + t * (b.x - a.x), b.y > a.y ? 1 : -1});
            }
        }
        std::sort(out.begin(), out.end(), [](const Crossing& l, const Crossing& r) {
            return l.x < r.x;
        });
    };

    std::vector<Crossing> r1, r2;
    std::vector<char> in1(grid), in2(grid);
    auto mark = [&](const std::vector<Crossing>& cr, std::vector<char>& in, double x0,
                    double ddx) {
        std::fill(in.begin(), in.end(), 0);
        std::size_t k = 0;
        int winding = 0;
        for (int c = 0; c < static_cast<int>(in.size()); ++c) {
            const double xc = x0 + (c + 0.5) * ddx;
            while (k < cr.size() && cr[k].x <= xc) winding += cr[k++].dir;
            in[c] = winding != 0;
        }
    };

    long diff_cells = 0;
    for (int row = 0; row < grid; ++row) {
        const double y = lo_y + (row + 0.5) * dy;
        fill_row(v1, y, r1);
        fill_row(v2, y, r2);
        mark(r1, in1, lo_x, dx);
        mark(r2, in2, lo_x, dx);
        for (int c = 0; c < grid; ++c) diff_cells += in1[c] != in2[c];
    }
    return static_cast<double>(diff_cells) * dx * dy;
}

} // namespace anisodiff
