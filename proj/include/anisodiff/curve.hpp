#pragma once

#include <algorithm>
#include <cmath>
#include <iostream>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include "anisodiff/anisotropy.hpp"
#include "anisodiff/vec.hpp"

namespace anisodiff {

/// Per-edge frame of a polygonal curve: edge vector h, its length, the
/// outward unit normal n = -h^perp/|h| and the unit tangent tau = h/|h|.
struct EdgeFrame {
    Vec2 h;
    double len = 0.0;
    Vec2 n;
    Vec2 tau;
};

/// Signed area of the closed vertex loop by A = 1/2 sum (x_j - x_{j-1})(y_j + y_{j-1});
/// positive for clockwise traversal.
inline double signed_polygon_area(std::span<const Vec2> vertices) {
    const std::size_t n = vertices.size();
    double a = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
        const Vec2& cur = vertices[j];
        const Vec2& prev = vertices[(j + n - 1) % n];
        a += (cur.x - prev.x) * (cur.y + prev.y);
    }
    return 0.5 * a;
}

/// Closed polygonal curve, stored clockwise (positive signed area).
/// Vertex j-1 precedes vertex j; edge j runs from vertex j-1 to vertex j
/// (indices mod N), so edge j and edge j+1 meet at vertex j.
class PolygonalCurve {
public:
    explicit PolygonalCurve(std::vector<Vec2> vertices) : verts_(std::move(vertices)) {
        if (verts_.size() < 3) throw ConfigError("a closed curve needs at least 3 vertices");
        for (const auto& v : verts_)
            if (!finite(v)) throw ConfigError("curve vertices must be finite");

        const double area = signed_polygon_area(verts_);
        if (area < 0.0) {
            std::cerr << "[anisodiff] notice: counterclockwise input curve reversed to the "
                         "clockwise convention\n";
            std::reverse(verts_.begin(), verts_.end());
        } else if (area == 0.0) {
            throw ConfigError("curve encloses zero signed area");
        }

        double total = 0.0;
        for (std::size_t j = 0; j < verts_.size(); ++j) total += norm(edge_vector(j));
        const double mean_len = total / static_cast<double>(verts_.size());
        for (std::size_t j = 0; j < verts_.size(); ++j) {
            if (norm(edge_vector(j)) < 1e-12 * mean_len)
                throw ConfigError("degenerate edge " + std::to_string(j) +
                                  " (length below 1e-12 of the mean edge length)");
        }
    }

    std::size_t size() const { return verts_.size(); }
    const std::vector<Vec2>& vertices() const { return verts_; }
    const Vec2& vertex(std::size_t j) const { return verts_[j]; }

    /// h_j = X_j - X_{j-1} (cyclic).
    Vec2 edge_vector(std::size_t j) const {
        const std::size_t n = verts_.size();
        return verts_[j] - verts_[(j + n - 1) % n];
    }

    double min_edge_length() const {
        double m = std::numeric_limits<double>::infinity();
        for (std::size_t j = 0; j < verts_.size(); ++j) m = std::min(m, norm(edge_vector(j)));
        return m;
    }

    double total_length() const {
        double s = 0.0;
        for (std::size_t j = 0; j < verts_.size(); ++j) s += norm(edge_vector(j));
        return s;
    }

    double diameter() const {
        double lo_x = verts_[0].x, hi_x = lo_x, lo_y = verts_[0].y, hi_y = lo_y;
        for (const auto& v : verts_) {
            lo_x = std::min(lo_x, v.x);
            hi_x = std::max(hi_x, v.x);
            lo_y = std::min(lo_y, v.y);
            hi_y = std::max(hi_y, v.y);
        }
        return std::hypot(hi_x - lo_x, hi_y - lo_y);
    }

private:
    std::vector<Vec2> verts_;
};

inline std::vector<EdgeFrame> edge_frames(const PolygonalCurve& curve) {
    const std::size_t n = curve.size();
    std::vector<EdgeFrame> frames(n);
    for (std::size_t j = 0; j < n; ++j) {
        const Vec2 h = curve.edge_vector(j);
        const double len = norm(h);
        if (len == 0.0) throw NumericalError("degenerate edge " + std::to_string(j));
        frames[j] = {h, len, -perp(h) / len, h / len};
    }
    return frames;
}

inline double polygon_area(const PolygonalCurve& curve) {
    return signed_polygon_area(curve.vertices());
}

/// Mass-lumped inner product (u, v)^h = 1/2 sum_j |h_j| (u_j v_j + u_{j-1} v_{j-1})
/// for nodal piecewise-linear fields. Total length for u = v = 1.
inline double lumped_inner(std::span<const double> u, std::span<const double> v,
                           const PolygonalCurve& curve) {
    const std::size_t n = curve.size();
    if (u.size() != n || v.size() != n)
        throw ConfigError("nodal field size does not match the curve vertex count");
    double s = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
        const std::size_t jm = (j + n - 1) % n;
        s += 0.5 * norm(curve.edge_vector(j)) * (u[j] * v[j] + u[jm] * v[jm]);
    }
    return s;
}

inline double lumped_inner(std::span<const Vec2> u, std::span<const Vec2> v,
                           const PolygonalCurve& curve) {
    const std::size_t n = curve.size();
    if (u.size() != n || v.size() != n)
        throw ConfigError("nodal field size does not match the curve vertex count");
    double s = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
        const std::size_t jm = (j + n - 1) % n;
        s += 0.5 * norm(curve.edge_vector(j)) * (dot(u[j], v[j]) + dot(u[jm], v[jm]));
    }
    return s;
}

/// Weighted length W = sum_j |h_j| gamma(n_j).
inline double discrete_energy(const PolygonalCurve& curve, const AnisotropySpec& aniso) {
    double w = 0.0;
    for (std::size_t j = 0; j < curve.size(); ++j) {
        const Vec2 h = curve.edge_vector(j);
        const double len = norm(h);
        w += len * aniso.gamma(-perp(h) / len);
    }
    return w;
}

/// max_j |h_j| / min_j |h_j| >= 1.
inline double mesh_ratio(const PolygonalCurve& curve) {
    double lo = std::numeric_limits<double>::infinity();
    double hi = 0.0;
    for (std::size_t j = 0; j < curve.size(); ++j) {
        const double len = norm(curve.edge_vector(j));
        lo = std::min(lo, len);
        hi = std::max(hi, len);
    }
    return hi / lo;
}

} // namespace anisodiff
