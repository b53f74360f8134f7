#pragma once

#include <cmath>
#include <stdexcept>
#include <utility>
#include <string>

namespace anisodiff {

struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Invalid or inconsistent user input (configuration, file formats, parameters).
struct ConfigError : Error {
    using Error::Error;
};

/// A solver or time step failed (singular system, Newton divergence, mesh collapse).
struct NumericalError : Error {
    explicit NumericalError(const std::string& msg, long step = -1)
        : Error(msg), step_index(step) {}
    long step_index;
};

/// The evolving mesh degenerated (an edge shrank below the representable
/// floor). Faceting under strongly anisotropic energies ends this way.
struct MeshCollapseError : NumericalError {
    using NumericalError::NumericalError;
};

struct Vec2 {
    double x = 0.0;
    double y = 0.0;

    constexpr Vec2() = default;
    constexpr Vec2(double x_, double y_) : x(x_), y(y_) {}

    constexpr Vec2 operator+(Vec2 o) const { return {x + o.x, y + o.y}; }
    constexpr Vec2 operator-(Vec2 o) const { return {x - o.x, y - o.y}; }
    constexpr Vec2 operator-() const { return {-x, -y}; }
    constexpr Vec2 operator*(double c) const { return {c * x, c * y}; }
    constexpr Vec2 operator/(double c) const { return {x / c, y / c}; }
    Vec2& operator+=(Vec2 o) { x += o.x; y += o.y; return *this; }
    Vec2& operator-=(Vec2 o) { x -= o.x; y -= o.y; return *this; }
    Vec2& operator*=(double c) { x *= c; y *= c; return *this; }
    constexpr bool operator==(const Vec2&) const = default;
};

constexpr Vec2 operator*(double c, Vec2 v) { return {c * v.x, c * v.y}; }

constexpr double dot(Vec2 a, Vec2 b) { return a.x * b.x + a.y * b.y; }

/// det(a, b) = a.x b.y - a.y b.x (z-component of the cross product).
constexpr double cross(Vec2 a, Vec2 b) { return a.x * b.y - a.y * b.x; }

inline double norm(Vec2 v) { return std::hypot(v.x, v.y); }
constexpr double norm_sq(Vec2 v) { return v.x * v.x + v.y * v.y; }

/// Clockwise rotation by pi/2: (x, y) -> (y, -x). perp(perp(v)) = -v.
constexpr Vec2 perp(Vec2 v) { return {v.y, -v.x}; }

inline Vec2 normalized(Vec2 v) {
    const double n = norm(v);
    if (n == 0.0) throw Error("cannot normalize the zero vector");
    return v / n;
}

inline bool finite(Vec2 v) { return std::isfinite(v.x) && std::isfinite(v.y); }

/// Symmetric 2x2 matrix [[a, b], [b, c]].
struct SymMat2 {
    double a = 0.0;
    double b = 0.0;
    double c = 0.0;

    constexpr Vec2 operator*(Vec2 v) const { return {a * v.x + b * v.y, b * v.x + c * v.y}; }
    constexpr SymMat2 operator+(SymMat2 o) const { return {a + o.a, b + o.b, c + o.c}; }
    constexpr SymMat2 operator*(double s) const { return {s * a, s * b, s * c}; }
    constexpr double trace() const { return a + c; }
    constexpr double det() const { return a * c - b * b; }

    double quad(Vec2 v) const { return dot(v, (*this) * v); }

    /// Eigenvalues of a symmetric 2x2 matrix, smallest first.
    std::pair<double, double> eigenvalues() const {
        const double mean = 0.5 * (a + c);
        const double disc = std::sqrt(0.25 * (a - c) * (a - c) + b * b);
        return {mean - disc, mean + disc};
    }

    static constexpr SymMat2 identity() { return {1.0, 0.0, 1.0}; }
    static constexpr SymMat2 outer(Vec2 v) { return {v.x * v.x, v.x * v.y, v.y * v.y}; }
    /// v w^T + w v^T
    static constexpr SymMat2 sym_outer(Vec2 v, Vec2 w) {
        return {2.0 * v.x * w.x, v.x * w.y + v.y * w.x, 2.0 * v.y * w.y};
    }
};

} // namespace anisodiff
