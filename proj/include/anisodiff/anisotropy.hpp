#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <iostream>
#include <limits>
#include <utility>
#include <vector>

#include "anisodiff/vec.hpp"

namespace anisodiff {

enum class AnisotropyFamily { isotropic, riemannian, lr_norm, m_fold, regularized_l1, custom };

/// User-supplied surface energy in angle form. theta parameterizes the outward
/// normal as n = (-sin theta, cos theta). gamma_hat_pp may be left empty; the
/// second derivative is then formed by central differences (step 1e-5).
struct CustomGamma {
    std::function<double(double)> gamma_hat;
    std::function<double(double)> gamma_hat_prime;
    std::function<double(double)> gamma_hat_pp;
};

/// One-homogeneous anisotropic surface energy gamma(n) on the unit circle,
/// with its gradient (the xi vector), Hessian eigenvalue lambda(n) and the
/// angle parameterization gamma_hat(theta).
///
/// Every constructor validates gamma(-n) = gamma(n) numerically at 360
/// directions and gamma > 0; energies violating the symmetry are rejected.
class AnisotropySpec {
public:
    static AnisotropySpec isotropic() {
        AnisotropySpec s;
        s.family_ = AnisotropyFamily::isotropic;
        s.validate();
        return s;
    }

    /// gamma(n) = sum_l sqrt(n^T G_l n) with each G_l symmetric positive definite.
    static AnisotropySpec riemannian(std::vector<SymMat2> mats) {
        if (mats.empty()) throw ConfigError("riemannian anisotropy needs at least one matrix");
        for (const auto& g : mats) {
            if (!(g.det() > 0.0) || !(g.trace() > 0.0))
                throw ConfigError("riemannian anisotropy matrices must be positive definite");
        }
        AnisotropySpec s;
        s.family_ = AnisotropyFamily::riemannian;
        s.mats_ = std::move(mats);
        s.validate();
        return s;
    }

    /// gamma(n) = (|n1|^r + |n2|^r)^(1/r), r > 1.
    static AnisotropySpec lr_norm(double r) {
        if (!(r > 1.0)) throw ConfigError("lr_norm anisotropy needs r > 1");
        AnisotropySpec s;
        s.family_ = AnisotropyFamily::lr_norm;
        s.r_ = r;
        if (r < 2.0)
            std::cerr << "[anisodiff] notice: lr_norm with r < 2 is not C^2 at the axes; "
                         "lambda is formed by finite differences\n";
        s.validate();
        return s;
    }

    /// gamma_hat(theta) = 1 + beta cos(m (theta - theta0)), m in {2,3,4,6}.
    /// Odd m with beta > 0 violates gamma(-n) = gamma(n) and is rejected.
    static AnisotropySpec m_fold(int m, double beta, double theta0 = 0.0) {
        if (m != 2 && m != 3 && m != 4 && m != 6) throw ConfigError("m_fold anisotropy needs m in {2,3,4,6}");
        if (!(beta >= 0.0)) throw ConfigError("m_fold anisotropy needs beta >= 0");
        if (!(theta0 >= 0.0 && theta0 <= pi())) throw ConfigError("m_fold anisotropy needs theta0 in [0, pi]");
        AnisotropySpec s;
        s.family_ = AnisotropyFamily::m_fold;
        s.m_ = m;
        s.beta_ = beta;
        s.theta0_ = theta0;
        s.validate();
        return s;
    }

    /// gamma(n) = sqrt(n1^2 + eps^2 n2^2) + sqrt(eps^2 n1^2 + n2^2), 0 < eps < 1.
    static AnisotropySpec regularized_l1(double eps) {
        if (!(eps > 0.0 && eps < 1.0)) throw ConfigError("regularized_l1 anisotropy needs eps in (0,1)");
        AnisotropySpec s;
        s.family_ = AnisotropyFamily::regularized_l1;
        s.eps_ = eps;
        s.validate();
        return s;
    }

    static AnisotropySpec custom(CustomGamma g) {
        if (!g.gamma_hat || !g.gamma_hat_prime)
            throw ConfigError("custom anisotropy needs gamma_hat and gamma_hat_prime");
        AnisotropySpec s;
        s.family_ = AnisotropyFamily::custom;
        s.custom_ = std::move(g);
        s.validate();
        return s;
    }

    AnisotropyFamily family() const { return family_; }
    const std::vector<SymMat2>& matrices() const { return mats_; }
    double lr_exponent() const { return r_; }
    int fold_count() const { return m_; }
    double fold_beta() const { return beta_; }
    double fold_theta0() const { return theta0_; }
    double l1_eps() const { return eps_; }

    static constexpr double pi() { return 3.14159265358979323846; }

    /// Outward normal for angle theta (Frank convention n = (-sin, cos)).
    static Vec2 normal_of_theta(double theta) { return {-std::sin(theta), std::cos(theta)}; }
    static double theta_of_normal(Vec2 n) { return std::atan2(-n.x, n.y); }

    double gamma(Vec2 n) const {
        switch (family_) {
            case AnisotropyFamily::isotropic: return 1.0;
            case AnisotropyFamily::riemannian: {
                double g = 0.0;
                for (const auto& G : mats_) g += std::sqrt(G.quad(n));
                return g;
            }
            case AnisotropyFamily::lr_norm:
                return std::pow(std::pow(std::abs(n.x), r_) + std::pow(std::abs(n.y), r_), 1.0 / r_);
            case AnisotropyFamily::m_fold:
                return 1.0 + beta_ * std::cos(m_ * (theta_of_normal(n) - theta0_));
            case AnisotropyFamily::regularized_l1:
                return std::sqrt(n.x * n.x + eps_ * eps_ * n.y * n.y) +
                       std::sqrt(eps_ * eps_ * n.x * n.x + n.y * n.y);
            case AnisotropyFamily::custom:
                return custom_.gamma_hat(theta_of_normal(n));
        }
        throw Error("unreachable");
    }

    /// One-homogeneous extension: |p| gamma(p/|p|), and 0 at p = 0.
    double gamma_ext(Vec2 p) const {
        const double len = norm(p);
        if (len == 0.0) return 0.0;
        return len * gamma(p / len);
    }

    /// Gradient of gamma_ext at n; satisfies xi . n = gamma(n).
    Vec2 xi(Vec2 n) const {
        switch (family_) {
            case AnisotropyFamily::isotropic: return n;
            case AnisotropyFamily::riemannian: {
                Vec2 v{0.0, 0.0};
                for (const auto& G : mats_) v += (G * n) / std::sqrt(G.quad(n));
                return v;
            }
            case AnisotropyFamily::lr_norm: {
                const double g = gamma(n);
                auto comp = [this](double t) {
                    return t == 0.0 ? 0.0 : std::copysign(std::pow(std::abs(t), r_ - 1.0), t);
                };
                return std::pow(g, 1.0 - r_) * Vec2{comp(n.x), comp(n.y)};
            }
            case AnisotropyFamily::m_fold:
            case AnisotropyFamily::custom: {
                const double th = theta_of_normal(n);
                return gamma_hat(th) * n - gamma_hat_prime(th) * perp(n);
            }
            case AnisotropyFamily::regularized_l1: {
                const Vec2 g1 = SymMat2{1.0, 0.0, eps_ * eps_} * n;
                const Vec2 g2 = SymMat2{eps_ * eps_, 0.0, 1.0} * n;
                return g1 / std::sqrt(n.x * n.x + eps_ * eps_ * n.y * n.y) +
                       g2 / std::sqrt(eps_ * eps_ * n.x * n.x + n.y * n.y);
            }
        }
        throw Error("unreachable");
    }

    /// The nonzero eigenvalue of the Hessian of gamma_ext at n (the other one
    /// is 0 with eigenvector n). Equals gamma_hat + gamma_hat'' in angle form.
    double lambda(Vec2 n) const {
        switch (family_) {
            case AnisotropyFamily::isotropic: return 1.0;
            case AnisotropyFamily::riemannian: {
                double lam = 0.0;
                for (const auto& G : mats_) lam += G.det() / std::pow(std::sqrt(G.quad(n)), 3.0);
                return lam;
            }
            case AnisotropyFamily::lr_norm: {
                if (r_ < 2.0) return lambda_fd(theta_of_normal(n));
                const double g = gamma(n);
                const double prod = std::abs(n.x * n.y);
                const double powed = (r_ == 2.0) ? 1.0 : std::pow(prod, r_ - 2.0);
                return (r_ - 1.0) * powed / std::pow(g, 2.0 * r_ - 1.0);
            }
            case AnisotropyFamily::m_fold:
                return 1.0 - beta_ * (m_ * m_ - 1.0) * std::cos(m_ * (theta_of_normal(n) - theta0_));
            case AnisotropyFamily::regularized_l1: {
                const double g1 = std::sqrt(n.x * n.x + eps_ * eps_ * n.y * n.y);
                const double g2 = std::sqrt(eps_ * eps_ * n.x * n.x + n.y * n.y);
                return eps_ * eps_ * (1.0 / (g1 * g1 * g1) + 1.0 / (g2 * g2 * g2));
            }
            case AnisotropyFamily::custom: {
                const double th = theta_of_normal(n);
                if (custom_.gamma_hat_pp) return custom_.gamma_hat(th) + custom_.gamma_hat_pp(th);
                return lambda_fd(th);
            }
        }
        throw Error("unreachable");
    }

    /// H_gamma(n) = lambda(n) (n^perp)(n^perp)^T; satisfies H n = 0.
    SymMat2 hessian(Vec2 n) const { return SymMat2::outer(perp(n)) * lambda(n); }

    double gamma_hat(double theta) const {
        switch (family_) {
            case AnisotropyFamily::m_fold: return 1.0 + beta_ * std::cos(m_ * (theta - theta0_));
            case AnisotropyFamily::custom: return custom_.gamma_hat(theta);
            default: return gamma(normal_of_theta(theta));
        }
    }

    double gamma_hat_prime(double theta) const {
        switch (family_) {
            case AnisotropyFamily::m_fold: return -beta_ * m_ * std::sin(m_ * (theta - theta0_));
            case AnisotropyFamily::custom: return custom_.gamma_hat_prime(theta);
            default: {
                // gamma_hat' = -xi . n^perp (chain rule, dn/dtheta = -n^perp)
                const Vec2 n = normal_of_theta(theta);
                return -dot(xi(n), perp(n));
            }
        }
    }

    /// Extended-precision gamma_hat for the built-in families. The stabilizer
    /// quotient cancels catastrophically near its removable singularity; the
    /// extra mantissa bits keep that evaluation meaningful. Custom energies
    /// fall back to double-precision values.
    long double gamma_hat_ld(long double theta) const {
        const long double n1 = -std::sin(theta);
        const long double n2 = std::cos(theta);
        switch (family_) {
            case AnisotropyFamily::isotropic: return 1.0L;
            case AnisotropyFamily::riemannian: {
                long double g = 0.0L;
                for (const auto& G : mats_)
                    g += std::sqrt(G.a * n1 * n1 + 2.0L * G.b * n1 * n2 + G.c * n2 * n2);
                return g;
            }
            case AnisotropyFamily::lr_norm:
                return std::pow(std::pow(std::abs(n1), (long double)r_) +
                                    std::pow(std::abs(n2), (long double)r_),
                                1.0L / r_);
            case AnisotropyFamily::m_fold:
                return 1.0L + beta_ * std::cos(m_ * (theta - (long double)theta0_));
            case AnisotropyFamily::regularized_l1: {
                const long double e2 = (long double)eps_ * eps_;
                return std::sqrt(n1 * n1 + e2 * n2 * n2) + std::sqrt(e2 * n1 * n1 + n2 * n2);
            }
            case AnisotropyFamily::custom:
                return custom_.gamma_hat(static_cast<double>(theta));
        }
        throw Error("unreachable");
    }

private:
    AnisotropySpec() = default;

    double lambda_fd(double theta) const {
        const double h = 1e-5;
        const double second =
            (gamma_hat(theta + h) - 2.0 * gamma_hat(theta) + gamma_hat(theta - h)) / (h * h);
        return gamma_hat(theta) + second;
    }

    void validate() const {
        const int samples = 360;
        for (int i = 0; i < samples; ++i) {
            const double th = -pi() + 2.0 * pi() * i / samples;
            const Vec2 n = normal_of_theta(th);
            const double g = gamma(n);
            if (!std::isfinite(g) || !(g > 0.0))
                throw ConfigError("anisotropy must satisfy gamma(n) > 0 on the unit circle");
            const double gm = gamma(-n);
            if (std::abs(g - gm) > 1e-12 * std::max(1.0, std::abs(g)))
                throw ConfigError(
                    "anisotropy must satisfy the symmetry gamma(-n) = gamma(n); "
                    "the energy-stable scheme requires it");
        }
    }

    AnisotropyFamily family_ = AnisotropyFamily::isotropic;
    std::vector<SymMat2> mats_;
    double r_ = 2.0;
    int m_ = 2;
    double beta_ = 0.0;
    double theta0_ = 0.0;
    double eps_ = 0.1;
    CustomGamma custom_;
};

enum class AnisotropyClass { weak, strong };

/// Weak iff lambda(n) >= -1e-12 at all sampled directions; strong otherwise.
inline AnisotropyClass classify(const AnisotropySpec& aniso, int samples = 360) {
    if (samples < 64) throw ConfigError("classify needs at least 64 samples");
    double lambda_min = std::numeric_limits<double>::infinity();
    for (int i = 0; i < samples; ++i) {
        const double th = -AnisotropySpec::pi() + 2.0 * AnisotropySpec::pi() * i / samples;
        lambda_min = std::min(lambda_min, aniso.lambda(AnisotropySpec::normal_of_theta(th)));
    }
    return lambda_min >= -1e-12 ? AnisotropyClass::weak : AnisotropyClass::strong;
}

struct FrankDiagram {
    std::vector<Vec2> points; // closed polyline tracing the 1/gamma plot
    bool convex = true;       // convex iff the energy is weakly anisotropic
};

inline FrankDiagram frank_diagram(const AnisotropySpec& aniso, int m_points) {
    if (m_points < 16) throw ConfigError("frank_diagram needs at least 16 points");
    FrankDiagram fd;
    fd.points.reserve(m_points);
    for (int i = 0; i < m_points; ++i) {
        const double phi = 2.0 * AnisotropySpec::pi() * i / m_points;
        const Vec2 u{std::cos(phi), std::sin(phi)};
        fd.points.push_back(u / aniso.gamma(u));
    }
    fd.convex = classify(aniso, std::max(m_points, 360)) == AnisotropyClass::weak;
    return fd;
}

} // namespace anisodiff
