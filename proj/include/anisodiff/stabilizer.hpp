#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "anisodiff/anisotropy.hpp"
#include "anisodiff/vec.hpp"

namespace anisodiff {

/// Surface energy matrix Z_k(n) = gamma(n) I - n xi^T - xi n^T + k(n) n n^T.
/// Satisfies Z_k(n) n^perp = perp(xi) and (n^perp)^T Z_k n^perp = gamma(n).
inline SymMat2 zk_matrix(const AnisotropySpec& aniso, Vec2 n, double k) {
    if (!(k > 0.0)) throw ConfigError("zk_matrix needs k > 0");
    const double g = aniso.gamma(n);
    const Vec2 xi = aniso.xi(n);
    return SymMat2::identity() * g + SymMat2::sym_outer(n, xi) * (-1.0) + SymMat2::outer(n) * k;
}

/// Value of F(n, nhat) as nhat -> n: (n^perp)^T H_gamma(n) n^perp + |xi|^2 / gamma(n)
/// = lambda(n) + |xi|^2 / gamma(n).
inline double stabilizer_limit(const AnisotropySpec& aniso, Vec2 n) {
    return aniso.lambda(n) + norm_sq(aniso.xi(n)) / aniso.gamma(n);
}

/// Raw quotient
///   F(n, nhat) = [gamma(nhat)^2 - gamma(n)^2 + 2 gamma(n) (xi . nhat^perp)(n . nhat^perp)]
///                / [gamma(n) (n . nhat^perp)^2],
/// undefined at nhat = +-n. Exposed unregularized for limit verification.
inline double f_quotient(const AnisotropySpec& aniso, Vec2 n, Vec2 nhat) {
    const double g = aniso.gamma(n);
    const double gh = aniso.gamma(nhat);
    const Vec2 xi = aniso.xi(n);
    const Vec2 hp = perp(nhat);
    const double s = dot(n, hp);
    return (gh * gh - g * g + 2.0 * g * dot(xi, hp) * s) / (g * s * s);
}

/// F(n, nhat) with the removable singularity at nhat = n filled by its limit
/// whenever |n . nhat^perp| < delta. nhat = -n is a genuine pole and rejected.
inline double f_value(const AnisotropySpec& aniso, Vec2 n, Vec2 nhat, double delta = 1e-4) {
    const double s = dot(n, perp(nhat));
    if (std::abs(s) < delta) {
        if (dot(n, nhat) < 0.0)
            throw ConfigError("F(n, nhat) has a pole at nhat = -n");
        return stabilizer_limit(aniso, n);
    }
    return f_quotient(aniso, n, nhat);
}

/// Single-variable form of F built from the angle parameterization:
///   Ftilde^theta(that) = [gh(that)^2 - gh(theta)^2
///                         - 2 gh(theta) gh'(theta) cos(that-theta) sin(that-theta)]
///                        / [gh(theta) sin^2(that-theta)] + 2 gh(theta).
/// The removable singularity at that = theta (mod pi ... excluded -n) uses the limit.
inline double f_tilde(const AnisotropySpec& aniso, double theta, double theta_hat,
                      double delta = 1e-4) {
    const double d = theta_hat - theta;
    const double sd = std::sin(d);
    if (std::abs(sd) < delta) {
        if (std::cos(d) < 0.0)
            throw ConfigError("Ftilde has a pole at theta_hat = theta + pi");
        return stabilizer_limit(aniso, AnisotropySpec::normal_of_theta(theta));
    }
    if (std::abs(sd) < 0.05) {
        // gamma_hat(that)^2 - gamma_hat(theta)^2 cancels to O(d^2) here; the
        // extra mantissa bits keep roughly five digits that double loses
        const long double gl = aniso.gamma_hat_ld(theta);
        const long double ghl = aniso.gamma_hat_ld(theta_hat);
        const long double sl = std::sin((long double)theta_hat - theta);
        const long double cl = std::cos((long double)theta_hat - theta);
        const long double gp = aniso.gamma_hat_prime(theta);
        const long double num = ghl * ghl - gl * gl - 2.0L * gl * gp * cl * sl;
        return static_cast<double>(num / (gl * sl * sl) + 2.0L * gl);
    }
    const double g = aniso.gamma_hat(theta);
    const double gp = aniso.gamma_hat_prime(theta);
    const double gh = aniso.gamma_hat(theta_hat);
    return (gh * gh - g * g - 2.0 * g * gp * std::cos(d) * sd) / (g * sd * sd) + 2.0 * g;
}

namespace detail {

/// Golden-section maximization of f on [lo, hi] to the given abscissa tolerance.
template <class F>
double golden_max(F&& f, double lo, double hi, double xtol) {
    constexpr double inv_phi = 0.6180339887498949;
    double a = lo, b = hi;
    double x1 = b - inv_phi * (b - a);
    double x2 = a + inv_phi * (b - a);
    double f1 = f(x1), f2 = f(x2);
    while (b - a > xtol) {
        if (f1 < f2) {
            a = x1;
            x1 = x2;
            f1 = f2;
            x2 = a + inv_phi * (b - a);
            f2 = f(x2);
        } else {
            b = x2;
            x2 = x1;
            f2 = f1;
            x1 = b - inv_phi * (b - a);
            f1 = f(x1);
        }
    }
    return std::max(f1, f2);
}

} // namespace detail

/// Minimal stabilizing value k0 at angle theta: the maximum of Ftilde^theta over
/// the closed half period [theta - pi/2, theta + pi/2]. A dense pre-scan (513
/// samples, endpoints and the analytic limit at that = theta included) brackets
/// the global maximizer; golden-section refinement polishes it to 1e-12 in the
/// abscissa.
inline double k0_numeric(const AnisotropySpec& aniso, double theta) {
    constexpr int scan = 513;
    const double half = 0.5 * AnisotropySpec::pi();
    const double lo = theta - half;
    const double step = 2.0 * half / (scan - 1);

    auto f = [&](double th) { return f_tilde(aniso, theta, th); };

    double best = -std::numeric_limits<double>::infinity();
    int best_i = 0;
    for (int i = 0; i < scan; ++i) {
        const double v = f(lo + i * step);
        if (!std::isfinite(v))
            throw NumericalError("non-finite stabilizer quotient; anisotropy violates its contract");
        if (v > best) {
            best = v;
            best_i = i;
        }
    }

    const double bl = lo + std::max(0, best_i - 1) * step;
    const double br = lo + std::min(scan - 1, best_i + 1) * step;
    const double refined = detail::golden_max(f, bl, br, 1e-12);
    best = std::max(best, refined);

    if (!(best > 0.0)) throw NumericalError("minimal stabilizing value is not positive");
    return best;
}

inline double k0_numeric(const AnisotropySpec& aniso, Vec2 n) {
    return k0_numeric(aniso, AnisotropySpec::theta_of_normal(n));
}

/// Closed-form minimal stabilizer (or a valid upper bound) where one is known:
///  - riemannian: sum_l Tr(G_l)/gamma_l(n); exact for L = 1, an upper bound for L > 1
///  - isotropic: 2
///  - l^4: 2 gamma^-3;  l^6: 2 gamma^-5 (n1^4 + n1^2 n2^2 + n2^4)
///  - 2-fold, theta0 in {0, pi/2}: 4 - 2 gamma + 4 beta^2 / gamma (exact)
///  - 4-fold, theta0 = 0: 2 gamma + (16 beta + 16 beta^2) / gamma (upper bound)
/// Absent for anything else; callers then fall back to k0_numeric.
inline std::optional<double> k0_explicit(const AnisotropySpec& aniso, Vec2 n) {
    switch (aniso.family()) {
        case AnisotropyFamily::isotropic:
            return 2.0;
        case AnisotropyFamily::riemannian: {
            double k = 0.0;
            for (const auto& G : aniso.matrices()) k += G.trace() / std::sqrt(G.quad(n));
            return k;
        }
        case AnisotropyFamily::regularized_l1: {
            const double e2 = aniso.l1_eps() * aniso.l1_eps();
            return (1.0 + e2) / std::sqrt(n.x * n.x + e2 * n.y * n.y) +
                   (1.0 + e2) / std::sqrt(e2 * n.x * n.x + n.y * n.y);
        }
        case AnisotropyFamily::lr_norm: {
            const double g = aniso.gamma(n);
            if (aniso.lr_exponent() == 4.0) return 2.0 / (g * g * g);
            if (aniso.lr_exponent() == 6.0) {
                const double n1 = n.x * n.x, n2 = n.y * n.y;
                return 2.0 * (n1 * n1 + n1 * n2 + n2 * n2) / std::pow(g, 5.0);
            }
            return std::nullopt;
        }
        case AnisotropyFamily::m_fold: {
            const double g = aniso.gamma(n);
            const double beta = aniso.fold_beta();
            const double t0 = aniso.fold_theta0();
            if (aniso.fold_count() == 2 &&
                (t0 == 0.0 || t0 == 0.5 * AnisotropySpec::pi()))
                return 4.0 - 2.0 * g + 4.0 * beta * beta / g;
            if (aniso.fold_count() == 4 && t0 == 0.0)
                return 2.0 * g + (16.0 * beta + 16.0 * beta * beta) / g;
            return std::nullopt;
        }
        case AnisotropyFamily::custom:
            return std::nullopt;
    }
    return std::nullopt;
}

/// True when k0_explicit returns the exact minimal stabilizer rather than an
/// upper bound (riemannian with a single matrix, isotropic, l^4/l^6, 2-fold).
inline bool k0_explicit_is_exact(const AnisotropySpec& aniso) {
    switch (aniso.family()) {
        case AnisotropyFamily::isotropic: return true;
        case AnisotropyFamily::riemannian: return aniso.matrices().size() == 1;
        case AnisotropyFamily::lr_norm:
            return aniso.lr_exponent() == 4.0 || aniso.lr_exponent() == 6.0;
        case AnisotropyFamily::m_fold: return aniso.fold_count() == 2;
        default: return false;
    }
}

/// Strategy for producing a stabilizing function k(n) >= k0(n).
struct StabilizerChoice {
    enum class Mode { explicit_formula, numeric_k0, constant, scaled_numeric };
    Mode mode = Mode::explicit_formula;
    double constant_k = 0.0; // constant mode
    double margin = 1.0;     // scaled_numeric mode, >= 1

    static StabilizerChoice explicit_formula() { return {Mode::explicit_formula, 0.0, 1.0}; }
    static StabilizerChoice numeric() { return {Mode::numeric_k0, 0.0, 1.0}; }
    static StabilizerChoice constant(double k) {
        if (!(k > 0.0)) throw ConfigError("constant stabilizer needs k > 0");
        return {Mode::constant, k, 1.0};
    }
    static StabilizerChoice scaled_numeric(double m) {
        if (!(m >= 1.0)) throw ConfigError("scaled numeric stabilizer needs margin >= 1");
        return {Mode::scaled_numeric, 0.0, m};
    }
};

/// Evaluates the chosen stabilizing function. Numeric modes pre-tabulate
/// k0_numeric at `resolution` uniform angles; lookups take the larger of the
/// two bracketing samples and the interpolant, inflated by a 1 + 1e-6 margin,
/// so the table never undershoots k0 between samples. Immutable once built.
class KProvider {
public:
    KProvider(const AnisotropySpec& aniso, StabilizerChoice choice, int resolution = 4096)
        : aniso_(aniso), choice_(choice) {
        using Mode = StabilizerChoice::Mode;
        if (choice_.mode == Mode::explicit_formula) {
            if (!k0_explicit(aniso_, Vec2{0.0, 1.0}))
                throw ConfigError("no closed-form stabilizer for this anisotropy; "
                                  "use the numeric mode");
        }
        if (choice_.mode == Mode::numeric_k0 || choice_.mode == Mode::scaled_numeric) {
            table_.resize(resolution);
            for (int i = 0; i < resolution; ++i) {
                const double th =
                    -AnisotropySpec::pi() + 2.0 * AnisotropySpec::pi() * i / resolution;
                table_[i] = k0_numeric(aniso_, th);
            }
        }
    }

    double operator()(Vec2 n) const { return at_theta(AnisotropySpec::theta_of_normal(n), n); }

    double at_theta(double theta) const {
        return at_theta(theta, AnisotropySpec::normal_of_theta(theta));
    }

private:
    double at_theta(double theta, Vec2 n) const {
        using Mode = StabilizerChoice::Mode;
        switch (choice_.mode) {
            case Mode::constant: return choice_.constant_k;
            case Mode::explicit_formula: return *k0_explicit(aniso_, n);
            case Mode::numeric_k0: return choice_.margin * cached(theta);
            case Mode::scaled_numeric: return choice_.margin * cached(theta);
        }
        throw Error("unreachable");
    }

    double cached(double theta) const {
        const int res = static_cast<int>(table_.size());
        const double two_pi = 2.0 * AnisotropySpec::pi();
        double t = (theta + AnisotropySpec::pi()) / two_pi * res;
        t -= std::floor(t / res) * res; // periodic wrap
        const int i0 = static_cast<int>(t) % res;
        const int i1 = (i0 + 1) % res;
        const double w = t - std::floor(t);
        const double lerp = (1.0 - w) * table_[i0] + w * table_[i1];
        return (1.0 + 1e-6) * std::max({lerp, table_[i0], table_[i1]});
    }

    AnisotropySpec aniso_;
    StabilizerChoice choice_;
    std::vector<double> table_;
};

struct DissipationAuditReport {
    double min_gap = 0.0; // min over the grid of gamma(n) (nhat^perp)^T Z_k nhat^perp - gamma(nhat)^2
    double theta_at_min = 0.0;
    double theta_hat_at_min = 0.0;
    double gamma_max = 0.0;
    bool pass = false;
};

/// Samples the energy-dissipation inequality
///   gamma(n) (nhat^perp)^T Z_k(n) nhat^perp >= gamma(nhat)^2
/// on a grid x grid set of (n, nhat) pairs. Passes when the worst violation
/// stays above -1e-10 max(1, gamma_max^2).
template <class KFn>
DissipationAuditReport dissipation_audit(const AnisotropySpec& aniso, KFn&& k_of_n, int grid) {
    if (grid < 64) throw ConfigError("dissipation_audit needs grid >= 64");
    DissipationAuditReport rep;
    rep.min_gap = std::numeric_limits<double>::infinity();

    std::vector<double> gammas(grid);
    std::vector<Vec2> normals(grid);
    for (int i = 0; i < grid; ++i) {
        const double th = -AnisotropySpec::pi() + 2.0 * AnisotropySpec::pi() * i / grid;
        normals[i] = AnisotropySpec::normal_of_theta(th);
        gammas[i] = aniso.gamma(normals[i]);
        rep.gamma_max = std::max(rep.gamma_max, gammas[i]);
    }

    for (int i = 0; i < grid; ++i) {
        const Vec2 n = normals[i];
        const SymMat2 zk = zk_matrix(aniso, n, k_of_n(n));
        for (int j = 0; j < grid; ++j) {
            const Vec2 hp = perp(normals[j]);
            const double gap = gammas[i] * zk.quad(hp) - gammas[j] * gammas[j];
            if (gap < rep.min_gap) {
                rep.min_gap = gap;
                rep.theta_at_min = AnisotropySpec::theta_of_normal(n);
                rep.theta_hat_at_min = AnisotropySpec::theta_of_normal(normals[j]);
            }
        }
    }
    rep.pass = rep.min_gap >= -1e-10 * std::max(1.0, rep.gamma_max * rep.gamma_max);
    return rep;
}

} // namespace anisodiff
