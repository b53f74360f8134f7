#pragma once

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <functional>
#include <limits>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "anisodiff/banded.hpp"
#include "anisodiff/curve.hpp"
#include "anisodiff/diagnostics.hpp"
#include "anisodiff/stabilizer.hpp"
#include "anisodiff/vec.hpp"

namespace anisodiff {

/// Curve plus nodal chemical potential; the unknown of one time step.
struct CurveState {
    PolygonalCurve curve;
    std::vector<double> mu;
    double time = 0.0;

    CurveState(PolygonalCurve c, std::vector<double> m, double t)
        : curve(std::move(c)), mu(std::move(m)), time(t) {
        if (mu.size() != curve.size())
            throw ConfigError("chemical potential field size does not match the curve");
    }

    static CurveState rest(PolygonalCurve c) {
        const std::size_t n = c.size();
        return CurveState(std::move(c), std::vector<double>(n, 0.0), 0.0);
    }
};

enum class SchemeVariant { sp_implicit, semi_implicit };

struct SchemeConfig {
    int n = 0;          // spatial resolution (number of nodes); tau_rule h^2 gives tau = 1/n^2
    double tau = 0.0;   // time step, > 0
    double newton_tol = 1e-12;
    int newton_max_iters = 50;
    SchemeVariant variant = SchemeVariant::sp_implicit;
    StabilizerChoice stabilizer = StabilizerChoice::explicit_formula();

    void check() const {
        if (!(tau > 0.0)) throw ConfigError("scheme needs tau > 0");
        if (!(newton_tol > 0.0)) throw ConfigError("scheme needs newton_tol > 0");
        if (newton_max_iters < 1) throw ConfigError("scheme needs newton_max_iters >= 1");
    }
};

/// Interpolated edge normal between the current curve and a candidate:
/// on edge j, -(h_j^m + h_j^new)^perp / (2 |h_j^m|). Collapses to the edge
/// outward normal when the candidate equals the current curve. Not unit length.
inline std::vector<Vec2> half_step_normal(const PolygonalCurve& current,
                                          const PolygonalCurve& candidate) {
    if (current.size() != candidate.size())
        throw ConfigError("half_step_normal needs matching vertex counts");
    const std::size_t n = current.size();
    std::vector<Vec2> out(n);
    for (std::size_t j = 0; j < n; ++j) {
        const Vec2 hm = current.edge_vector(j);
        const double len = norm(hm);
        if (len == 0.0) throw NumericalError("degenerate edge " + std::to_string(j));
        out[j] = -perp(hm + candidate.edge_vector(j)) / (2.0 * len);
    }
    return out;
}

namespace detail {

/// Assembles the residual and Jacobian of one time step. All geometric
/// coefficients (edge lengths, outward normals, Z_k matrices) are frozen on
/// the current curve; only the interpolated normal couples the candidate
/// nonlinearly, and only in the fully implicit variant.
///
/// Per node i (edge j runs from vertex j-1 to vertex j):
///   scalar row   a_i = w_i . (q_i + q_{i+1}) + (mu_i - mu_{i-1})/|h_i|
///                      - (mu_{i+1} - mu_i)/|h_{i+1}|
///   vector row   b_i = mu_i (q_i + q_{i+1}) - Z_i h_i^new/|h_i| + Z_{i+1} h_{i+1}^new/|h_{i+1}|
/// with w_i = (X_i^new - X_i)/tau and q_j = -(h_j + h_j^new)^perp / 4 for the
/// implicit variant, q_j = |h_j| n_j / 2 for the semi-implicit one.
class StepAssembler {
public:
    StepAssembler(const CurveState& state, const AnisotropySpec& aniso, const KProvider& k,
                  double tau, SchemeVariant variant)
        : x_old_(state.curve.vertices()), tau_(tau), variant_(variant) {
        const std::size_t n = x_old_.size();
        len_.resize(n);
        normal_.resize(n);
        zk_.resize(n);
        for (std::size_t j = 0; j < n; ++j) {
            const Vec2 h = state.curve.edge_vector(j);
            len_[j] = norm(h);
            normal_[j] = -perp(h) / len_[j];
            zk_[j] = zk_matrix(aniso, normal_[j], k(normal_[j]));
        }
    }

    std::size_t nodes() const { return x_old_.size(); }

    /// Residual in the internal node-interleaved layout [b_i.x, b_i.y, a_i].
    /// When scale_out is given it receives the largest row magnitude (sum of
    /// absolute term sizes), the natural reference for the round-off floor of
    /// the residual evaluation.
    std::vector<double> residual(std::span<const Vec2> x_new, std::span<const double> mu_new,
                                 double* scale_out = nullptr) const {
        const std::size_t n = nodes();
        check_sizes(x_new, mu_new);
        std::vector<Vec2> q(n);
        for (std::size_t j = 0; j < n; ++j) q[j] = q_edge(j, x_new);

        double scale = 0.0;
        std::vector<double> r(3 * n);
        for (std::size_t i = 0; i < n; ++i) {
            const std::size_t im = (i + n - 1) % n;
            const std::size_t ip = (i + 1) % n;
            const Vec2 qsum = q[i] + q[ip];
            const Vec2 w = (x_new[i] - x_old_[i]) / tau_;

            const double a = dot(w, qsum) + (mu_new[i] - mu_new[im]) / len_[i] -
                             (mu_new[ip] - mu_new[i]) / len_[ip];

            const Vec2 h_i = x_new[i] - x_new[im];
            const Vec2 h_ip = x_new[ip] - x_new[i];
            const Vec2 b =
                mu_new[i] * qsum - (zk_[i] * h_i) / len_[i] + (zk_[ip] * h_ip) / len_[ip];

            r[3 * i + 0] = b.x;
            r[3 * i + 1] = b.y;
            r[3 * i + 2] = a;

            if (scale_out) {
                const double qs = norm(q[i]) + norm(q[ip]);
                const double a_scale = norm(w) * qs +
                                       (std::abs(mu_new[i]) + std::abs(mu_new[im])) / len_[i] +
                                       (std::abs(mu_new[ip]) + std::abs(mu_new[i])) / len_[ip];
                const double zi = std::max({std::abs(zk_[i].a), std::abs(zk_[i].b),
                                            std::abs(zk_[i].c)});
                const double zp = std::max({std::abs(zk_[ip].a), std::abs(zk_[ip].b),
                                            std::abs(zk_[ip].c)});
                const double b_scale = std::abs(mu_new[i]) * qs +
                                       2.0 * zi * norm(h_i) / len_[i] +
                                       2.0 * zp * norm(h_ip) / len_[ip];
                scale = std::max({scale, a_scale, b_scale});
            }
        }
        if (scale_out) *scale_out = scale;
        return r;
    }

    /// Exact Jacobian of residual() with respect to (x_new, mu_new), in the
    /// same node-interleaved layout (columns per node: x, y, mu).
    CyclicBlockTridiagonal jacobian(std::span<const Vec2> x_new,
                                    std::span<const double> mu_new) const {
        const std::size_t n = nodes();
        check_sizes(x_new, mu_new);
        std::vector<Vec2> q(n);
        for (std::size_t j = 0; j < n; ++j) q[j] = q_edge(j, x_new);

        const bool implicit = variant_ == SchemeVariant::sp_implicit;
        CyclicBlockTridiagonal jac(static_cast<int>(n));
        for (std::size_t i = 0; i < n; ++i) {
            const std::size_t ip = (i + 1) % n;
            const Vec2 qsum = q[i] + q[ip];
            const Vec2 w = (x_new[i] - x_old_[i]) / tau_;

            auto& D = jac.diag[i];
            auto& L = jac.lower[i];
            auto& U = jac.upper[i];

            // d q_j / d X_j = -P/4, d q_j / d X_{j-1} = +P/4 with P a = a^perp
            // (implicit variant only; q is frozen in the semi-implicit one).
            // Vector rows: d b_i / d X_i has no q contribution (the two cancel).
            const SymMat2 zi = zk_[i] * (1.0 / len_[i]);
            const SymMat2 zp = zk_[ip] * (1.0 / len_[ip]);

            // rows 0..1 = b_i, columns x,y then mu
            D[0] = -(zi.a + zp.a);
            D[1] = -(zi.b + zp.b);
            D[3] = -(zi.b + zp.b);
            D[4] = -(zi.c + zp.c);
            D[2] = qsum.x;
            D[5] = qsum.y;

            L[0] = zi.a;
            L[1] = zi.b;
            L[3] = zi.b;
            L[4] = zi.c;
            U[0] = zp.a;
            U[1] = zp.b;
            U[3] = zp.b;
            U[4] = zp.c;

            // row 2 = a_i
            D[6] = qsum.x / tau_;
            D[7] = qsum.y / tau_;
            D[8] = 1.0 / len_[i] + 1.0 / len_[ip];
            L[8] = -1.0 / len_[i];
            U[8] = -1.0 / len_[ip];

            if (implicit) {
                // mu_i (dq_i/dX_{i-1}) = mu_i P/4 and mu_i (dq_{i+1}/dX_{i+1}) = -mu_i P/4;
                // P = [[0,1],[-1,0]] maps a to a^perp.
                const double quarter_mu = 0.25 * mu_new[i];
                L[1] += quarter_mu;
                L[3] += -quarter_mu;
                U[1] += -quarter_mu;
                U[3] += quarter_mu;

                // w_i^T (P/4) and w_i^T (-P/4): w^T P = (-w.y, w.x)
                L[6] += -0.25 * w.y;
                L[7] += 0.25 * w.x;
                U[6] += 0.25 * w.y;
                U[7] += -0.25 * w.x;
            }
        }
        return jac;
    }

private:
    void check_sizes(std::span<const Vec2> x_new, std::span<const double> mu_new) const {
        if (x_new.size() != nodes() || mu_new.size() != nodes())
            throw ConfigError("candidate size does not match the current curve");
    }

    Vec2 q_edge(std::size_t j, std::span<const Vec2> x_new) const {
        if (variant_ == SchemeVariant::semi_implicit) return 0.5 * len_[j] * normal_[j];
        const std::size_t n = nodes();
        const std::size_t jm = (j + n - 1) % n;
        const Vec2 h_old = x_old_[j] - x_old_[jm];
        const Vec2 h_new = x_new[j] - x_new[jm];
        return -0.25 * perp(h_old + h_new);
    }

    std::vector<Vec2> x_old_;
    double tau_;
    SchemeVariant variant_;
    std::vector<double> len_;
    std::vector<Vec2> normal_;
    std::vector<SymMat2> zk_;
};

inline double max_norm(std::span<const double> v) {
    double m = 0.0;
    for (double x : v) m = std::max(m, std::abs(x));
    return m;
}

} // namespace detail

/// Residual of one time step in the documented public layout: rows 0..N-1 are
/// the scalar equations tested against the nodal hat functions, rows N..3N-1
/// the vector equations (x then y component per node).
inline std::vector<double> assemble_residual(const CurveState& state,
                                             const CurveState& candidate,
                                             const AnisotropySpec& aniso, const KProvider& k,
                                             double tau,
                                             SchemeVariant variant = SchemeVariant::sp_implicit) {
    detail::StepAssembler as(state, aniso, k, tau, variant);
    if (candidate.curve.size() != state.curve.size())
        throw ConfigError("candidate size does not match the current curve");
    const auto r = as.residual(candidate.curve.vertices(), candidate.mu);
    const std::size_t n = state.curve.size();
    std::vector<double> out(3 * n);
    for (std::size_t i = 0; i < n; ++i) {
        out[i] = r[3 * i + 2];
        out[n + 2 * i] = r[3 * i + 0];
        out[n + 2 * i + 1] = r[3 * i + 1];
    }
    return out;
}

/// Dense Jacobian of assemble_residual, rows in the public residual layout and
/// columns ordered [X (x,y per node); mu]. Cyclic block tridiagonal up to the
/// wrap; meant for verification, the solver uses the banded form internally.
inline std::vector<double> assemble_jacobian(const CurveState& state,
                                             const CurveState& candidate,
                                             const AnisotropySpec& aniso, const KProvider& k,
                                             double tau,
                                             SchemeVariant variant = SchemeVariant::sp_implicit) {
    detail::StepAssembler as(state, aniso, k, tau, variant);
    if (candidate.curve.size() != state.curve.size())
        throw ConfigError("candidate size does not match the current curve");
    const auto jac = as.jacobian(candidate.curve.vertices(), candidate.mu);
    const std::size_t n = state.curve.size();
    const std::size_t dim = 3 * n;

    auto public_row = [n](std::size_t node, int local_row) {
        return local_row == 2 ? node : n + 2 * node + local_row;
    };
    auto public_col = [n](std::size_t node, int local_col) {
        return local_col == 2 ? 2 * n + node : 2 * node + local_col;
    };

    std::vector<double> dense(dim * dim, 0.0);
    auto put = [&](std::size_t bi, std::size_t bj, const std::array<double, 9>& blk) {
        for (int r = 0; r < 3; ++r)
            for (int c = 0; c < 3; ++c)
                dense[public_row(bi, r) * dim + public_col(bj, c)] += blk[3 * r + c];
    };
    for (std::size_t i = 0; i < n; ++i) {
        put(i, (i + n - 1) % n, jac.lower[i]);
        put(i, i, jac.diag[i]);
        put(i, (i + 1) % n, jac.upper[i]);
    }
    return dense;
}

struct NewtonReport {
    int iterations = 0;
    double final_residual = 0.0;
    double residual_floor = 0.0; // round-off floor of the residual evaluation
    std::vector<double> residual_history;
};

/// One fully implicit time step solved by Newton's method with an analytic
/// Jacobian and a direct cyclic-banded factorization. The initial guess is the
/// current state; a step whose residual rises is halved up to 8 times.
///
/// Convergence means residual max-norm <= newton_tol whenever that is
/// representable. Once the mesh carries near-degenerate edges the residual
/// rows scale like mu/h_min and their round-off floor can exceed newton_tol;
/// an iterate within a small multiple of that floor is then accepted as
/// converged rather than aborting on a tolerance no double evaluation can
/// certify.
inline std::pair<CurveState, NewtonReport> newton_solve(const CurveState& state,
                                                        const SchemeConfig& config,
                                                        const AnisotropySpec& aniso,
                                                        const KProvider& k) {
    config.check();
    detail::StepAssembler as(state, aniso, k, config.tau, SchemeVariant::sp_implicit);
    const std::size_t n = state.curve.size();
    constexpr double eps = std::numeric_limits<double>::epsilon();

    std::vector<Vec2> x(state.curve.vertices());
    std::vector<double> mu(state.mu);

    NewtonReport rep;
    double scale = 0.0;
    std::vector<double> r = as.residual(x, mu, &scale);
    double rn = detail::max_norm(r);
    rep.residual_history.push_back(rn);

    auto fmt = [](double v) {
        char buf[32];
        std::snprintf(buf, sizeof(buf), "%.3e", v);
        return std::string(buf);
    };
    auto target = [&] { return std::max(config.newton_tol, 32.0 * eps * scale); };

    while (rn > target()) {
        if (rep.iterations >= config.newton_max_iters) {
            std::string hist;
            for (double h : rep.residual_history) hist += " " + fmt(h);
            throw NumericalError("Newton did not reach tolerance " + fmt(target()) + " in " +
                                 std::to_string(config.newton_max_iters) +
                                 " iterations; residual history:" + hist);
        }
        const auto jac = as.jacobian(x, mu);
        std::vector<double> rhs(r.size());
        for (std::size_t i = 0; i < r.size(); ++i) rhs[i] = -r[i];
        const std::vector<double> delta = solve_cyclic(jac, rhs);

        double alpha = 1.0;
        bool accepted = false;
        for (int cut = 0; cut <= 8; ++cut) {
            std::vector<Vec2> x_try(n);
            std::vector<double> mu_try(n);
            for (std::size_t i = 0; i < n; ++i) {
                x_try[i] = x[i] + alpha * Vec2{delta[3 * i], delta[3 * i + 1]};
                mu_try[i] = mu[i] + alpha * delta[3 * i + 2];
            }
            double scale_try = 0.0;
            const std::vector<double> r_try = as.residual(x_try, mu_try, &scale_try);
            const double rn_try = detail::max_norm(r_try);
            if (rn_try < rn || rn_try <= target()) {
                x = std::move(x_try);
                mu = std::move(mu_try);
                r = r_try;
                rn = rn_try;
                scale = scale_try;
                accepted = true;
                break;
            }
            alpha *= 0.5;
        }
        if (!accepted) {
            // stagnation at the evaluation noise floor is convergence, not
            // failure; near-degenerate meshes also push the attainable
            // residual slightly above the row-scale estimate through the
            // ill-conditioned linear solves
            if (rn <= std::max(1024.0 * eps * scale, 4.0 * config.newton_tol)) break;
            throw NumericalError("Newton step rejected after 8 halvings; residual " + fmt(rn) +
                                 ", row scale " + fmt(scale));
        }
        ++rep.iterations;
        rep.residual_history.push_back(rn);
    }

    rep.final_residual = rn;
    rep.residual_floor = 32.0 * eps * scale;
    if (!(signed_polygon_area(x) > 0.0))
        throw NumericalError("curve lost its orientation during the step");
    try {
        return {CurveState(PolygonalCurve(std::move(x)), std::move(mu), state.time + config.tau),
                rep};
    } catch (const ConfigError& e) {
        throw MeshCollapseError(std::string("mesh collapse: ") + e.what());
    }
}

/// One semi-implicit step: the interpolated normal is replaced by the current
/// edge normal, so a single linear solve advances the state. Energy still
/// dissipates; the enclosed area is no longer conserved exactly.
inline std::pair<CurveState, NewtonReport> semi_implicit_step(const CurveState& state,
                                                              const SchemeConfig& config,
                                                              const AnisotropySpec& aniso,
                                                              const KProvider& k) {
    config.check();
    detail::StepAssembler as(state, aniso, k, config.tau, SchemeVariant::semi_implicit);
    const std::size_t n = state.curve.size();

    std::vector<Vec2> x(state.curve.vertices());
    std::vector<double> mu(state.mu);

    std::vector<double> r = as.residual(x, mu);
    const auto jac = as.jacobian(x, mu);
    for (double& v : r) v = -v;
    const std::vector<double> delta = solve_cyclic(jac, r);
    for (std::size_t i = 0; i < n; ++i) {
        x[i] += Vec2{delta[3 * i], delta[3 * i + 1]};
        mu[i] += delta[3 * i + 2];
    }

    NewtonReport rep;
    rep.iterations = 1;
    rep.final_residual = detail::max_norm(as.residual(x, mu));
    if (!(signed_polygon_area(x) > 0.0))
        throw NumericalError("curve lost its orientation during the step");
    try {
        return {CurveState(PolygonalCurve(std::move(x)), std::move(mu), state.time + config.tau),
                rep};
    } catch (const ConfigError& e) {
        throw MeshCollapseError(std::string("mesh collapse: ") + e.what());
    }
}

struct EvolveOptions {
    long n_steps = 0;                 // exclusive with t_end
    double t_end = 0.0;               // used when n_steps == 0
    long snapshot_every = 0;          // 0 disables snapshots
    bool plateau_stop = false;        // stop after 50 consecutive steps with
                                      // |W^{m+1} - W^m| <= 1e-14 W^0
    std::function<void(const CurveState&, long)> snapshot_sink;
    std::function<void(const DiagnosticsRecord&)> record_sink; // streams each record
};

struct EvolveResult {
    std::vector<DiagnosticsRecord> records; // one per step, including step 0
    CurveState final_state;
    bool stopped_at_plateau = false;
};

/// Advance the evolution from the given initial curve using a prebuilt
/// stabilizer. Per-step diagnostics track area, energy, mesh ratio, Newton
/// iterations and the final residual. Step failures and mesh collapse abort
/// with the offending step index.
inline EvolveResult evolve(const PolygonalCurve& initial, const SchemeConfig& config,
                           const AnisotropySpec& aniso, const KProvider& k,
                           const EvolveOptions& opts) {
    config.check();
    if (opts.n_steps <= 0 && !(opts.t_end > 0.0))
        throw ConfigError("evolve needs n_steps > 0 or t_end > 0");
    const long total_steps =
        opts.n_steps > 0 ? opts.n_steps
                         : static_cast<long>(std::llround(opts.t_end / config.tau));
    if (total_steps <= 0) throw ConfigError("evolve horizon is shorter than one step");

    CurveState state = CurveState::rest(initial);

    const double area0 = polygon_area(state.curve);
    const double energy0 = discrete_energy(state.curve, aniso);
    const double h_floor = 1e-12 * state.curve.total_length() /
                           static_cast<double>(state.curve.size());

    EvolveResult result{{}, state, false};
    result.records.push_back({0, 0.0, area0, 0.0, energy0, 1.0, mesh_ratio(state.curve), 0, 0.0});
    if (opts.record_sink) opts.record_sink(result.records.back());
    if (opts.snapshot_sink && opts.snapshot_every > 0) opts.snapshot_sink(state, 0);

    double prev_energy = energy0;
    int plateau_run = 0;

    for (long step = 1; step <= total_steps; ++step) {
        std::pair<CurveState, NewtonReport> advanced = [&] {
            try {
                return config.variant == SchemeVariant::sp_implicit
                           ? newton_solve(state, config, aniso, k)
                           : semi_implicit_step(state, config, aniso, k);
            } catch (const MeshCollapseError& e) {
                throw MeshCollapseError(std::string(e.what()) + " (step " +
                                            std::to_string(step) + ")",
                                        step);
            } catch (const NumericalError& e) {
                throw NumericalError(std::string(e.what()) + " (step " + std::to_string(step) +
                                         ")",
                                     step);
            }
        }();
        state = std::move(advanced.first);

        if (state.curve.min_edge_length() < h_floor)
            throw MeshCollapseError("mesh collapse: h_min fell below threshold at step " +
                                        std::to_string(step),
                                    step);

        const double area = polygon_area(state.curve);
        const double energy = discrete_energy(state.curve, aniso);
        result.records.push_back({step, state.time, area, (area - area0) / area0, energy,
                                  energy / energy0, mesh_ratio(state.curve),
                                  advanced.second.iterations, advanced.second.final_residual});
        if (opts.record_sink) opts.record_sink(result.records.back());
        if (opts.snapshot_sink && opts.snapshot_every > 0 && step % opts.snapshot_every == 0)
            opts.snapshot_sink(state, step);

        if (opts.plateau_stop) {
            plateau_run = std::abs(energy - prev_energy) <= 1e-14 * energy0 ? plateau_run + 1 : 0;
            if (plateau_run >= 50) {
                result.stopped_at_plateau = true;
                prev_energy = energy;
                break;
            }
        }
        prev_energy = energy;
    }

    result.final_state = std::move(state);
    return result;
}

inline EvolveResult evolve(const PolygonalCurve& initial, const SchemeConfig& config,
                           const AnisotropySpec& aniso, const EvolveOptions& opts) {
    const KProvider k(aniso, config.stabilizer);
    return evolve(initial, config, aniso, k, opts);
}

} // namespace anisodiff
