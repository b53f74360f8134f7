#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <random>
#include <vector>

#include "anisodiff/initial_shapes.hpp"
#include "anisodiff/scheme.hpp"

using namespace anisodiff;

namespace {

CurveState state_of(PolygonalCurve c, std::vector<double> mu, double t = 0.0) {
    return CurveState(std::move(c), std::move(mu), t);
}

std::vector<double> pack(const CurveState& s) {
    const std::size_t n = s.curve.size();
    std::vector<double> u(3 * n);
    for (std::size_t i = 0; i < n; ++i) {
        u[2 * i] = s.curve.vertex(i).x;
        u[2 * i + 1] = s.curve.vertex(i).y;
        u[2 * n + i] = s.mu[i];
    }
    return u;
}

CurveState unpack(const std::vector<double>& u, double t) {
    const std::size_t n = u.size() / 3;
    std::vector<Vec2> x(n);
    std::vector<double> mu(n);
    for (std::size_t i = 0; i < n; ++i) {
        x[i] = {u[2 * i], u[2 * i + 1]};
        mu[i] = u[2 * n + i];
    }
    return CurveState(PolygonalCurve(std::move(x)), std::move(mu), t);
}

void gauss_solve(std::vector<double> a, std::vector<double>& b) {
    const int n = static_cast<int>(b.size());
    for (int k = 0; k < n; ++k) {
        int p = k;
        for (int i = k + 1; i < n; ++i)
            if (std::abs(a[i * n + k]) > std::abs(a[p * n + k])) p = i;
        REQUIRE(a[p * n + k] != 0.0);
        if (p != k) {
            for (int j = 0; j < n; ++j) std::swap(a[k * n + j], a[p * n + j]);
            std::swap(b[k], b[p]);
        }
        for (int i = k + 1; i < n; ++i) {
            const double m = a[i * n + k] / a[k * n + k];
            for (int j = k; j < n; ++j) a[i * n + j] -= m * a[k * n + j];
            b[i] -= m * b[k];
        }
    }
    for (int k = n - 1; k >= 0; --k) {
        for (int j = k + 1; j < n; ++j) b[k] -= a[k * n + j] * b[j];
        b[k] /= a[k * n + k];
    }
}

/// Derivative-free reference solver for one implicit step: finite-difference
/// Jacobian of the public residual plus dense elimination. Independent of the
/// analytic Jacobian and the banded solver used by newton_solve.
CurveState oracle_step(const CurveState& state, const AnisotropySpec& aniso, const KProvider& k,
                       double tau) {
    const std::size_t dim = 3 * state.curve.size();
    std::vector<double> u = pack(state);
    for (int iter = 0; iter < 60; ++iter) {
        const CurveState cand = unpack(u, state.time + tau);
        std::vector<double> r = assemble_residual(state, cand, aniso, k, tau);
        double rn = 0.0;
        for (double v : r) rn = std::max(rn, std::abs(v));
        if (rn <= 1e-13) break;

        std::vector<double> jac(dim * dim);
        for (std::size_t j = 0; j < dim; ++j) {
            const double step = 1e-7;
            std::vector<double> up = u, dn = u;
            up[j] += step;
            dn[j] -= step;
            const auto rp = assemble_residual(state, unpack(up, 0.0), aniso, k, tau);
            const auto rm = assemble_residual(state, unpack(dn, 0.0), aniso, k, tau);
            for (std::size_t i = 0; i < dim; ++i)
                jac[i * dim + j] = (rp[i] - rm[i]) / (2.0 * step);
        }
        for (auto& v : r) v = -v;
        gauss_solve(jac, r);
        for (std::size_t i = 0; i < dim; ++i) u[i] += r[i];
    }
    return unpack(u, state.time + tau);
}

} // namespace

TEST_CASE("half step normal") {
    const PolygonalCurve square({{0, 0}, {0, 1}, {1, 1}, {1, 0}});
    const auto frames = edge_frames(square);

    const auto same = half_step_normal(square, square);
    for (std::size_t j = 0; j < 4; ++j) CHECK(norm(same[j] - frames[j].n) <= 1e-15);

    std::vector<Vec2> shifted;
    for (const auto& v : square.vertices()) shifted.push_back(v + Vec2{2.5, -1.0});
    const auto trans = half_step_normal(square, PolygonalCurve(shifted));
    for (std::size_t j = 0; j < 4; ++j) CHECK(norm(trans[j] - frames[j].n) <= 1e-15);

    // candidate edge 1 doubled in length: -(h + 2h)^perp / (2|h|) has length 3/2
    std::vector<Vec2> stretched = square.vertices();
    stretched[1] = {0, 2};
    stretched[2] = {1, 2};
    const auto doubled = half_step_normal(square, PolygonalCurve(stretched));
    CHECK(norm(doubled[1]) == doctest::Approx(1.5));
    CHECK(norm(doubled[1] - 1.5 * frames[1].n) <= 1e-15);
}

TEST_CASE("residual layout and convergence contract") {
    const auto aniso = AnisotropySpec::riemannian({{1.0, 0.0, 2.0}});
    const KProvider k(aniso, StabilizerChoice::explicit_formula());
    const auto initial = make_ellipse(2.0, 0.5, 12);
    const auto state = CurveState::rest(initial);

    const auto r = assemble_residual(state, state, aniso, k, 1e-3);
    CHECK(r.size() == 3 * initial.size());

    SchemeConfig config;
    config.tau = 1e-3;
    const auto [next, report] = newton_solve(state, config, aniso, k);
    const auto r_conv = assemble_residual(state, next, aniso, k, config.tau);
    double rn = 0.0;
    for (double v : r_conv) rn = std::max(rn, std::abs(v));
    CHECK(rn <= config.newton_tol);
    CHECK(report.final_residual <= config.newton_tol);

    // residual history decreases across accepted iterations
    for (std::size_t i = 0; i + 2 < report.residual_history.size(); ++i)
        CHECK(report.residual_history[i + 1] < report.residual_history[i]);
    CHECK(report.residual_history.back() <= config.newton_tol);
}

TEST_CASE("analytic jacobian matches finite differences") {
    std::mt19937 rng(17);
    std::uniform_real_distribution<double> jitter(-0.05, 0.05);
    const auto aniso = AnisotropySpec::m_fold(4, 0.2);
    const KProvider k(aniso, StabilizerChoice::numeric(), 1024);
    const auto curve = make_ellipse(1.5, 0.8, 6);
    const auto state = CurveState::rest(curve);
    const double tau = 1e-2;

    std::vector<double> u = pack(state);
    for (auto& v : u) v += jitter(rng);
    const CurveState cand = unpack(u, tau);
    const std::size_t dim = u.size();

    for (const auto variant : {SchemeVariant::sp_implicit, SchemeVariant::semi_implicit}) {
        const auto analytic = assemble_jacobian(state, cand, aniso, k, tau, variant);
        for (std::size_t j = 0; j < dim; ++j) {
            const double step = 1e-7;
            std::vector<double> up = u, dn = u;
            up[j] += step;
            dn[j] -= step;
            const auto rp = assemble_residual(state, unpack(up, 0.0), aniso, k, tau, variant);
            const auto rm = assemble_residual(state, unpack(dn, 0.0), aniso, k, tau, variant);
            for (std::size_t i = 0; i < dim; ++i) {
                const double fd = (rp[i] - rm[i]) / (2.0 * step);
                CHECK(std::abs(analytic[i * dim + j] - fd) <=
                      1e-6 * (1.0 + std::abs(analytic[i * dim + j])));
            }
        }
    }
}

TEST_CASE("jacobian structure") {
    const auto aniso = AnisotropySpec::lr_norm(4.0);
    const KProvider k(aniso, StabilizerChoice::explicit_formula());
    const auto curve = make_ellipse(2.0, 0.5, 8);
    const std::size_t n = curve.size();
    const auto state = CurveState::rest(curve);
    const auto jac = assemble_jacobian(state, state, aniso, k, 1e-3);
    const std::size_t dim = 3 * n;

    // mu-Laplacian block (scalar rows x mu columns) is symmetric
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j)
            CHECK(jac[i * dim + 2 * n + j] == doctest::Approx(jac[j * dim + 2 * n + i]));

    // couplings reach at most one node in each direction (cyclically)
    auto node_of_row = [n](std::size_t r) { return r < n ? r : (r - n) / 2; };
    auto node_of_col = [n](std::size_t c) { return c < 2 * n ? c / 2 : c - 2 * n; };
    for (std::size_t r = 0; r < dim; ++r)
        for (std::size_t c = 0; c < dim; ++c) {
            const std::size_t d =
                (node_of_row(r) + n - node_of_col(c)) % n; // cyclic distance
            if (d != 0 && d != 1 && d != n - 1) CHECK(jac[r * dim + c] == 0.0);
        }
}

TEST_CASE("newton agrees with a derivative-free reference solve") {
    const auto aniso = AnisotropySpec::isotropic();
    const KProvider k(aniso, StabilizerChoice::constant(2.0));
    const auto square = PolygonalCurve({{0, 0}, {0, 1}, {1, 1}, {1, 0}});
    const auto state = CurveState::rest(square);
    const double tau = 1e-3;

    const CurveState oracle = oracle_step(state, aniso, k, tau);
    const auto r_oracle = assemble_residual(state, oracle, aniso, k, tau);
    double rn = 0.0;
    for (double v : r_oracle) rn = std::max(rn, std::abs(v));
    CHECK(rn <= 1e-10);

    SchemeConfig config;
    config.tau = tau;
    const auto [next, report] = newton_solve(state, config, aniso, k);
    for (std::size_t i = 0; i < square.size(); ++i) {
        CHECK(norm(next.curve.vertex(i) - oracle.curve.vertex(i)) <= 1e-10);
        CHECK(std::abs(next.mu[i] - oracle.mu[i]) <= 1e-10);
    }
}

TEST_CASE("frozen candidate reduces to the linear residual form") {
    std::mt19937 rng(23);
    std::uniform_real_distribution<double> val(-1.0, 1.0);
    const auto aniso = AnisotropySpec::m_fold(2, 1.0 / 3.0);
    const KProvider k(aniso, StabilizerChoice::explicit_formula());
    const auto curve = make_ellipse(2.0, 0.5, 10);
    const std::size_t n = curve.size();
    std::vector<double> mu(n);
    for (auto& v : mu) v = val(rng);

    const auto state = CurveState::rest(curve);
    const auto cand = state_of(curve, mu);
    const auto r = assemble_residual(state, cand, aniso, k, 1e-2);

    const auto frames = edge_frames(curve);
    for (std::size_t i = 0; i < n; ++i) {
        const std::size_t ip = (i + 1) % n;
        const Vec2 qsum =
            0.5 * frames[i].len * frames[i].n + 0.5 * frames[ip].len * frames[ip].n;
        const SymMat2 zi = zk_matrix(aniso, frames[i].n, k(frames[i].n));
        const SymMat2 zp = zk_matrix(aniso, frames[ip].n, k(frames[ip].n));
        const Vec2 expected = mu[i] * qsum - (zi * frames[i].h) / frames[i].len +
                              (zp * frames[ip].h) / frames[ip].len;
        CHECK(std::abs(r[n + 2 * i] - expected.x) <= 1e-13);
        CHECK(std::abs(r[n + 2 * i + 1] - expected.y) <= 1e-13);
    }
}

TEST_CASE("the interpolated normal turns swept area into a quadrature identity") {
    // sum_i (X_i^new - X_i) . (q_i + q_{i+1}) with q_j = |h_j| n_j^{mid} / 2
    // equals A(X^new) - A(X) exactly, for arbitrary polygon pairs
    std::mt19937 rng(41);
    std::uniform_real_distribution<double> wiggle(-0.15, 0.15);
    for (int trial = 0; trial < 25; ++trial) {
        const auto base = make_ellipse(1.8, 0.9, 20);
        std::vector<Vec2> moved;
        for (const auto& v : base.vertices())
            moved.push_back(v + Vec2{wiggle(rng), wiggle(rng)});
        const PolygonalCurve cand(moved);

        const auto mid = half_step_normal(base, cand);
        const std::size_t n = base.size();
        std::vector<Vec2> q(n);
        for (std::size_t j = 0; j < n; ++j) q[j] = 0.5 * norm(base.edge_vector(j)) * mid[j];

        double swept = 0.0;
        for (std::size_t i = 0; i < n; ++i)
            swept += dot(cand.vertex(i) - base.vertex(i), q[i] + q[(i + 1) % n]);
        CHECK(swept == doctest::Approx(polygon_area(cand) - polygon_area(base)).epsilon(1e-12));
    }
}

TEST_CASE("area is conserved step by step") {
    const auto aniso = AnisotropySpec::riemannian({{1.0, 0.0, 2.0}});
    SchemeConfig config;
    config.n = 16;
    config.tau = 1.0 / 256.0;
    EvolveOptions opts;
    opts.n_steps = 20;
    const auto result = evolve(make_ellipse(2.0, 0.5, 16), config, aniso, opts);
    const double diam = result.final_state.curve.diameter();
    for (std::size_t i = 1; i < result.records.size(); ++i) {
        const double delta = std::abs(result.records[i].area - result.records[i - 1].area);
        CHECK(delta <= 10.0 * config.newton_tol * diam * diam);
    }
}

TEST_CASE("energy dissipates for any time step") {
    struct Case {
        AnisotropySpec aniso;
        StabilizerChoice stab;
    };
    const std::vector<Case> cases = {
        {AnisotropySpec::m_fold(2, 0.6), StabilizerChoice::explicit_formula()},
        {AnisotropySpec::lr_norm(4.0), StabilizerChoice::explicit_formula()},
        {AnisotropySpec::riemannian({{1.0, 0.0, 2.0}}), StabilizerChoice::explicit_formula()},
    };
    const double h = 1.0 / 16.0;
    for (const auto& c : cases) {
        for (const double factor : {1.0, 100.0}) {
            SchemeConfig config;
            config.n = 16;
            config.tau = factor * h * h;
            config.stabilizer = c.stab;
            EvolveOptions opts;
            opts.n_steps = 10;
            const auto result = evolve(make_rectangle(4.0, 1.0, 16), config, c.aniso, opts);
            const double w0 = result.records.front().energy;
            for (std::size_t i = 1; i < result.records.size(); ++i)
                CHECK(result.records[i].energy <= result.records[i - 1].energy + 1e-12 * w0);
        }
    }
}

TEST_CASE("semi implicit variant") {
    const auto aniso = AnisotropySpec::riemannian({{1.0, 0.0, 2.0}});
    SchemeConfig config;
    config.n = 8;
    config.tau = 1.0 / 64.0;
    config.variant = SchemeVariant::semi_implicit;
    EvolveOptions opts;
    opts.n_steps = 50;
    const auto result = evolve(make_ellipse(2.0, 0.5, 8), config, aniso, opts);

    double max_drift = 0.0;
    const double w0 = result.records.front().energy;
    for (std::size_t i = 1; i < result.records.size(); ++i) {
        CHECK(result.records[i].newton_iters == 1);
        CHECK(result.records[i].energy <= result.records[i - 1].energy + 1e-12 * w0);
        max_drift = std::max(max_drift, std::abs(result.records[i].area_loss_rel));
    }
    CHECK(max_drift > 1e-14); // the linearized normal gives up exact conservation
}

TEST_CASE("evolution is translation equivariant") {
    const auto aniso = AnisotropySpec::riemannian({{1.0, 0.0, 2.0}});
    SchemeConfig config;
    config.n = 16;
    config.tau = 1.0 / 256.0;
    EvolveOptions opts;
    opts.n_steps = 5;

    const auto base = make_ellipse(2.0, 0.5, 16);
    const Vec2 shift{3.25, -1.5};
    std::vector<Vec2> moved;
    for (const auto& v : base.vertices()) moved.push_back(v + shift);

    const auto r1 = evolve(base, config, aniso, opts);
    const auto r2 = evolve(PolygonalCurve(moved), config, aniso, opts);
    for (std::size_t i = 0; i < base.size(); ++i)
        CHECK(norm(r2.final_state.curve.vertex(i) - r1.final_state.curve.vertex(i) - shift) <=
              1e-10);
}

TEST_CASE("isotropic evolution is rotation equivariant") {
    const auto aniso = AnisotropySpec::isotropic();
    SchemeConfig config;
    config.n = 16;
    config.tau = 1.0 / 256.0;
    EvolveOptions opts;
    opts.n_steps = 5;

    const double phi = 0.7;
    auto rotate = [phi](Vec2 v) {
        return Vec2{std::cos(phi) * v.x - std::sin(phi) * v.y,
                    std::sin(phi) * v.x + std::cos(phi) * v.y};
    };
    const auto base = make_ellipse(2.0, 0.5, 16);
    std::vector<Vec2> rotated;
    for (const auto& v : base.vertices()) rotated.push_back(rotate(v));

    const auto r1 = evolve(base, config, aniso, opts);
    const auto r2 = evolve(PolygonalCurve(rotated), config, aniso, opts);
    for (std::size_t i = 0; i < base.size(); ++i)
        CHECK(norm(r2.final_state.curve.vertex(i) - rotate(r1.final_state.curve.vertex(i))) <=
              1e-10);
}

TEST_CASE("newton failure carries the step index") {
    const auto aniso = AnisotropySpec::lr_norm(4.0);
    SchemeConfig config;
    config.n = 8;
    config.tau = 10.0;
    config.newton_max_iters = 1;
    EvolveOptions opts;
    opts.n_steps = 3;
    try {
        evolve(make_ellipse(2.0, 0.5, 8), config, aniso, opts);
        FAIL("expected a numerical failure");
    } catch (const NumericalError& e) {
        CHECK(e.step_index == 1);
    }
}

TEST_CASE("evolve honours a time horizon") {
    const auto aniso = AnisotropySpec::isotropic();
    SchemeConfig config;
    config.n = 12;
    config.tau = 1e-3;
    EvolveOptions opts;
    opts.t_end = 10e-3;
    const auto result = evolve(make_ellipse(1.0, 0.6, 12), config, aniso, opts);
    CHECK(result.records.size() == 11); // step 0 plus ten steps
    CHECK(result.final_state.time == doctest::Approx(10e-3));
}

TEST_CASE("a stationary curve triggers the energy plateau stop") {
    // the regular polygon is the discrete equilibrium of the isotropic flow
    std::vector<Vec2> regular;
    for (int i = 0; i < 32; ++i) {
        const double phi = -2.0 * AnisotropySpec::pi() * i / 32;
        regular.push_back({std::cos(phi), std::sin(phi)});
    }
    SchemeConfig config;
    config.n = 32;
    config.tau = 1e-3;
    config.stabilizer = StabilizerChoice::constant(2.0);
    EvolveOptions opts;
    opts.n_steps = 5000;
    opts.plateau_stop = true;
    const auto result =
        evolve(PolygonalCurve(regular), config, AnisotropySpec::isotropic(), opts);
    CHECK(result.stopped_at_plateau);
    CHECK(result.records.size() < 200);
}

TEST_CASE("evolve records start exactly at zero loss and unit energy") {
    const auto aniso = AnisotropySpec::isotropic();
    SchemeConfig config;
    config.n = 12;
    config.tau = 1e-3;
    EvolveOptions opts;
    opts.n_steps = 3;
    const auto result = evolve(make_ellipse(1.0, 0.6, 12), config, aniso, opts);
    CHECK(result.records[0].area_loss_rel == 0.0);
    CHECK(result.records[0].energy_norm == 1.0);
    CHECK(result.records[0].newton_iters == 0);
}
