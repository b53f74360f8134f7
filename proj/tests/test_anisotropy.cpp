#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <random>
#include <vector>

#include "anisodiff/anisotropy.hpp"

using namespace anisodiff;

namespace {

const double kPi = AnisotropySpec::pi();

std::vector<AnisotropySpec> builtin_families() {
    return {
        AnisotropySpec::isotropic(),
        AnisotropySpec::riemannian({{1.0, 0.0, 2.0}}),
        AnisotropySpec::riemannian({{2.0, 0.5, 1.0}, {1.0, -0.3, 1.5}}),
        AnisotropySpec::lr_norm(4.0),
        AnisotropySpec::lr_norm(6.0),
        AnisotropySpec::m_fold(2, 1.0 / 3.0),
        AnisotropySpec::m_fold(4, 0.3),
        AnisotropySpec::m_fold(6, 0.1, 0.4),
        AnisotropySpec::regularized_l1(0.1),
    };
}

std::vector<Vec2> random_directions(int count, unsigned seed) {
    std::mt19937 rng(seed);
    std::uniform_real_distribution<double> angle(-kPi, kPi);
    std::vector<Vec2> dirs(count);
    for (auto& d : dirs) d = AnisotropySpec::normal_of_theta(angle(rng));
    return dirs;
}

} // namespace

TEST_CASE("gamma values") {
    CHECK(AnisotropySpec::isotropic().gamma({0.3, std::sqrt(1.0 - 0.09)}) == 1.0);
    CHECK(AnisotropySpec::riemannian({{1.0, 0.0, 2.0}}).gamma({0, 1}) ==
          doctest::Approx(std::sqrt(2.0)));
    const double inv_sqrt2 = 1.0 / std::sqrt(2.0);
    CHECK(AnisotropySpec::lr_norm(4.0).gamma({inv_sqrt2, inv_sqrt2}) ==
          doctest::Approx(0.84089641525371454).epsilon(1e-9));
}

TEST_CASE("homogeneous extension") {
    for (const auto& aniso : builtin_families()) {
        CHECK(aniso.gamma_ext({0, 0}) == 0.0);
        for (const auto& n : random_directions(16, 1)) {
            const double g = aniso.gamma(n);
            CHECK(aniso.gamma_ext(2.5 * n) == doctest::Approx(2.5 * g).epsilon(1e-13));
            CHECK(aniso.gamma_ext(n) == doctest::Approx(g).epsilon(1e-14));
        }
    }
}

TEST_CASE("xi values") {
    for (const auto& n : random_directions(64, 2)) {
        const Vec2 xi = AnisotropySpec::isotropic().xi(n);
        CHECK(norm(xi - n) <= 1e-14);
    }
    const Vec2 xi_r = AnisotropySpec::riemannian({{1.0, 0.0, 2.0}}).xi({0, 1});
    CHECK(xi_r.x == doctest::Approx(0.0));
    CHECK(xi_r.y == doctest::Approx(std::sqrt(2.0)));

    // 4-fold at theta = 0 (n = (0,1)): xi = (1 + beta) n
    const Vec2 xi_m = AnisotropySpec::m_fold(4, 0.3).xi({0, 1});
    CHECK(xi_m.x == doctest::Approx(0.0).epsilon(1e-14));
    CHECK(xi_m.y == doctest::Approx(1.3));
}

TEST_CASE("lambda values") {
    for (const auto& n : random_directions(16, 3))
        CHECK(AnisotropySpec::isotropic().lambda(n) == 1.0);
    CHECK(AnisotropySpec::lr_norm(4.0).lambda({1, 0}) == doctest::Approx(0.0));
    CHECK(AnisotropySpec::m_fold(2, 1.0 / 3.0).lambda({0, 1}) == doctest::Approx(0.0));
}

TEST_CASE("hessian structure") {
    for (const auto& aniso : builtin_families()) {
        for (const auto& n : random_directions(32, 4)) {
            const SymMat2 h = aniso.hessian(n);
            CHECK(norm(h * n) <= 1e-12 * std::max(1.0, std::abs(aniso.lambda(n))));
            const Vec2 t = perp(n);
            CHECK(h.quad(t) == doctest::Approx(aniso.lambda(n)).epsilon(1e-12));
        }
    }
}

TEST_CASE("xi matches finite differences of the homogeneous extension") {
    const double step = 1e-6;
    for (const auto& aniso : builtin_families()) {
        for (const auto& n : random_directions(64, 5)) {
            const Vec2 xi = aniso.xi(n);
            const Vec2 fd{
                (aniso.gamma_ext({n.x + step, n.y}) - aniso.gamma_ext({n.x - step, n.y})) /
                    (2.0 * step),
                (aniso.gamma_ext({n.x, n.y + step}) - aniso.gamma_ext({n.x, n.y - step})) /
                    (2.0 * step)};
            CHECK(norm(xi - fd) <= 1e-6 * std::max(1.0, norm(xi)));
        }
    }
}

TEST_CASE("lambda matches the second tangential difference quotient") {
    const double step = 1e-4;
    for (const auto& aniso : builtin_families()) {
        for (const auto& n : random_directions(32, 6)) {
            // skip the l^r axes where lambda vanishes and relative error is meaningless
            const double lam = aniso.lambda(n);
            if (std::abs(lam) < 1e-6) continue;
            const Vec2 t = perp(n);
            const double fd = (aniso.gamma_ext(n + step * t) - 2.0 * aniso.gamma_ext(n) +
                               aniso.gamma_ext(n - step * t)) /
                              (step * step);
            CHECK(std::abs(fd - lam) <= 1e-5 * std::max(1.0, std::abs(lam)));
        }
    }
}

TEST_CASE("euler identity xi . n = gamma") {
    for (const auto& aniso : builtin_families()) {
        for (int i = 0; i < 360; ++i) {
            const Vec2 n = AnisotropySpec::normal_of_theta(-kPi + 2.0 * kPi * i / 360);
            CHECK(std::abs(dot(aniso.xi(n), n) - aniso.gamma(n)) <= 1e-12);
        }
    }
}

TEST_CASE("symmetry gamma(-n) = gamma(n)") {
    for (const auto& aniso : builtin_families()) {
        for (const auto& n : random_directions(360, 7))
            CHECK(std::abs(aniso.gamma(n) - aniso.gamma(-n)) <= 1e-14 * std::max(1.0, aniso.gamma(n)));
    }
}

TEST_CASE("regularized l1 equals the two-matrix riemannian energy") {
    const double eps = 0.17;
    const auto reg = AnisotropySpec::regularized_l1(eps);
    const auto rie = AnisotropySpec::riemannian({{1.0, 0.0, eps * eps}, {eps * eps, 0.0, 1.0}});
    for (const auto& n : random_directions(128, 8)) {
        CHECK(std::abs(reg.gamma(n) - rie.gamma(n)) <= 1e-14 * std::max(1.0, reg.gamma(n)));
        CHECK(norm(reg.xi(n) - rie.xi(n)) <= 1e-13);
        CHECK(std::abs(reg.lambda(n) - rie.lambda(n)) <= 1e-12 * std::max(1.0, std::abs(reg.lambda(n))));
    }
}

TEST_CASE("gamma_hat derivatives are consistent") {
    for (const auto& aniso : builtin_families()) {
        for (int i = 0; i < 64; ++i) {
            const double th = -kPi + 2.0 * kPi * i / 64 + 0.013;
            const double fd =
                (aniso.gamma_hat(th + 1e-6) - aniso.gamma_hat(th - 1e-6)) / 2e-6;
            CHECK(std::abs(aniso.gamma_hat_prime(th) - fd) <= 1e-6 * std::max(1.0, std::abs(fd)));
        }
    }
}

TEST_CASE("classification") {
    CHECK(classify(AnisotropySpec::lr_norm(4.0)) == AnisotropyClass::weak);
    CHECK(classify(AnisotropySpec::lr_norm(2.5)) == AnisotropyClass::weak);
    // 1 < r < 2 is accepted; lambda falls back to finite differences there
    CHECK(classify(AnisotropySpec::lr_norm(1.5)) == AnisotropyClass::weak);
    CHECK(classify(AnisotropySpec::riemannian({{1.0, 0.0, 2.0}})) == AnisotropyClass::weak);
    CHECK(classify(AnisotropySpec::m_fold(4, 0.3)) == AnisotropyClass::strong); // beta > 1/15
    CHECK(classify(AnisotropySpec::m_fold(4, 1.0 / 16.0)) == AnisotropyClass::weak);
    CHECK(classify(AnisotropySpec::m_fold(2, 1.0 / 3.0)) == AnisotropyClass::weak); // boundary
    CHECK(classify(AnisotropySpec::m_fold(2, 0.6)) == AnisotropyClass::strong);
    CHECK_THROWS_AS(classify(AnisotropySpec::isotropic(), 32), ConfigError);
}

TEST_CASE("invalid anisotropies are rejected") {
    CHECK_THROWS_AS(AnisotropySpec::m_fold(3, 0.2), ConfigError);  // odd fold breaks symmetry
    CHECK_THROWS_AS(AnisotropySpec::m_fold(5, 0.2), ConfigError);  // not in {2,3,4,6}
    CHECK_THROWS_AS(AnisotropySpec::lr_norm(1.0), ConfigError);
    CHECK_THROWS_AS(AnisotropySpec::regularized_l1(1.5), ConfigError);
    CHECK_THROWS_AS(AnisotropySpec::riemannian({{1.0, 3.0, 1.0}}), ConfigError); // indefinite

    CustomGamma asym;
    asym.gamma_hat = [](double th) { return 2.0 + std::sin(th); };
    asym.gamma_hat_prime = [](double th) { return std::cos(th); };
    CHECK_THROWS_AS(AnisotropySpec::custom(asym), ConfigError);
}

TEST_CASE("custom anisotropy with and without second derivative") {
    const double beta = 0.25;
    CustomGamma g;
    g.gamma_hat = [beta](double th) { return 1.0 + beta * std::cos(2.0 * th); };
    g.gamma_hat_prime = [beta](double th) { return -2.0 * beta * std::sin(2.0 * th); };
    const auto no_pp = AnisotropySpec::custom(g);
    g.gamma_hat_pp = [beta](double th) { return -4.0 * beta * std::cos(2.0 * th); };
    const auto with_pp = AnisotropySpec::custom(g);
    const auto reference = AnisotropySpec::m_fold(2, beta);

    for (const auto& n : random_directions(64, 9)) {
        CHECK(std::abs(no_pp.gamma(n) - reference.gamma(n)) <= 1e-14);
        CHECK(norm(with_pp.xi(n) - reference.xi(n)) <= 1e-13);
        CHECK(std::abs(with_pp.lambda(n) - reference.lambda(n)) <= 1e-12);
        // finite-difference lambda carries the 1e-5 step error
        CHECK(std::abs(no_pp.lambda(n) - reference.lambda(n)) <= 1e-4);
    }
}

TEST_CASE("frank diagram") {
    const auto iso = frank_diagram(AnisotropySpec::isotropic(), 128);
    CHECK(iso.convex);
    for (const auto& p : iso.points) CHECK(std::abs(norm(p) - 1.0) <= 1e-14);

    CHECK_FALSE(frank_diagram(AnisotropySpec::m_fold(4, 0.3), 64).convex);
    CHECK(frank_diagram(AnisotropySpec::riemannian({{1.0, 0.0, 2.0}}), 64).convex);
    CHECK_THROWS_AS(frank_diagram(AnisotropySpec::isotropic(), 8), ConfigError);
}
