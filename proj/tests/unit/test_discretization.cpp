#include <cmath>
#include <numbers>
#include <random>

#include <boost/math/quadrature/exp_sinh.hpp>

#include "doctest.h"
#include "driftfb/discretization.hpp"
#include "driftfb/errors.hpp"

using namespace driftfb;

namespace {

constexpr double kPi = std::numbers::pi;

Vector random_vector(std::size_t n, unsigned seed) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> d;
    Vector v(n);
    for (double& x : v) x = d(rng);
    return v;
}

KernelSpec anisotropic(double amp) {
    std::vector<double> v(32);
    for (int i = 0; i < 16; ++i) v[i] = v[i + 16] = 0.2 * (1.0 + amp * std::cos(2.0 * 2.0 * kPi * i / 32));
    return KernelSpec::sampled(2, v);
}

}  // namespace

TEST_CASE("grid validation") {
    CHECK_THROWS_AS(Grid(1, 0.3, 4.0), InvalidInput);
    CHECK_THROWS_AS(Grid(1, 0.5, 2.0), InvalidInput);
    CHECK_THROWS_AS(Grid(3, 0.5, 4.0), UnsupportedDimension);
    CHECK_THROWS_AS(Grid(2, std::pow(2.0, -10), 8.0), InvalidInput);
    const Grid g(1, 0.25, 4.0);
    CHECK(g.n() == 33);
    CHECK(g.coord(16) == 0.0);
}

TEST_CASE("1-D weights: symmetry, sign, closed-form total") {
    const Grid g(1, 0.125, 4.0);
    const auto op = build_operator(g, KernelSpec::fractional(1), {0.0});
    for (int k = 1; k < g.n(); ++k) {
        CHECK(op.weight(k) == op.weight(-k));
        CHECK(op.weight(k) > 0.0);
    }
    // sum over the infinite lattice telescopes to 4 mu / h
    CHECK(op.diagonal() == doctest::Approx(4.0 / kPi / 0.125).epsilon(1e-14));
    CHECK(op.is_m_matrix());
}

TEST_CASE("apply: linearity, zero, affine exactness, exterior mass") {
    const Grid g(1, 1.0 / 64, 4.0);
    for (double b : {0.0, 0.5, -0.7}) {
        const auto op = build_operator(g, KernelSpec::fractional(1), {b});
        const Vector z(g.size(), 0.0);
        for (double v : op.apply(z)) CHECK(v == 0.0);
        const auto f = random_vector(g.size(), 1);
        const auto h = random_vector(g.size(), 2);
        Vector fh(g.size());
        for (std::size_t i = 0; i < fh.size(); ++i) fh[i] = f[i] + h[i];
        const auto af = op.apply(f);
        const auto ah = op.apply(h);
        const auto afh = op.apply(fh);
        for (std::size_t i = 0; i < fh.size(); ++i) CHECK(std::abs(afh[i] - af[i] - ah[i]) <= 1e-12 * 100);
        const auto d = op.apply_direct(f);
        for (std::size_t i = 0; i < fh.size(); ++i) CHECK(std::abs(d[i] - af[i]) <= 1e-10);

        const Vector ones(g.size(), 1.0);
        const auto a1 = op.apply_direct(ones);
        for (std::size_t i = 0; i < a1.size(); ++i) {
            CHECK(op.exterior_mass()[i] > 0.0);
            CHECK(std::abs(a1[i] - op.exterior_mass()[i]) <= 1e-11 * op.diagonal());
        }
    }
    // independent exterior mass: weights beyond the box, summed in closed form
    // (the telescoping tail (mu/h) ln(K/(K-1)) on each side)
    const auto op = build_operator(g, KernelSpec::fractional(1), {0.0});
    const int n = g.n();
    for (int i : {0, 7, n / 2, n - 1}) {
        auto side = [&](int K) { return K == 1 ? 2.0 : std::log(static_cast<double>(K) / (K - 1)); };
        const double expect = (side(n - i) + side(i + 1)) / kPi / g.h();
        CHECK(op.exterior_mass()[i] == doctest::Approx(expect).epsilon(1e-11));
    }
    // affine field on nodes with the whole stencil in the box (b = 0): the
    // symmetric sum vanishes at the centre node
    Vector x(g.size());
    for (int i = 0; i < n; ++i) x[i] = g.coord(i);
    const auto ax = op.apply_direct(x);
    CHECK(std::abs(ax[n / 2]) <= 1e-10);
}

TEST_CASE("1-D operator on exp(-x^2) at the origin") {
    // (-Delta)^{1/2} e^{-x^2}(0) = (2/pi) int_0^inf (1 - e^{-s^2})/s^2 ds by quadrature.
    boost::math::quadrature::exp_sinh<double> rule;
    const double oracle = 2.0 / kPi * rule.integrate([](double s) { return s < 1e-8 ? 1.0 : -std::expm1(-s * s) / (s * s); }, 0.0,
                                                     std::numeric_limits<double>::infinity());
    CHECK(oracle == doctest::Approx(2.0 / std::sqrt(kPi)).epsilon(1e-12));
    const Grid g(1, std::pow(2.0, -10), 8.0);
    const auto op = build_operator(g, KernelSpec::fractional(1), {0.0});
    Vector u(g.size());
    for (int i = 0; i < g.n(); ++i) u[i] = std::exp(-g.coord(i) * g.coord(i));
    const auto au = op.apply(u);
    CHECK(std::abs(au[g.n() / 2] - oracle) <= 1e-3);
}

TEST_CASE("consistency on power profiles") {
    const auto k = KernelSpec::fractional(1);
    const auto conv = consistency_convergence(k, 0.5, 0.0, std::pow(2.0, -8), 8.0, 0.5, 2.0, 3);
    for (double o : conv.orders) CHECK(o >= 0.9);
    const auto c2 = consistency_convergence(k, gamma_exponent(0.5), 0.5, std::pow(2.0, -9), 8.0, 0.25, 1.0, 2);
    CHECK(c2.levels[0].relative_error <= 5e-2);
    CHECK(c2.levels[1].max_abs_error < 0.6 * c2.levels[0].max_abs_error);
    const Grid g(1, std::pow(2.0, -10), 8.0);
    const auto op = build_operator(g, k, {1.0});
    const auto rep = consistency_report(op, 0.75, 1.0, 0.5, 2.0);
    CHECK(rep.relative_error <= 5e-2);
    CHECK_THROWS_AS(consistency_report(op, 0.75, 1.0, 0.5, 7.9), InvalidInput);
    CHECK_THROWS_AS(consistency_report(op, 0.75, 0.5, 0.5, 2.0), InvalidInput);
}

TEST_CASE("central drift refused when it breaks the M-matrix") {
    const Grid g(1, 0.125, 4.0);
    CHECK_NOTHROW(build_operator(g, KernelSpec::fractional(1), {0.5}, DriftScheme::central));
    CHECK_THROWS_AS(build_operator(g, KernelSpec::fractional(1), {2.0}, DriftScheme::central), MMatrixViolation);
    try {
        build_operator(g, KernelSpec::fractional(1), {2.0}, DriftScheme::central);
    } catch (const MMatrixViolation& e) {
        CHECK(e.row < g.size());
    }
}

TEST_CASE("2-D weights: symmetry, positivity, closed-form tail") {
    const auto k = anisotropic(0.3);
    const auto w = nonlocal_weights(k, 40);
    for (int ky = -40; ky <= 40; ++ky) {
        for (int kx = -40; kx <= 40; ++kx) {
            if (kx == 0 && ky == 0) continue;
            CHECK(w.at(kx, ky) == w.at(-kx, -ky));
            CHECK(w.at(kx, ky) > 0.0);
        }
    }
    CHECK(w.quadrature_error < 1e-3 * k.lambda());
    // lattice sum + mass outside the square of half-side 40.5
    double s = 0.0;
    for (double v : w.values) s += v;
    double tail = 0.0;
    const int m = 200000;
    for (int i = 0; i < m; ++i) {
        const double t = 2.0 * kPi * (i + 0.5) / m;
        tail += k(t) * std::max(std::abs(std::cos(t)), std::abs(std::sin(t))) / 40.5 * 2.0 * kPi / m;
    }
    CHECK(std::abs(s + tail - w.total) <= 1e-6 * w.total);
}

TEST_CASE("2-D apply: rotation covariance and kernel scaling") {
    const Grid g(2, 0.25, 4.0);
    const auto op = build_operator(g, KernelSpec::fractional(2), {0.0, 0.0});
    const int n = g.n();
    Vector f(g.size());
    Vector fr(g.size());
    for (int j = 0; j < n; ++j) {
        for (int i = 0; i < n; ++i) {
            const double x = g.coord(i);
            const double y = g.coord(j) + 0.3 * g.coord(i);
            f[g.index(i, j)] = std::exp(-x * x - 2.0 * y * y);
        }
    }
    // rotate by 90 degrees: (i, j) -> (n-1-j, i)
    for (int j = 0; j < n; ++j) {
        for (int i = 0; i < n; ++i) fr[g.index(n - 1 - j, i)] = f[g.index(i, j)];
    }
    const auto af = op.apply_direct(f);
    const auto afr = op.apply_direct(fr);
    double worst = 0.0;
    for (int j = 0; j < n; ++j) {
        for (int i = 0; i < n; ++i) worst = std::max(worst, std::abs(afr[g.index(n - 1 - j, i)] - af[g.index(i, j)]));
    }
    CHECK(worst <= 1e-12);

    const auto op2 = build_operator(g, KernelSpec::fractional(2).scaled(2.0), {0.0, 0.0});
    const auto a2 = op2.apply_direct(f);
    for (std::size_t i = 0; i < f.size(); ++i) CHECK(a2[i] == doctest::Approx(2.0 * af[i]).epsilon(1e-13));
    const auto afft = op.apply(f);
    for (std::size_t i = 0; i < f.size(); ++i) CHECK(std::abs(afft[i] - af[i]) <= 1e-12);
}

TEST_CASE("2-D operator: M-matrix with drift, affine exactness at the centre") {
    const Grid g(2, 0.25, 4.0);
    const auto op = build_operator(g, anisotropic(0.3), {0.7, -0.4});
    CHECK(op.is_m_matrix());
    for (double m : op.exterior_mass()) CHECK(m > 0.0);
    const auto op0 = build_operator(g, anisotropic(0.3), {0.0, 0.0});
    Vector a(g.size());
    for (std::size_t i = 0; i < a.size(); ++i) {
        const auto p = g.point(i);
        a[i] = 0.3 + 1.7 * p[0] - 0.9 * p[1];
    }
    const auto aa = op0.apply_direct(a);
    const std::size_t c = g.index(g.n() / 2, g.n() / 2);
    // centre node: the stencil is symmetric about it, so only 0.3 * exterior mass survives
    CHECK(std::abs(aa[c] - 0.3 * op0.exterior_mass()[c]) <= 1e-10);
}
