#include <algorithm>
#include <cmath>
#include <random>

#include "doctest.h"
#include "driftfb/errors.hpp"
#include "driftfb/solver.hpp"
#include "lcp_oracle.hpp"

using namespace driftfb;

namespace {

ProblemSpec bump_problem(int dim, double h, double R, Vector b, double height = 1.0, double radius = 1.0,
                         Vector center = {}) {
    ObstacleSpec s;
    s.height = height;
    s.radius = radius;
    s.center = center.empty() ? Vector(dim, 0.0) : center;
    return ProblemSpec::synthetic(Grid(dim, h, R), KernelSpec::fractional(dim), b, s);
}

SolutionField run(const ProblemSpec& p, SolverParams params = {}) {
    const auto op = build_operator(p.grid, p.kernel, p.drift);
    return solve(p, op, params);
}

}  // namespace

TEST_CASE("nonpositive obstacle gives the zero solution") {
    const Grid g(1, 0.125, 4.0);
    Field phi(g);
    for (int i = 0; i < g.n(); ++i) phi.values[i] = -1.0 - g.coord(i) * g.coord(i);
    ProblemSpec p(g, KernelSpec::fractional(1), {0.5}, phi);
    const auto s = run(p);
    CHECK(s.note == "no positive obstacle region");
    CHECK(s.converged);
    for (double v : s.u.values) CHECK(v == 0.0);
    for (auto m : s.contact_mask) CHECK(m == 0);
}

TEST_CASE("refusals") {
    const auto p = bump_problem(1, 1.0 / 16, 4.0, {2.0});
    const auto central = build_operator(p.grid, p.kernel, Vector{0.1}, DriftScheme::central);
    CHECK_THROWS_AS(solve(p, central), InvalidInput);
    const auto op = build_operator(p.grid, p.kernel, p.drift);
    SolverParams bad;
    bad.omega = 2.0;
    CHECK_THROWS_AS(solve(p, op, bad), InvalidInput);
    const Grid other(1, 1.0 / 8, 4.0);
    CHECK_THROWS_AS(solve(p, build_operator(other, p.kernel, p.drift)), InvalidInput);
}

TEST_CASE("symmetric bump without drift: symmetric solution and contact set") {
    for (double h : {1.0 / 32, 1.0 / 256}) {
        const auto p = bump_problem(1, h, 8.0, {0.0});
        const auto s = run(p);
        REQUIRE(s.converged);
        const int n = p.grid.n();
        double worst = 0.0;
        for (int i = 0; i < n; ++i) {
            worst = std::max(worst, std::abs(s.u.values[i] - s.u.values[n - 1 - i]));
            CHECK(s.contact_mask[i] == s.contact_mask[n - 1 - i]);
        }
        CHECK(worst <= 1e-8);
    }
}

TEST_CASE("contact set nonempty and strictly inside the obstacle support") {
    const auto p = bump_problem(1, 1.0 / 256, 8.0, {0.0});
    const auto s = run(p);
    REQUIRE(s.converged);
    CHECK(s.complementarity_residual <= 1e-10);
    int contact = 0;
    for (std::size_t i = 0; i < s.contact_mask.size(); ++i) {
        if (!s.contact_mask[i]) continue;
        ++contact;
        CHECK(std::abs(p.grid.coord(static_cast<int>(i))) < 1.0);
    }
    CHECK(contact > 0);
    for (std::size_t i = 0; i < s.u.values.size(); ++i) {
        CHECK(s.u.values[i] >= p.obstacle.values[i] - 1e-12);
        CHECK(s.u.values[i] >= 0.0);
    }
}

TEST_CASE("both methods match the dense active-set oracle on a 513-node grid") {
    for (double b : {0.0, 1.0, -0.5, 2.0}) {
        const auto p = bump_problem(1, 1.0 / 32, 8.0, {b});
        REQUIRE(p.grid.size() == 513);
        const auto op = build_operator(p.grid, p.kernel, p.drift);
        const auto ref = oracle::active_set_lcp(oracle::dense_matrix(op), p.obstacle.values);
        for (auto method : {SolverMethod::psor, SolverMethod::policy_iteration}) {
            SolverParams params;
            params.method = method;
            const auto s = solve(p, op, params);
            REQUIRE(s.converged);
            double diff = 0.0;
            for (std::size_t i = 0; i < ref.u.size(); ++i) diff = std::max(diff, std::abs(ref.u[i] - s.u.values[i]));
            CHECK(diff <= 1e-8);
            for (std::size_t i = 0; i < ref.u.size(); ++i) {
                const bool expected = ref.u[i] - p.obstacle.values[i] <= s.contact_tol && p.obstacle.values[i] > 0.0;
                CHECK(static_cast<bool>(s.contact_mask[i]) == expected);
            }
        }
    }
}

TEST_CASE("2-D: policy iteration agrees with PSOR and the dense oracle") {
    const auto p = bump_problem(2, 0.25, 4.0, {0.5, -0.25});
    const auto op = build_operator(p.grid, p.kernel, p.drift);
    const auto ref = oracle::active_set_lcp(oracle::dense_matrix(op), p.obstacle.values);
    for (auto method : {SolverMethod::psor, SolverMethod::policy_iteration}) {
        SolverParams params;
        params.method = method;
        const auto s = solve(p, op, params);
        REQUIRE(s.converged);
        double diff = 0.0;
        for (std::size_t i = 0; i < ref.u.size(); ++i) diff = std::max(diff, std::abs(ref.u[i] - s.u.values[i]));
        CHECK(diff <= 1e-8);
    }
}

TEST_CASE("2-D radial symmetry without drift") {
    const auto p = bump_problem(2, 0.125, 4.0, {0.0, 0.0});
    const auto s = run(p);
    REQUIRE(s.converged);
    const Grid& g = p.grid;
    const int n = g.n();
    double worst = 0.0;
    for (int j = 0; j < n; ++j) {
        for (int i = 0; i < n; ++i) {
            const double v = s.u.values[g.index(i, j)];
            worst = std::max(worst, std::abs(v - s.u.values[g.index(j, i)]));
            worst = std::max(worst, std::abs(v - s.u.values[g.index(n - 1 - i, j)]));
        }
    }
    CHECK(worst <= 1e-8);
}

TEST_CASE("residual report") {
    const auto p = bump_problem(1, 1.0 / 64, 8.0, {0.5});
    const auto op = build_operator(p.grid, p.kernel, p.drift);
    const auto s = solve(p, op);
    REQUIRE(s.converged);
    const auto r = residuals(s, op, p);
    CHECK(r.negative_operator <= 1e-10);
    CHECK(r.noncontact_operator <= 1e-10);
    CHECK(r.negative_gap <= 1e-10);
    CHECK(r.complementarity <= 1e-10);

    // u = phi: the bump is convex near its edge, so A phi < 0 just outside
    const Vector& phi = p.obstacle.values;
    std::vector<std::uint8_t> all(phi.size(), 1);
    const auto forced = residuals(phi, phi, all, op);
    CHECK(forced.negative_operator > 1e-3);

    const Vector big(phi.size(), 10.0);
    std::vector<std::uint8_t> none(phi.size(), 0);
    const auto lifted = residuals(big, phi, none, op);
    CHECK(lifted.complementarity > 1e-3);
    CHECK(lifted.noncontact_operator > 1e-3);
    CHECK(lifted.negative_operator == 0.0);
}

TEST_CASE("a-priori bounds on converged runs") {
    for (double b : {0.0, 1.0}) {
        const auto p = bump_problem(1, 1.0 / 256, 8.0, {b});
        const auto s = run(p);
        REQUIRE(s.converged);
        const auto rep = a_priori_checks(s, p);
        CHECK(rep.bounded);
        CHECK(rep.max_u <= rep.max_phi + 1e-8);
        CHECK(rep.semiconvex);
        if (b == 0.0) {
            CHECK(rep.lipschitz);
            CHECK(rep.lip_u <= 1.05 * rep.lip_phi);
        }
    }
}

TEST_CASE("comparison: a higher obstacle gives a higher solution") {
    const Grid g(1, 1.0 / 64, 8.0);
    ObstacleSpec s;
    s.center = {0.0};
    const auto k = KernelSpec::fractional(1);
    const auto p1 = ProblemSpec::synthetic(g, k, {0.7}, s);
    Field raised = p1.obstacle;
    ObstacleSpec small = s;
    small.radius = 0.5;
    const Field extra = sample_obstacle(g, small);
    for (std::size_t i = 0; i < raised.values.size(); ++i) raised.values[i] += 0.1 * extra.values[i];
    const ProblemSpec p2(g, k, {0.7}, raised);
    const auto u1 = run(p1), u2 = run(p2);
    for (std::size_t i = 0; i < u1.u.values.size(); ++i) CHECK(u2.u.values[i] >= u1.u.values[i] - 1e-10);
}

TEST_CASE("translation by whole cells shifts the solution") {
    const double h = 1.0 / 32;
    const auto p0 = bump_problem(1, h, 8.0, {0.5});
    const auto p1 = bump_problem(1, h, 8.0, {0.5}, 1.0, 1.0, {8 * h});
    const auto op = build_operator(p0.grid, p0.kernel, p0.drift);

    // the discrete operator itself commutes with shifts on compact data
    Vector v(p0.grid.size(), 0.0), w(p0.grid.size(), 0.0);
    for (int i = 200; i < 300; ++i) v[i] = std::sin(0.1 * i);
    for (int i = 200; i < 300; ++i) w[i + 8] = v[i];
    const auto av = op.apply_direct(v), aw = op.apply_direct(w);
    for (int i = 100; i < 400; ++i) CHECK(av[i] == aw[i + 8]);

    const auto s0 = solve(p0, op), s1 = solve(p1, op);
    double worst = 0.0;
    for (int i = 0; i + 8 < p0.grid.n(); ++i) {
        CHECK(s0.contact_mask[i] == s1.contact_mask[i + 8]);
        if (std::abs(p0.grid.coord(i)) <= 2.0) worst = std::max(worst, std::abs(s0.u.values[i] - s1.u.values[i + 8]));
    }
    // the box is not shifted; u decays slowly (recurrent case), so its edges are felt
    CHECK(worst <= 3e-3);
}

TEST_CASE("no contact where the obstacle is negative") {
    const Grid g(1, 1.0 / 64, 8.0);
    ObstacleSpec s;
    s.center = {0.0};
    Field phi = sample_obstacle(g, s);
    for (int i = 0; i < g.n(); ++i) {
        if (std::abs(g.coord(i)) < 2.0) phi.values[i] -= 0.3;
    }
    const ProblemSpec p(g, KernelSpec::fractional(1), {0.3}, phi);
    const auto sol = run(p);
    REQUIRE(sol.converged);
    for (std::size_t i = 0; i < phi.values.size(); ++i) {
        if (phi.values[i] < 0.0) CHECK(sol.contact_mask[i] == 0);
    }
}

TEST_CASE("PSOR from a supersolution start is monotone after the first sweeps") {
    std::mt19937_64 rng(20260417);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    for (int trial = 0; trial < 10; ++trial) {
        const double height = 0.5 + unit(rng);
        const double radius = 0.5 + 0.5 * unit(rng);
        const double b = -2.0 + 4.0 * unit(rng);
        const double c = -0.25 + 0.5 * unit(rng);
        const auto p = bump_problem(1, 1.0 / 16, 4.0, {b}, height, radius, {std::round(c * 16) / 16});
        SolverParams params;
        params.method = SolverMethod::psor;
        params.omega = 1.0;
        params.initial_guess.assign(p.grid.size(), height);
        Vector previous;
        double rise = 0.0;
        params.on_sweep = [&](long sweep, const Vector& u) {
            if (sweep > 2) {
                for (std::size_t i = 0; i < u.size(); ++i) rise = std::max(rise, u[i] - previous[i]);
            }
            previous = u;
        };
        const auto s = run(p, params);
        CHECK(s.converged);
        CHECK(rise <= 1e-13);
    }
}

TEST_CASE("drift clamps the relaxation factor") {
    const auto p = bump_problem(1, 1.0 / 16, 4.0, {1.0});
    SolverParams params;
    params.method = SolverMethod::psor;
    const auto s = run(p, params);
    CHECK(s.converged);
    CHECK(s.note == "omega reduced to 1 for the nonsymmetric operator");
}
