#include "driftfb/solver.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "driftfb/errors.hpp"
#include "driftfb/krylov.hpp"

namespace driftfb {

namespace {

constexpr int kDivergenceWindow = 100;

double complementarity(const Vector& au, const Vector& u, const Vector& phi) {
    double r = 0.0;
    for (std::size_t i = 0; i < u.size(); ++i) r = std::max(r, std::abs(std::min(au[i], u[i] - phi[i])));
    return r;
}

void finish(SolutionField& sol, const DiscreteOperator& op, const Vector& phi, double tol) {
    const Vector au = op.apply(sol.u.values);
    sol.complementarity_residual = complementarity(au, sol.u.values, phi);
    sol.contact_tol = std::max(10.0 * tol, op.grid().h() * op.grid().h());
    sol.contact_mask.assign(phi.size(), 0);
    sol.pde_residual.assign(phi.size(), 0.0);
    for (std::size_t i = 0; i < phi.size(); ++i) {
        sol.contact_mask[i] = (sol.u.values[i] - phi[i] <= sol.contact_tol && phi[i] > 0.0) ? 1 : 0;
        if (!sol.contact_mask[i]) sol.pde_residual[i] = au[i];
    }
    sol.converged = sol.complementarity_residual <= tol;
}

// Lexicographic projected SOR starting from u (modified in place).
long psor(const DiscreteOperator& op, const Vector& phi, Vector& u, const SolverParams& p, long sweep_budget,
          std::vector<double>& history, bool& converged) {
    const Grid& g = op.grid();
    const int n = g.n();
    const Vector& c = op.coefficients();
    const double diag = op.diagonal();
    const int width = 2 * n - 1;
    double best = std::numeric_limits<double>::infinity();
    int rising = 0;
    converged = false;
    long sweep = 0;
    for (; sweep < sweep_budget; ++sweep) {
        if (g.dimension() == 1) {
            for (int i = 0; i < n; ++i) {
                const double* row = c.data() + (n - 1 - i);
                double s = 0.0;
                for (int j = 0; j < n; ++j) s += row[j] * u[j];
                s -= diag * u[i];
                const double gs = -s / diag;
                u[i] = std::max(phi[i], (1.0 - p.omega) * u[i] + p.omega * gs);
            }
        } else {
            for (int iy = 0; iy < n; ++iy) {
                for (int ix = 0; ix < n; ++ix) {
                    double s = 0.0;
                    for (int jy = 0; jy < n; ++jy) {
                        const double* row = c.data() + static_cast<std::size_t>(jy - iy + n - 1) * width + (n - 1 - ix);
                        const double* uy = u.data() + static_cast<std::size_t>(jy) * n;
                        for (int jx = 0; jx < n; ++jx) s += row[jx] * uy[jx];
                    }
                    const std::size_t i = g.index(ix, iy);
                    s -= diag * u[i];
                    u[i] = std::max(phi[i], (1.0 - p.omega) * u[i] + p.omega * (-s / diag));
                }
            }
        }
        if (p.on_sweep) p.on_sweep(sweep + 1, u);
        const double r = complementarity(op.apply(u), u, phi);
        history.push_back(r);
        if (r <= p.tol) {
            converged = true;
            return sweep + 1;
        }
        if (r < best) {
            best = r;
            rising = 0;
        } else if (history.size() >= 2 && r > history[history.size() - 2]) {
            if (++rising >= kDivergenceWindow) {
                std::ostringstream msg;
                msg << "PSOR diverging: residual rose for " << kDivergenceWindow << " consecutive sweeps; last residuals";
                for (std::size_t k = history.size() - 5; k < history.size(); ++k) msg << ' ' << history[k];
                throw SolverError(msg.str());
            }
        } else {
            rising = 0;
        }
    }
    return sweep;
}

struct PolicyResult {
    Vector u;
    std::vector<std::uint8_t> contact;  // exact policy (u = phi equations)
    int steps = 0;
    long krylov_iterations = 0;
    bool converged = false;
};

// Active-set (Howard) iteration. For a contact set C, u = G mu with mu
// supported on C and (G mu)_C = phi_C, G = A^{-1}; the capacitance system is
// solved by GMRES preconditioned with A_CC.
PolicyResult policy_iteration(const DiscreteOperator& op, const Vector& phi, std::vector<std::uint8_t> contact,
                              std::vector<double>& history) {
    const std::size_t n = phi.size();
    const bool big = op.grid().dimension() == 2;
    const int restart = big ? 60 : 200;
    PolicyResult out;
    // Loose solves until the contact set settles, then tight ones.
    bool tight = false;
    auto green = [&](const Vector& v) {
        const double tol = tight ? 1e-13 : 1e-10;
        const auto r = gmres([&](const Vector& x) { return op.apply(x); }, v,
                             [&](const Vector& x) { return op.precondition(x); }, {}, tol, restart, 2000);
        out.krylov_iterations += r.iterations;
        if (r.relative_residual > 1e3 * tol) throw SolverError("inner Krylov solve stalled");
        return r.x;
    };
    Vector mu(n, 0.0);
    for (int step = 0; step < 200; ++step) {
        std::vector<std::size_t> idx;
        for (std::size_t i = 0; i < n; ++i) {
            if (contact[i]) idx.push_back(i);
        }
        Vector u(n, 0.0);
        if (!idx.empty()) {
            auto extend = [&](const Vector& c) {
                Vector z(n, 0.0);
                for (std::size_t k = 0; k < idx.size(); ++k) z[idx[k]] = c[k];
                return z;
            };
            auto restrict = [&](const Vector& z) {
                Vector c(idx.size());
                for (std::size_t k = 0; k < idx.size(); ++k) c[k] = z[idx[k]];
                return c;
            };
            Vector rhs = restrict(phi);
            const auto cap = gmres([&](const Vector& c) { return restrict(green(extend(c))); }, rhs,
                                   [&](const Vector& c) { return restrict(op.apply(extend(c))); }, restrict(mu),
                                   tight ? 1e-13 : 1e-9, 100, 400);
            if (cap.relative_residual > (tight ? 1e-9 : 1e-6)) throw SolverError("capacitance solve stalled");
            mu = extend(cap.x);
            u = green(mu);
            for (std::size_t i : idx) u[i] = std::max(u[i], phi[i]);
        } else {
            mu.assign(n, 0.0);
        }
        const Vector au = op.apply(u);
        std::vector<std::uint8_t> next(n, 0);
        bool same = true;
        for (std::size_t i = 0; i < n; ++i) {
            next[i] = (phi[i] > 0.0 && u[i] - phi[i] <= au[i]) ? 1 : 0;
            same = same && next[i] == contact[i];
        }
        history.push_back(complementarity(au, u, phi));
        out.steps = step + 1;
        out.u = std::move(u);
        if (same && !tight) {
            tight = true;
            continue;
        }
        if (same) {
            out.contact = std::move(contact);
            out.converged = true;
            return out;
        }
        contact = std::move(next);
    }
    out.contact = std::move(contact);
    return out;
}

SolutionField solve_level(const ProblemSpec& problem, const DiscreteOperator& op, const SolverParams& params,
                          int depth);

std::vector<std::uint8_t> coarse_contact_guess(const ProblemSpec& problem, const SolverParams& params, int depth) {
    const Grid& g = problem.grid;
    const Grid coarse = g.coarsened(2);
    const int nc = coarse.n();
    Vector phic(coarse.size());
    for (std::size_t k = 0; k < coarse.size(); ++k) {
        phic[k] = problem.obstacle.values[g.index(2 * coarse.ix(k), 2 * coarse.iy(k))];
    }
    ProblemSpec cp(coarse, problem.kernel, problem.drift, Field(coarse, phic));
    const auto cop = build_operator(coarse, problem.kernel, problem.drift, DriftScheme::upwind);
    SolverParams sub = params;
    sub.on_sweep = nullptr;
    sub.initial_guess.clear();
    sub.method = SolverMethod::automatic;
    const auto cs = solve_level(cp, cop, sub, depth + 1);
    std::vector<std::uint8_t> guess(g.size(), 0);
    for (std::size_t i = 0; i < g.size(); ++i) {
        if (problem.obstacle.values[i] <= 0.0) continue;
        const int cx = std::min(nc - 1, (g.ix(i) + 1) / 2);
        const int cy = g.dimension() == 1 ? 0 : std::min(nc - 1, (g.iy(i) + 1) / 2);
        const std::size_t k = coarse.index(cx, cy);
        guess[i] = cs.u.values[k] - phic[k] <= 1e-9 && phic[k] > 0.0 ? 1 : 0;
    }
    return guess;
}

SolutionField solve_level(const ProblemSpec& problem, const DiscreteOperator& op, const SolverParams& params,
                          int depth) {
    const Vector& phi = problem.obstacle.values;
    SolutionField sol{Field(problem.grid), {}, {}, 0.0, 0.0, 0, false, "", "", {}};
    const bool any_positive = std::any_of(phi.begin(), phi.end(), [](double v) { return v > 0.0; });
    if (!any_positive) {
        sol.method = "trivial";
        sol.note = "no positive obstacle region";
        finish(sol, op, phi, params.tol);
        return sol;
    }
    SolverMethod method = params.method;
    if (method == SolverMethod::automatic) {
        method = problem.grid.size() <= kPsorNodeLimit ? SolverMethod::psor : SolverMethod::policy_iteration;
    }
    // Over-relaxation is only safe for the symmetric (drift-free) matrix.
    SolverParams run = params;
    const bool symmetric = std::all_of(problem.drift.begin(), problem.drift.end(), [](double v) { return v == 0.0; });
    if (!symmetric && run.omega > 1.0) run.omega = 1.0;
    if (method == SolverMethod::psor) {
        sol.method = "psor";
        if (run.omega != params.omega) sol.note = "omega reduced to 1 for the nonsymmetric operator";
        if (!params.initial_guess.empty() && params.initial_guess.size() != phi.size()) {
            throw InvalidInput("initial guess does not match the grid");
        }
        for (std::size_t i = 0; i < phi.size(); ++i) {
            const double start = params.initial_guess.empty() ? 0.0 : params.initial_guess[i];
            sol.u.values[i] = std::max(phi[i], start);
        }
        bool ok = false;
        sol.iterations = psor(op, phi, sol.u.values, run, params.max_iter, sol.residual_history, ok);
        finish(sol, op, phi, params.tol);
        return sol;
    }

    sol.method = "policy-iteration";
    std::vector<std::uint8_t> guess;
    const Grid& g = problem.grid;
    if (static_cast<long>(g.R() / (2.0 * g.h()) + 0.5) * 2 * g.h() == g.R() && g.n() > 65) {
        guess = coarse_contact_guess(problem, params, depth);
    } else {
        const double top = *std::max_element(phi.begin(), phi.end());
        guess.resize(phi.size());
        for (std::size_t i = 0; i < phi.size(); ++i) guess[i] = phi[i] > 0.5 * top ? 1 : 0;
    }
    auto pr = policy_iteration(op, phi, std::move(guess), sol.residual_history);
    sol.u.values = std::move(pr.u);
    sol.iterations = pr.steps;
    for (std::size_t i = 0; i < phi.size(); ++i) sol.u.values[i] = std::max(sol.u.values[i], phi[i]);
    finish(sol, op, phi, params.tol);
    std::ostringstream note;
    note << "policy steps " << pr.steps << ", krylov iterations " << pr.krylov_iterations;
    if (!sol.converged && problem.grid.dimension() == 1) {
        // Finish with PSOR sweeps from the policy-iteration iterate.
        bool ok = false;
        const long sweeps = psor(op, phi, sol.u.values, run, std::min<long>(params.max_iter, 2000),
                                 sol.residual_history, ok);
        note << ", psor polish sweeps " << sweeps;
        finish(sol, op, phi, params.tol);
    }
    if (!pr.converged) note << ", contact set did not settle";
    sol.converged = sol.converged && pr.converged;
    sol.note = note.str();
    return sol;
}

}  // namespace

ProblemSpec::ProblemSpec(Grid g, KernelSpec k, Vector b, Field phi, std::optional<ObstacleSpec> meta)
    : grid(std::move(g)), kernel(std::move(k)), drift(std::move(b)), obstacle(std::move(phi)), bump(std::move(meta)) {
    if (kernel.dimension() != grid.dimension()) throw InvalidInput("kernel and grid dimensions differ");
    if (static_cast<int>(drift.size()) != grid.dimension()) throw InvalidInput("drift length does not match grid");
    if (!(obstacle.grid == grid)) throw InvalidInput("obstacle is sampled on a different grid");
    const double limit = grid.R() / 3.0 + 1e-12;
    for (std::size_t i = 0; i < grid.size(); ++i) {
        const double v = obstacle.values[i];
        if (!std::isfinite(v)) throw InvalidInput("obstacle has non-finite values");
        if (v > 0.0) {
            for (double x : grid.point(i)) {
                if (std::abs(x) > limit) throw InvalidInput("obstacle support must stay within R/3 of the box centre");
            }
        }
    }
    if (bump && bump->radius > grid.R() / 3.0) throw InvalidInput("obstacle support radius exceeds R/3");
}

ProblemSpec ProblemSpec::synthetic(const Grid& g, const KernelSpec& k, const Vector& b, const ObstacleSpec& spec) {
    return ProblemSpec(g, k, b, sample_obstacle(g, spec), spec);
}

SolverMethod parse_solver_method(const std::string& name) {
    if (name == "auto" || name == "automatic") return SolverMethod::automatic;
    if (name == "psor") return SolverMethod::psor;
    if (name == "policy" || name == "policy-iteration") return SolverMethod::policy_iteration;
    throw InvalidInput("unknown solver method '" + name + "' (expected auto, psor or policy-iteration)");
}

std::string to_string(SolverMethod m) {
    switch (m) {
        case SolverMethod::automatic: return "auto";
        case SolverMethod::psor: return "psor";
        case SolverMethod::policy_iteration: return "policy-iteration";
    }
    return "auto";
}

SolutionField solve(const ProblemSpec& problem, const DiscreteOperator& op, const SolverParams& params) {
    if (!(op.grid() == problem.grid)) throw InvalidInput("operator grid differs from the problem grid");
    if (op.scheme() != DriftScheme::upwind || !op.is_m_matrix()) {
        throw InvalidInput("solver needs an upwind (M-matrix) operator");
    }
    if (!(params.omega > 0.0 && params.omega < 2.0)) throw InvalidInput("omega must lie in (0, 2)");
    if (!(params.tol > 0.0) || params.max_iter < 1) throw InvalidInput("tol and max_iter must be positive");
    return solve_level(problem, op, params, 0);
}

ResidualReport residuals(const Vector& u, const Vector& phi, const std::vector<std::uint8_t>& mask,
                         const DiscreteOperator& op) {
    if (u.size() != phi.size() || mask.size() != u.size()) throw InvalidInput("residuals: size mismatch");
    const Vector au = op.apply(u);
    ResidualReport r;
    for (std::size_t i = 0; i < u.size(); ++i) {
        r.negative_operator = std::max(r.negative_operator, -au[i]);
        if (!mask[i]) r.noncontact_operator = std::max(r.noncontact_operator, std::abs(au[i]));
        r.negative_gap = std::max(r.negative_gap, phi[i] - u[i]);
        r.complementarity = std::max(r.complementarity, std::abs(std::min(au[i], u[i] - phi[i])));
    }
    return r;
}

ResidualReport residuals(const SolutionField& solution, const DiscreteOperator& op, const ProblemSpec& problem) {
    return residuals(solution.u.values, problem.obstacle.values, solution.contact_mask, op);
}

AprioriReport a_priori_checks(const SolutionField& solution, const ProblemSpec& problem, double bound_tol,
                              double lipschitz_factor) {
    const Grid& g = problem.grid;
    const Vector& u = solution.u.values;
    const Vector& phi = problem.obstacle.values;
    AprioriReport rep;
    rep.max_u = *std::max_element(u.begin(), u.end());
    rep.min_u = *std::min_element(u.begin(), u.end());
    rep.max_phi = *std::max_element(phi.begin(), phi.end());
    rep.min_second_difference_u = std::numeric_limits<double>::infinity();
    const int n = g.n();
    const double h = g.h();
    std::vector<std::pair<int, int>> dirs{{1, 0}};
    if (g.dimension() == 2) dirs = {{1, 0}, {0, 1}, {1, 1}, {1, -1}};
    auto val = [&](const Vector& f, int i, int j) { return f[g.index(i, j)]; };
    // Difference quotients stay inside |x|_inf <= R/2: the truncated problem
    // has a boundary layer at the box edge that the whole-space solution lacks.
    const int lo = static_cast<int>(std::ceil((g.R() - 0.5 * g.R()) / h - 1e-9));
    const int hi = n - 1 - lo;
    rep.window = 0.5 * g.R();
    for (const auto& [dx, dy] : dirs) {
        const double len = h * std::sqrt(double(dx * dx + dy * dy));
        const int jlo = g.dimension() == 1 ? 0 : lo + 1, jhi = g.dimension() == 1 ? 0 : hi - 1;
        for (int j = jlo; j <= jhi; ++j) {
            for (int i = lo + 1; i <= hi - 1; ++i) {
                rep.lip_u = std::max(rep.lip_u, std::abs(val(u, i + dx, j + dy) - val(u, i, j)) / len);
                rep.lip_phi = std::max(rep.lip_phi, std::abs(val(phi, i + dx, j + dy) - val(phi, i, j)) / len);
                const double d2u = (val(u, i + dx, j + dy) - 2.0 * val(u, i, j) + val(u, i - dx, j - dy)) / (len * len);
                const double d2p = (val(phi, i + dx, j + dy) - 2.0 * val(phi, i, j) + val(phi, i - dx, j - dy)) / (len * len);
                rep.min_second_difference_u = std::min(rep.min_second_difference_u, d2u);
                rep.c11_phi = std::max(rep.c11_phi, std::abs(d2p));
            }
        }
    }
    rep.semiconvexity_slack = 0.05 * rep.c11_phi + 1e-8;
    rep.bounded = rep.max_u <= std::max(rep.max_phi, 0.0) + bound_tol;
    rep.lipschitz = rep.lip_u <= lipschitz_factor * rep.lip_phi + 1e-12;
    rep.semiconvex = rep.min_second_difference_u >= -rep.c11_phi - rep.semiconvexity_slack;
    return rep;
}

}  // namespace driftfb
