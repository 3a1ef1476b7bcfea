#pragma once

// Discrete obstacle problem min{(Au)_i, u_i - phi_i} = 0, zero exterior data.

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "driftfb/discretization.hpp"
#include "driftfb/obstacles.hpp"

namespace driftfb {

struct ProblemSpec {
    Grid grid;
    KernelSpec kernel;
    Vector drift;
    Field obstacle;
    std::optional<ObstacleSpec> bump;  // set for synthetic obstacles

    // Validates dimensions and that {phi > 0} lies within radius R/3 of the
    // centre of the box.
    ProblemSpec(Grid g, KernelSpec k, Vector b, Field phi, std::optional<ObstacleSpec> meta = std::nullopt);
    static ProblemSpec synthetic(const Grid& g, const KernelSpec& k, const Vector& b, const ObstacleSpec& spec);
};

enum class SolverMethod { automatic, psor, policy_iteration };

SolverMethod parse_solver_method(const std::string& name);
std::string to_string(SolverMethod m);

struct SolverParams {
    double omega = 1.5;
    double tol = 1e-10;
    long max_iter = 1000000;
    SolverMethod method = SolverMethod::automatic;
    // PSOR start; empty means max(phi, 0). Projected onto u >= phi.
    Vector initial_guess;
    // Called after every PSOR sweep with the current iterate.
    std::function<void(long, const Vector&)> on_sweep;
};

struct SolutionField {
    Field u;
    std::vector<std::uint8_t> contact_mask;
    Vector pde_residual;  // Au on non-contact nodes, 0 on contact nodes
    double complementarity_residual = 0.0;
    double contact_tol = 0.0;
    long iterations = 0;
    bool converged = false;
    std::string method;
    std::string note;
    std::vector<double> residual_history;  // one entry per sweep / outer step
};

// Nodes tried by PSOR before policy iteration takes over under `automatic`.
constexpr std::size_t kPsorNodeLimit = 1100;

SolutionField solve(const ProblemSpec& problem, const DiscreteOperator& op, const SolverParams& params = {});

struct ResidualReport {
    double negative_operator = 0.0;   // max (Au)_-
    double noncontact_operator = 0.0; // max |Au| off the contact mask
    double negative_gap = 0.0;        // max (u - phi)_-
    double complementarity = 0.0;     // max |min(Au, u - phi)|
};

ResidualReport residuals(const SolutionField& solution, const DiscreteOperator& op, const ProblemSpec& problem);
ResidualReport residuals(const Vector& u, const Vector& phi, const std::vector<std::uint8_t>& mask,
                         const DiscreteOperator& op);

struct AprioriReport {
    double max_u = 0.0;
    double max_phi = 0.0;
    double lip_u = 0.0;
    double lip_phi = 0.0;
    double min_second_difference_u = 0.0;  // over axes and diagonals
    double c11_phi = 0.0;                  // max |second difference of phi|
    double semiconvexity_slack = 0.0;
    bool bounded = true;
    bool lipschitz = true;
    bool semiconvex = true;
    double min_u = 0.0;
    double window = 0.0;  // difference quotients use nodes with |x|_inf <= window
};

AprioriReport a_priori_checks(const SolutionField& solution, const ProblemSpec& problem, double bound_tol = 1e-8,
                              double lipschitz_factor = 1.05);

}  // namespace driftfb
