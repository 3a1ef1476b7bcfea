#pragma once

// Free boundary localisation and local growth-exponent fits for solved
// obstacle problems.

#include <cstddef>
#include <limits>
#include <string>
#include <vector>

#include "driftfb/solver.hpp"

namespace driftfb {

enum class PointClass { regular, degenerate_suspect };

std::string to_string(PointClass c);

struct FreeBoundaryPoint {
    Vector location;
    Vector normal;  // unit, pointing into {u > phi}
    std::size_t anchor = 0;  // last contact node before the free boundary
    double fitted_exponent = std::numeric_limits<double>::quiet_NaN();
    double fitted_c0 = std::numeric_limits<double>::quiet_NaN();
    double r2 = std::numeric_limits<double>::quiet_NaN();
    double predicted_exponent = std::numeric_limits<double>::quiet_NaN();
    double deviation = std::numeric_limits<double>::quiet_NaN();
    double r_min = 0.0;
    double r_max = 0.0;
    double window_shift_delta = std::numeric_limits<double>::quiet_NaN();  // refit one dyadic level up (or down)
    bool window_stable = false;
    PointClass classification = PointClass::degenerate_suspect;
    std::string note;  // why the fit failed, empty otherwise
};

// Locations here are the midpoint of the transition cell; fit_growth_exponent
// refines them.
std::vector<FreeBoundaryPoint> locate_free_boundary(const SolutionField& solution, const ProblemSpec& problem,
                                                    double smoothing_width_h = 4.0);

struct FitWindow {
    double r_min = 0.0;  // 0 means 8h
    int levels = 3;      // dyadic radii r_min, 2 r_min, ...
    double r_cap = std::numeric_limits<double>::infinity();
};

struct GrowthFit {
    double exponent = 0.0;
    double c0 = 0.0;
    double r2 = 0.0;
    double r_min = 0.0;
    double r_max = 0.0;
    Vector location;
    int locator_iterations = 0;
    std::vector<double> radii;
    std::vector<double> sup_values;
};

// Least-squares slope of log sup_{B_r(x0)}(u - phi) against log r. The point
// location is found self-consistently: (u - phi)^(1/p) is extrapolated to zero
// along the normal from the nodes 2..5 cells past the anchor, with p the
// current fitted exponent.
GrowthFit fit_growth_exponent(const SolutionField& solution, const ProblemSpec& problem,
                              const FreeBoundaryPoint& point, const FitWindow& window);

// Fit with the same radii at a fixed location (no refinement).
GrowthFit fit_at(const SolutionField& solution, const ProblemSpec& problem, const Vector& x0,
                 const std::vector<double>& radii);

// Fills predicted_exponent and deviation.
void compare_prediction(FreeBoundaryPoint& point, const KernelSpec& kernel, std::span<const double> b);

// (fitted_a - 1) + (fitted_b - 1) - 1.
double sum_rule_residual(const FreeBoundaryPoint& a, const FreeBoundaryPoint& b);

struct AnalysisOptions {
    double smoothing_width_h = 4.0;
    double window_r_min_h = 8.0;
    int window_levels = 3;
    double classification_margin = 0.05;
    double min_r2 = 0.99;
    unsigned workers = 1;
};

// Locate, fit, compare and classify every free boundary point. A point whose
// fit fails keeps NaN fit fields and the reason in `note`. The window is
// capped at rho/2 and at half the distance to the nearest point with an
// opposing normal.
std::vector<FreeBoundaryPoint> analyze_free_boundary(const SolutionField& solution, const ProblemSpec& problem,
                                                     const AnalysisOptions& options = {});

enum class NondegeneracyStatus { pass, fail, hypothesis_not_met };

std::string to_string(NondegeneracyStatus s);

struct NondegeneracyPoint {
    std::size_t point = 0;
    double min_ratio = 0.0;  // min over the window of d_r / r^2
    double exponent = 0.0;
    bool pass = false;
};

struct NondegeneracyReport {
    NondegeneracyStatus status = NondegeneracyStatus::hypothesis_not_met;
    double hypothesis_max = 0.0;  // max of (Laplacian + d_bb) phi on {phi > 0}
    std::vector<NondegeneracyPoint> points;
};

// `points` must already carry fitted exponents and windows.
NondegeneracyReport nondegeneracy_check(const SolutionField& solution, const ProblemSpec& problem,
                                        const std::vector<FreeBoundaryPoint>& points, double exponent_limit = 2.05);

// Discrete (Laplacian + d_bb) phi, evaluated at interior nodes of {phi > 0};
// returns the maximum.
double concavity_hypothesis_max(const ProblemSpec& problem);

// max |grad_h u(x) - grad_h u(y)| / |x - y|^theta over node pairs at
// distances in [r_min, r_max] (axes and diagonals in 2-D), both nodes
// inside |x|_inf <= inner. The box edge has its own boundary layer.
double holder_seminorm(const SolutionField& solution, double theta, double r_min, double r_max,
                       double inner = std::numeric_limits<double>::infinity());

struct RegularityReport {
    double theta = 0.0;
    double coarse = 0.0;
    double fine = 0.0;
    double ratio = 1.0;
    bool bounded = true;
};

// theta defaults to gamma_minus - 0.05; scales [8h, rho/2] on each grid,
// nodes within R/2.
RegularityReport regularity_budget(const SolutionField& coarse, const SolutionField& fine, const KernelSpec& kernel,
                                   std::span<const double> b, double rho,
                                   double theta = std::numeric_limits<double>::quiet_NaN(), double max_ratio = 1.5);

}  // namespace driftfb
