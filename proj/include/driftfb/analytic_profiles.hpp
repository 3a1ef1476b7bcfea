#pragma once

// One-dimensional power profiles (x_+)^beta under (-Delta)^{1/2} + b d/dx.

#include <string>

namespace driftfb {

enum class ProfileClass { supersolution, solution, subsolution };

std::string to_string(ProfileClass c);

struct ProfileIdentity {
    double beta = 0.0;
    double drift = 0.0;
    double multiplier = 0.0;  // beta * (b sin(beta pi) + cos(beta pi))
    ProfileClass classification = ProfileClass::solution;
};

// |multiplier| <= zero_tol counts as "solution".
ProfileIdentity power_multiplier(double beta, double b, double zero_tol = 1e-12);

// Exact coefficient of x^{beta-1} in ((-Delta)^{1/2} + b d/dx)(x_+)^beta:
// beta * (cot(beta pi) + b). Same sign as power_multiplier.
double power_image_coefficient(double beta, double b);

struct OracleValue {
    double value = 0.0;
    double error_estimate = 0.0;
};

// (-Delta)^{1/2} (y_+)^beta evaluated at x > 0 by principal-value quadrature,
// normalization 1/pi. Throws QuadratureError if `precision` is not reached.
OracleValue half_laplacian_power_oracle(double beta, double x, double precision = 1e-10);

struct ExtensionCheck {
    double laplace_residual = 0.0;    // max |Delta w| r^{2-beta} over interior theta nodes
    double conormal_value = 0.0;      // (r^{-1} d_theta + b d_r) w at theta = pi
    double conormal_expected = 0.0;   // power_multiplier(beta, b) * r^{beta-1}
    double boundary_value = 0.0;      // w(r, 0)
    double max_residual = 0.0;
};

// w(r, theta) = r^beta sin(beta theta) on theta in [0, pi]; theta derivatives by
// finite differences on n_theta intervals, r derivatives exact.
ExtensionCheck extension_identity_check(double beta, double r, int n_theta, double b = 0.0);

// Bisection root of b sin(beta pi) + cos(beta pi) on (0, 1).
double solve_exponent_root(double b);

}  // namespace driftfb
