#pragma once

#include <functional>

#include "driftfb/kernel_geometry.hpp"

namespace driftfb {

using LinearMap = std::function<Vector(const Vector&)>;

struct GmresResult {
    Vector x;
    int iterations = 0;
    double relative_residual = 0.0;  // preconditioned-free: ||b - A x|| / ||b||
    bool converged = false;
};

// Restarted GMRES with right preconditioning (precondition may be empty).
GmresResult gmres(const LinearMap& a, const Vector& b, const LinearMap& precondition, const Vector& x0,
                  double rtol, int restart, int max_iterations);

}  // namespace driftfb
