#pragma once

#include <string>

#include "driftfb/grid.hpp"

namespace driftfb {

enum class ObstacleFamily { bump, concave_core };

ObstacleFamily parse_obstacle_family(const std::string& name);
std::string to_string(ObstacleFamily f);

// bump:         a exp(1 - 1/(1 - |x-c|^2/rho^2)) inside B_rho(c)
// concave_core: (a - kappa |x-c|^2) times a C-infinity cutoff that is 1 on
//               B_{0.6 rho} and 0 outside B_rho, kappa = 4a/rho^2, so the
//               positivity set is B_{rho/2} where the obstacle is a paraboloid.
struct ObstacleSpec {
    ObstacleFamily family = ObstacleFamily::bump;
    double height = 1.0;
    double radius = 1.0;
    Vector center;
};

double obstacle_value(const ObstacleSpec& spec, std::span<const double> x);
Field sample_obstacle(const Grid& grid, const ObstacleSpec& spec);

}  // namespace driftfb
