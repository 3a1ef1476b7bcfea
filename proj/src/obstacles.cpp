#include "driftfb/obstacles.hpp"

#include <cmath>

#include "driftfb/errors.hpp"

namespace driftfb {

namespace {

double smooth_step(double t) {
    if (t <= 0.0) return 0.0;
    if (t >= 1.0) return 1.0;
    const double a = std::exp(-1.0 / t);
    const double b = std::exp(-1.0 / (1.0 - t));
    return a / (a + b);
}

}  // namespace

ObstacleFamily parse_obstacle_family(const std::string& name) {
    if (name == "bump") return ObstacleFamily::bump;
    if (name == "concave-core" || name == "concave_core") return ObstacleFamily::concave_core;
    throw InvalidInput("unknown obstacle family '" + name + "' (expected bump or concave-core)");
}

std::string to_string(ObstacleFamily f) { return f == ObstacleFamily::bump ? "bump" : "concave-core"; }

double obstacle_value(const ObstacleSpec& spec, std::span<const double> x) {
    if (x.size() != spec.center.size()) throw InvalidInput("obstacle centre and point differ in dimension");
    double r2 = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) r2 += (x[i] - spec.center[i]) * (x[i] - spec.center[i]);
    const double rho2 = spec.radius * spec.radius;
    if (r2 >= rho2) return 0.0;
    if (spec.family == ObstacleFamily::bump) return spec.height * std::exp(1.0 - 1.0 / (1.0 - r2 / rho2));
    const double r = std::sqrt(r2);
    const double cut = 1.0 - smooth_step((r - 0.6 * spec.radius) / (0.4 * spec.radius));
    return (spec.height - 4.0 * spec.height * r2 / rho2) * cut;
}

Field sample_obstacle(const Grid& grid, const ObstacleSpec& spec) {
    if (!(spec.radius > 0.0) || !std::isfinite(spec.height)) throw InvalidInput("obstacle radius must be positive");
    if (static_cast<int>(spec.center.size()) != grid.dimension()) {
        throw InvalidInput("obstacle centre dimension does not match the grid");
    }
    return sample(grid, [&](std::span<const double> x) { return obstacle_value(spec, x); });
}

}  // namespace driftfb
