#pragma once

// Sign of the discrete operator on powers of the distance to model domains.

#include <cstddef>
#include <limits>
#include <string>
#include <vector>

#include "driftfb/discretization.hpp"

namespace driftfb {

enum class DomainShape { half_space, ball };

struct BarrierDomain {
    DomainShape shape = DomainShape::half_space;
    Vector normal;  // half-space {x . e > 0}: e, unit
    Vector center;  // ball
    double radius = 0.0;
    double band = 0.0;  // delta

    static BarrierDomain half_space(Vector e, double band);
    static BarrierDomain ball(Vector center, double radius, double band);

    int dimension() const;
    // Exact distance to the boundary inside the domain, 0 outside.
    double distance(std::span<const double> x) const;
    // Normal pointing into the domain at the nearest boundary point.
    Vector inward_normal(std::span<const double> x) const;
};

enum class BarrierVerdict { supersolution_confirmed, subsolution_confirmed, inconclusive };

std::string to_string(BarrierVerdict v);

struct BarrierOptions {
    double margin = 0.05;
    double inner_h = 8.0;       // band nodes start at this many cells from the boundary
    double restrict_radius = 0.5;  // half-space nodes are kept inside this ball around the origin
    unsigned workers = 1;
};

struct BarrierReport {
    double kappa = 0.0;
    double threshold_min = 0.0;  // pointwise threshold range over the band
    double threshold_max = 0.0;
    BarrierVerdict verdict = BarrierVerdict::inconclusive;
    BarrierVerdict expected = BarrierVerdict::inconclusive;
    double min_value = 0.0;  // operator values on the band
    double max_value = 0.0;
    double min_normalized = 0.0;  // value / d^(kappa - 1)
    double max_normalized = 0.0;
    double mean_normalized = 0.0;
    double decay_slope = std::numeric_limits<double>::quiet_NaN();  // log |value| against log d
    std::size_t nodes_tested = 0;
};

BarrierReport barrier_sign_report(const BarrierDomain& domain, const DiscreteOperator& op, double kappa,
                                  const BarrierOptions& options = {});

// Convenience overload that builds the upwind operator.
BarrierReport barrier_sign_report(const BarrierDomain& domain, const KernelSpec& kernel, std::span<const double> b,
                                  double kappa, const Grid& grid, const BarrierOptions& options = {});

// Contribution of the distance power outside the box, subtracted from the
// box-truncated operator value.
double barrier_tail(const BarrierDomain& domain, const DiscreteOperator& op, double kappa,
                    std::span<const double> x);

struct ThresholdScan {
    double estimate = 0.0;
    double predicted = 0.0;  // tilde_gamma on the half-space, NaN for the ball
    std::vector<std::pair<double, double>> evaluations;  // (kappa, band mean of the normalized value)
};

// Evaluates the band mean at each listed kappa, then bisects the first sign
// change.
ThresholdScan threshold_scan(const BarrierDomain& domain, const DiscreteOperator& op, const std::vector<double>& kappas,
                             const BarrierOptions& options = {}, double tolerance = 1e-4);

}  // namespace driftfb
