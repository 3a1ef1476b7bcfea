#pragma once

// Angular kernels of order-1 nonlocal operators and the closed-form exponent
// functionals built on them.

#include <span>
#include <variant>
#include <vector>

namespace driftfb {

// Small real vector (drift, directions, points). Length equals the dimension.
using Vector = std::vector<double>;

struct ConstantDensity {
    double value = 0.0;
};

// Density sampled at N equispaced angles 2*pi*i/N on S^{n-1}; piecewise
// linear in angle between samples. For n = 1 the two samples are mu(+1) and
// mu(-1).
struct SampledDensity {
    std::vector<double> values;
};

// Angular density mu of L u(x) = int ((u(x+y)+u(x-y))/2 - u(x)) mu(y/|y|)/|y|^{n+1} dy
// together with its ellipticity bounds.
class KernelSpec {
public:
    using Density = std::variant<ConstantDensity, SampledDensity>;

    // Throws InvalidInput / UnsupportedDimension if the invariants fail.
    KernelSpec(int dimension, Density density, double lambda, double Lambda);

    // mu == c_{n,1/2}: -L is the half-Laplacian.
    static KernelSpec fractional(int dimension);
    static KernelSpec constant(int dimension, double value);
    // Ellipticity bounds default to the sample extrema.
    static KernelSpec sampled(int dimension, std::vector<double> values);

    int dimension() const { return dimension_; }
    double lambda() const { return lambda_; }
    double Lambda() const { return Lambda_; }
    const Density& density() const { return density_; }
    bool is_constant() const { return std::holds_alternative<ConstantDensity>(density_); }

    // mu at polar angle `angle` (n = 2), or at +1 (angle 0) / -1 (angle pi) for n = 1.
    double operator()(double angle) const;

    // Angles in [0, 2*pi) where the density has a kink (empty for constants).
    std::vector<double> breakpoints() const;

    // Kernel with density scaled by `factor` (bounds scaled too).
    KernelSpec scaled(double factor) const;

private:
    int dimension_;
    Density density_;
    double lambda_;
    double Lambda_;
};

// Sum of two kernels of equal dimension; sampled densities must share N.
KernelSpec operator+(const KernelSpec& a, const KernelSpec& b);

// gamma(t) = 1/2 + arctan(t)/pi.
double gamma_exponent(double t);

struct ChiValue {
    double value = 0.0;
    double quadrature_error = 0.0;
};

// chi(e) = (pi/2) * int_{S^{n-1}} |theta . e| mu(theta) dtheta.
ChiValue chi_with_error(const KernelSpec& kernel, std::span<const double> e);
double chi(const KernelSpec& kernel, std::span<const double> e);

// gamma(b.nu / chi(nu)).
double tilde_gamma(const KernelSpec& kernel, std::span<const double> b,
                   std::span<const double> nu);

// c_{n,1/2}, from c^{-1} = (pi/2) int_{S^{n-1}} |theta_1| dtheta.
double normalization_constant(int dimension);

struct QuadratureValue {
    double value = 0.0;
    double error_estimate = 0.0;
};

// Direct adaptive quadrature of int_{R^n} (1 - cos x_1)/|x|^{n+1} dx, i.e.
// 1 / c_{n,1/2}. Independent of normalization_constant().
QuadratureValue normalization_integral_quadrature(int dimension);

struct ExponentPrediction {
    double gamma_value = 0.0;  // gamma(b.e*/chi(e*)) at the minimizing direction
    double chi_value = 0.0;    // chi(e*)
    double tilde_gamma = 0.0;  // same as gamma_value (kept for the report schema)
    double gamma_b = 0.0;      // 1/2 - arctan(|b|)/pi
    double gamma_minus = 0.0;  // inf_e gamma(b.e/chi(e))
    Vector minimizing_direction;
};

// Worst-case exponents over all directions. n = 2 uses a scan of
// `scan_angles` directions refined by golden-section search.
ExponentPrediction min_gamma(const KernelSpec& kernel, std::span<const double> b,
                             int scan_angles = 4096);

double norm(std::span<const double> v);
double dot(std::span<const double> a, std::span<const double> b);

}  // namespace driftfb
