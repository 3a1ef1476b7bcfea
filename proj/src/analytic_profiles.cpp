#include "driftfb/analytic_profiles.hpp"

#include <cmath>
#include <numbers>

#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <boost/math/quadrature/tanh_sinh.hpp>

#include "driftfb/errors.hpp"

namespace driftfb {

namespace {

constexpr double kPi = std::numbers::pi;

void check_beta(double beta) {
    if (!(beta > 0.0 && beta < 1.0)) throw InvalidInput("beta must lie in (0, 1)");
}

double drift_factor(double beta, double b) { return b * std::sin(beta * kPi) + std::cos(beta * kPi); }

}  // namespace

std::string to_string(ProfileClass c) {
    switch (c) {
        case ProfileClass::supersolution: return "supersolution";
        case ProfileClass::solution: return "solution";
        case ProfileClass::subsolution: return "subsolution";
    }
    return "unknown";
}

ProfileIdentity power_multiplier(double beta, double b, double zero_tol) {
    check_beta(beta);
    if (!std::isfinite(b)) throw InvalidInput("drift must be finite");
    ProfileIdentity out{beta, b, beta * drift_factor(beta, b), ProfileClass::solution};
    if (out.multiplier > zero_tol) out.classification = ProfileClass::supersolution;
    if (out.multiplier < -zero_tol) out.classification = ProfileClass::subsolution;
    return out;
}

double power_image_coefficient(double beta, double b) {
    check_beta(beta);
    return beta * drift_factor(beta, b) / std::sin(beta * kPi);
}

OracleValue half_laplacian_power_oracle(double beta, double x, double precision) {
    check_beta(beta);
    if (!(x > 0.0) || !std::isfinite(x)) throw InvalidInput("oracle point must be positive");
    if (!(precision >= 1e-12)) throw InvalidInput("oracle precision must be >= 1e-12");
    using boost::math::quadrature::gauss_kronrod;
    using boost::math::quadrature::tanh_sinh;
    const double xb = std::pow(x, beta);

    // y < 0, where the profile vanishes: int x^beta/(x-y)^2 dy.
    const double negative = xb / x;

    // Symmetric pairing over |y - x| < x/2. Below t = s/x = 0.05 the second
    // difference is replaced by its binomial series (the odd terms cancel).
    double coeff[9];
    {
        double c = 1.0;
        for (int j = 1; j <= 16; ++j) {
            c *= (beta - (j - 1)) / j;
            if (j % 2 == 0) coeff[j / 2] = c;
        }
    }
    auto paired = [&](double s) {
        const double t = s / x;
        if (t < 0.05) {
            double sum = 0.0;
            double tp = 1.0;
            for (int k = 1; k <= 8; ++k) {
                sum += coeff[k] * tp;
                tp *= t * t;
            }
            return -2.0 * xb / (x * x) * sum;
        }
        return (2.0 * xb - std::pow(x + s, beta) - std::pow(x - s, beta)) / (s * s);
    };
    double err_near = 0.0;
    const double near = gauss_kronrod<double, 61>::integrate(paired, 0.0, 0.5 * x, 15, 1e-15, &err_near);

    tanh_sinh<double> ts;
    auto left = [&](double y) { return (xb - std::pow(y, beta)) / ((x - y) * (x - y)); };
    double err_left = 0.0;
    const double left_part = ts.integrate(left, 0.0, 0.5 * x, 1e-15, &err_left);

    // y > 3x/2 through t = x / y.
    auto right = [&](double t) {
        if (t <= 0.0) return 0.0;
        return (xb / x) * (1.0 - std::pow(t, -beta)) / ((t - 1.0) * (t - 1.0));
    };
    double err_right = 0.0;
    const double right_part = ts.integrate(right, 0.0, 2.0 / 3.0, 1e-15, &err_right);

    OracleValue out;
    out.value = (negative + near + left_part + right_part) / kPi;
    const double scale = std::abs(near) + std::abs(left_part) + std::abs(right_part) + negative;
    out.error_estimate = (err_near + err_left + err_right + 1e-15 * scale) / kPi;
    if (!(out.error_estimate <= precision) || !std::isfinite(out.value)) {
        throw QuadratureError("half-Laplacian oracle missed the requested precision",
                              out.error_estimate);
    }
    return out;
}

ExtensionCheck extension_identity_check(double beta, double r, int n_theta, double b) {
    check_beta(beta);
    if (!(r > 0.0)) throw InvalidInput("radius must be positive");
    if (n_theta < 4) throw InvalidInput("n_theta must be at least 4");
    const double dt = kPi / n_theta;
    const double rb = std::pow(r, beta);
    auto w = [&](double theta) { return rb * std::sin(beta * theta); };

    ExtensionCheck out;
    out.boundary_value = w(0.0);
    // g'' h + g' h / r + g h'' / r^2 with g = r^beta exact, h'' by central differences.
    for (int j = 1; j < n_theta; ++j) {
        const double theta = j * dt;
        const double h = std::sin(beta * theta);
        const double hpp = (std::sin(beta * (theta + dt)) - 2.0 * h + std::sin(beta * (theta - dt))) / (dt * dt);
        const double g = rb;
        const double gp = beta * rb / r;
        const double gpp = beta * (beta - 1.0) * rb / (r * r);
        const double lap = gpp * h + gp * h / r + g * hpp / (r * r);
        out.laplace_residual = std::max(out.laplace_residual, std::abs(lap) * r * r / rb);
    }
    // One-sided second-order theta derivative at theta = pi.
    const double wt = (3.0 * w(kPi) - 4.0 * w(kPi - dt) + w(kPi - 2.0 * dt)) / (2.0 * dt);
    const double wr = beta * rb / r * std::sin(beta * kPi);
    out.conormal_value = wt / r + b * wr;
    out.conormal_expected = power_multiplier(beta, b).multiplier * std::pow(r, beta - 1.0);
    out.max_residual = std::max({out.laplace_residual, std::abs(out.conormal_value - out.conormal_expected),
                                 std::abs(out.boundary_value)});
    return out;
}

double solve_exponent_root(double b) {
    if (!std::isfinite(b)) throw InvalidInput("drift must be finite");
    double lo = 0.0;
    double hi = 1.0;
    // drift_factor(0) = 1 > 0 and drift_factor(1) = -1 < 0 for every b.
    for (int it = 0; it < 200 && hi - lo > 1e-16; ++it) {
        const double mid = 0.5 * (lo + hi);
        if (drift_factor(mid, b) > 0.0) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    return 0.5 * (lo + hi);
}

}  // namespace driftfb
