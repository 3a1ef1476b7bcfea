#include "driftfb/kernel_geometry.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>

#include <boost/math/quadrature/exp_sinh.hpp>
#include <boost/math/quadrature/gauss.hpp>
#include <boost/math/quadrature/gauss_kronrod.hpp>

#include "driftfb/errors.hpp"

namespace driftfb {

namespace {

constexpr double kPi = std::numbers::pi;
constexpr double kTwoPi = 2.0 * std::numbers::pi;

void check_dimension(int dimension) {
    if (dimension != 1 && dimension != 2) {
        throw UnsupportedDimension("only dimensions 1 and 2 are supported, got " +
                                   std::to_string(dimension));
    }
}

double wrap_angle(double a) {
    a = std::fmod(a, kTwoPi);
    return a < 0.0 ? a + kTwoPi : a;
}

void check_unit(std::span<const double> e, int dimension) {
    if (static_cast<int>(e.size()) != dimension) {
        throw InvalidInput("direction has length " + std::to_string(e.size()) +
                           ", kernel dimension is " + std::to_string(dimension));
    }
    if (std::abs(norm(e) - 1.0) > 1e-12) {
        throw InvalidInput("direction is not a unit vector");
    }
}

std::pair<double, double> sample_extrema(const std::vector<double>& v) {
    auto [lo, hi] = std::minmax_element(v.begin(), v.end());
    return {*lo, *hi};
}

}  // namespace

double norm(std::span<const double> v) {
    double s = 0.0;
    for (double x : v) s += x * x;
    return std::sqrt(s);
}

double dot(std::span<const double> a, std::span<const double> b) {
    if (a.size() != b.size()) throw InvalidInput("dot: length mismatch");
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
    return s;
}

KernelSpec::KernelSpec(int dimension, Density density, double lambda, double Lambda)
    : dimension_(dimension), density_(std::move(density)), lambda_(lambda), Lambda_(Lambda) {
    check_dimension(dimension_);
    if (!(lambda_ > 0.0) || !(Lambda_ >= lambda_) || !std::isfinite(Lambda_)) {
        throw InvalidInput("ellipticity bounds must satisfy 0 < lambda <= Lambda < inf");
    }
    auto in_bounds = [&](double v) {
        return std::isfinite(v) && v >= lambda_ * (1.0 - 1e-14) && v <= Lambda_ * (1.0 + 1e-14);
    };
    if (const auto* c = std::get_if<ConstantDensity>(&density_)) {
        if (!in_bounds(c->value)) throw InvalidInput("constant density outside [lambda, Lambda]");
        return;
    }
    const auto& values = std::get<SampledDensity>(density_).values;
    const std::size_t n = values.size();
    if (n == 0 || n % 2 != 0) {
        throw InvalidInput("sampled density needs an even, nonzero number of samples, got " +
                           std::to_string(n));
    }
    if (dimension_ == 1 && n != 2) {
        throw InvalidInput("a 1-D sampled density has exactly two samples (mu(+1), mu(-1))");
    }
    for (std::size_t i = 0; i < n; ++i) {
        if (!in_bounds(values[i])) {
            throw InvalidInput("sample " + std::to_string(i) + " outside [lambda, Lambda]");
        }
        if (values[i] != values[(i + n / 2) % n]) {
            throw InvalidInput("density is not even: sample " + std::to_string(i) +
                               " differs from its antipode");
        }
    }
}

KernelSpec KernelSpec::fractional(int dimension) {
    const double c = normalization_constant(dimension);
    return KernelSpec(dimension, ConstantDensity{c}, c, c);
}

KernelSpec KernelSpec::constant(int dimension, double value) {
    return KernelSpec(dimension, ConstantDensity{value}, value, value);
}

KernelSpec KernelSpec::sampled(int dimension, std::vector<double> values) {
    if (values.empty()) throw InvalidInput("sampled density needs samples");
    auto [lo, hi] = sample_extrema(values);
    return KernelSpec(dimension, SampledDensity{std::move(values)}, lo, hi);
}

double KernelSpec::operator()(double angle) const {
    if (const auto* c = std::get_if<ConstantDensity>(&density_)) return c->value;
    const auto& v = std::get<SampledDensity>(density_).values;
    const std::size_t n = v.size();
    const double t = wrap_angle(angle) / kTwoPi * static_cast<double>(n);
    const auto i = static_cast<std::size_t>(std::floor(t)) % n;
    const double frac = t - std::floor(t);
    return (1.0 - frac) * v[i] + frac * v[(i + 1) % n];
}

std::vector<double> KernelSpec::breakpoints() const {
    std::vector<double> out;
    if (const auto* s = std::get_if<SampledDensity>(&density_)) {
        const std::size_t n = s->values.size();
        for (std::size_t i = 0; i < n; ++i) out.push_back(kTwoPi * static_cast<double>(i) / n);
    }
    return out;
}

KernelSpec KernelSpec::scaled(double factor) const {
    if (!(factor > 0.0)) throw InvalidInput("kernel scale factor must be positive");
    if (const auto* c = std::get_if<ConstantDensity>(&density_)) {
        return KernelSpec(dimension_, ConstantDensity{c->value * factor}, lambda_ * factor,
                          Lambda_ * factor);
    }
    auto values = std::get<SampledDensity>(density_).values;
    for (double& v : values) v *= factor;
    return KernelSpec(dimension_, SampledDensity{std::move(values)}, lambda_ * factor,
                      Lambda_ * factor);
}

KernelSpec operator+(const KernelSpec& a, const KernelSpec& b) {
    if (a.dimension() != b.dimension()) throw InvalidInput("kernel sum: dimension mismatch");
    if (a.is_constant() && b.is_constant()) {
        const double v = std::get<ConstantDensity>(a.density()).value +
                         std::get<ConstantDensity>(b.density()).value;
        return KernelSpec(a.dimension(), ConstantDensity{v}, a.lambda() + b.lambda(),
                          a.Lambda() + b.Lambda());
    }
    auto samples = [](const KernelSpec& k) -> const std::vector<double>* {
        const auto* s = std::get_if<SampledDensity>(&k.density());
        return s ? &s->values : nullptr;
    };
    const auto* sa = samples(a);
    const auto* sb = samples(b);
    if (sa && sb && sa->size() != sb->size()) {
        throw InvalidInput("kernel sum: sampled densities must share the sample count");
    }
    std::vector<double> values = sa ? *sa : *sb;
    for (std::size_t i = 0; i < values.size(); ++i) {
        if (sa && sb) {
            values[i] += (*sb)[i];
        } else {
            values[i] += std::get<ConstantDensity>((sa ? b : a).density()).value;
        }
    }
    return KernelSpec(a.dimension(), SampledDensity{std::move(values)}, a.lambda() + b.lambda(),
                      a.Lambda() + b.Lambda());
}

double gamma_exponent(double t) {
    if (!std::isfinite(t)) throw InvalidInput("gamma_exponent: argument must be finite");
    return 0.5 + std::atan(t) / kPi;
}

ChiValue chi_with_error(const KernelSpec& kernel, std::span<const double> e) {
    check_unit(e, kernel.dimension());
    if (kernel.dimension() == 1) {
        return {0.5 * kPi * (kernel(0.0) + kernel(kPi)) * std::abs(e[0]), 0.0};
    }
    // |cos(theta - theta_e)| mu(theta) is smooth between the kinks of |cos|
    // and the density's sample angles; Gauss-Legendre on each smooth piece.
    const double theta_e = std::atan2(e[1], e[0]);
    std::vector<double> cuts = kernel.breakpoints();
    cuts.push_back(wrap_angle(theta_e + 0.5 * kPi));
    cuts.push_back(wrap_angle(theta_e - 0.5 * kPi));
    cuts.push_back(0.0);
    std::sort(cuts.begin(), cuts.end());
    cuts.push_back(kTwoPi);
    auto integrand = [&](double theta) {
        return std::abs(std::cos(theta - theta_e)) * kernel(theta);
    };
    using boost::math::quadrature::gauss;
    double fine = 0.0;
    double coarse = 0.0;
    for (std::size_t i = 0; i + 1 < cuts.size(); ++i) {
        if (cuts[i + 1] - cuts[i] <= 0.0) continue;
        fine += gauss<double, 20>::integrate(integrand, cuts[i], cuts[i + 1]);
        coarse += gauss<double, 10>::integrate(integrand, cuts[i], cuts[i + 1]);
    }
    return {0.5 * kPi * fine, 0.5 * kPi * std::abs(fine - coarse)};
}

double chi(const KernelSpec& kernel, std::span<const double> e) {
    return chi_with_error(kernel, e).value;
}

double tilde_gamma(const KernelSpec& kernel, std::span<const double> b,
                   std::span<const double> nu) {
    if (static_cast<int>(b.size()) != kernel.dimension()) {
        throw InvalidInput("drift length does not match kernel dimension");
    }
    return gamma_exponent(dot(b, nu) / chi(kernel, nu));
}

double normalization_constant(int dimension) {
    check_dimension(dimension);
    const Vector e1 = dimension == 1 ? Vector{1.0} : Vector{1.0, 0.0};
    return 1.0 / chi(KernelSpec::constant(dimension, 1.0), e1);
}

QuadratureValue normalization_integral_quadrature(int dimension) {
    check_dimension(dimension);
    using boost::math::quadrature::gauss_kronrod;
    constexpr int kPeriods = 1000;
    const double T = kTwoPi * kPeriods;
    // (1 - cos t)/t^2 written to avoid cancellation near t = 0.
    auto radial = [](double t) {
        if (t < 1e-8) return 0.5;
        const double s = std::sin(0.5 * t);
        return 2.0 * s * s / (t * t);
    };
    // Tail beyond T (a multiple of 2*pi): int_T^inf (1-cos t)/t^2 dt.
    const double tail = 1.0 / T - 2.0 / std::pow(T, 3) + 24.0 / std::pow(T, 5);
    const double tail_error = 720.0 / std::pow(T, 7);

    QuadratureValue out;
    if (dimension == 1) {
        double sum = 0.0;
        double err = 0.0;
        for (int k = 0; k < kPeriods; ++k) {
            double e = 0.0;
            sum += gauss_kronrod<double, 31>::integrate(radial, kTwoPi * k, kTwoPi * (k + 1), 15,
                                                        1e-15, &e);
            err += e * std::max(1.0, std::abs(sum));
        }
        out.value = 2.0 * (sum + tail);
        out.error_estimate = 2.0 * (err + tail_error);
        return out;
    }
    // n = 2: nested quadrature over x_1 (outer) and x_2 (inner, half line).
    boost::math::quadrature::exp_sinh<double> inner_rule;
    auto inner = [&](double x1) {
        auto g = [x1](double x2) { return std::pow(x1 * x1 + x2 * x2, -1.5); };
        return 2.0 * inner_rule.integrate(g, 1e-15);
    };
    auto integrand = [&](double x1) {
        if (x1 < 1e-6) return 1.0;  // (1 - cos x)/x^2 * 2/x^... limit: (x^2/2) * 2/x^2
        return (1.0 - std::cos(x1)) * inner(x1);
    };
    double sum = 0.0;
    double err = 0.0;
    for (int k = 0; k < kPeriods; ++k) {
        double e = 0.0;
        sum += gauss_kronrod<double, 31>::integrate(integrand, kTwoPi * k, kTwoPi * (k + 1), 10,
                                                    1e-13, &e);
        err += e * std::max(1.0, std::abs(sum));
    }
    // Far field: the inner integral equals 2/x_1^2 there.
    out.value = 2.0 * (sum + 2.0 * tail);
    out.error_estimate = 2.0 * (err + 2.0 * tail_error);
    return out;
}

ExponentPrediction min_gamma(const KernelSpec& kernel, std::span<const double> b,
                             int scan_angles) {
    const int n = kernel.dimension();
    if (static_cast<int>(b.size()) != n) throw InvalidInput("drift length does not match kernel");
    for (double v : b) {
        if (!std::isfinite(v)) throw InvalidInput("drift must be finite");
    }
    ExponentPrediction out;
    out.gamma_b = 0.5 - std::atan(norm(b)) / kPi;

    auto value_at = [&](const Vector& e) { return gamma_exponent(dot(b, e) / chi(kernel, e)); };

    if (n == 1) {
        const Vector plus{1.0};
        const Vector minus{-1.0};
        const double gp = value_at(plus);
        const double gm = value_at(minus);
        out.minimizing_direction = gp <= gm ? plus : minus;
    } else {
        if (scan_angles < 4) throw InvalidInput("min_gamma: scan needs at least 4 angles");
        auto at_angle = [&](double a) { return value_at(Vector{std::cos(a), std::sin(a)}); };
        const double step = kTwoPi / scan_angles;
        int best = 0;
        double best_value = at_angle(0.0);
        for (int i = 1; i < scan_angles; ++i) {
            const double v = at_angle(step * i);
            if (v < best_value) {
                best_value = v;
                best = i;
            }
        }
        // Golden-section refinement inside the bracketing scan cells.
        double lo = step * (best - 1);
        double hi = step * (best + 1);
        const double ratio = 0.5 * (std::sqrt(5.0) - 1.0);
        double x1 = hi - ratio * (hi - lo);
        double x2 = lo + ratio * (hi - lo);
        double f1 = at_angle(x1);
        double f2 = at_angle(x2);
        while (hi - lo > 1e-10) {
            if (f1 <= f2) {
                hi = x2;
                x2 = x1;
                f2 = f1;
                x1 = hi - ratio * (hi - lo);
                f1 = at_angle(x1);
            } else {
                lo = x1;
                x1 = x2;
                f1 = f2;
                x2 = lo + ratio * (hi - lo);
                f2 = at_angle(x2);
            }
        }
        double a = 0.5 * (lo + hi);
        if (at_angle(a) > best_value) a = step * best;
        out.minimizing_direction = {std::cos(a), std::sin(a)};
    }
    out.chi_value = chi(kernel, out.minimizing_direction);
    out.gamma_value = value_at(out.minimizing_direction);
    out.tilde_gamma = out.gamma_value;
    out.gamma_minus = out.gamma_value;
    if (kernel.is_constant()) {
        // chi is constant, so the infimum is attained at e = -b/|b| exactly.
        const double c = out.chi_value;
        out.gamma_minus = gamma_exponent(-norm(b) / c);
        if (std::get<ConstantDensity>(kernel.density()).value == normalization_constant(n)) {
            out.gamma_minus = out.gamma_b;
        }
        out.gamma_value = out.tilde_gamma = out.gamma_minus;
        if (norm(b) > 0.0) {
            Vector e(b.begin(), b.end());
            const double nb = norm(b);
            for (double& x : e) x = -x / nb;
            out.minimizing_direction = e;
        }
    }
    return out;
}

}  // namespace driftfb
