#include "driftfb/barrier.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <thread>

#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <boost/math/quadrature/tanh_sinh.hpp>

#include "driftfb/errors.hpp"

namespace driftfb {

namespace {

// int_{r0}^inf (p + q r)_+^kappa r^-2 dr for p > 0.
double ray_tail(double p, double q, double r0, double kappa) {
    thread_local boost::math::quadrature::tanh_sinh<double> rule;
    if (std::abs(q) < 1e-14) return std::pow(p, kappa) / r0;
    if (q > 0.0) {
        // t = 1/r
        auto f = [&](double t) { return t > 0.0 ? std::pow(p + q / t, kappa) : 0.0; };
        return rule.integrate(f, 0.0, 1.0 / r0);
    }
    const double upper = p / -q;
    if (r0 >= upper) return 0.0;
    auto f = [&](double r) { return std::pow(std::max(0.0, p + q * r), kappa) / (r * r); };
    return rule.integrate(f, r0, upper);
}

double exit_distance(double x, double y, double c, double s, double edge) {
    double t = std::numeric_limits<double>::infinity();
    if (std::abs(c) > 1e-15) t = std::min(t, ((c > 0.0 ? edge : -edge) - x) / c);
    if (std::abs(s) > 1e-15) t = std::min(t, ((s > 0.0 ? edge : -edge) - y) / s);
    return t;
}

struct BandSample {
    double distance;
    double value;
    double threshold;
};

std::vector<BandSample> band_values(const BarrierDomain& domain, const DiscreteOperator& op, double kappa,
                                    const BarrierOptions& options) {
    const Grid& g = op.grid();
    if (domain.dimension() != g.dimension()) throw InvalidInput("barrier domain and grid dimensions differ");
    if (!(kappa > 0.0 && kappa < 1.0)) throw InvalidInput("kappa must lie in (0, 1)");
    if (domain.band < 16.0 * g.h() * (1.0 - 1e-12)) throw InvalidInput("band under-resolved: need delta >= 16h");
    if (domain.shape == DomainShape::ball) {
        for (int a = 0; a < g.dimension(); ++a) {
            if (std::abs(domain.center[a]) + domain.radius > g.R()) throw InvalidInput("ball must lie inside the box");
        }
    }
    Vector field(g.size());
    for (std::size_t i = 0; i < g.size(); ++i) {
        const double d = domain.distance(g.point(i));
        field[i] = d > 0.0 ? std::pow(d, kappa) : 0.0;
    }
    const Vector au = op.apply(field);
    const double inner = options.inner_h * g.h();
    double fixed_threshold = std::numeric_limits<double>::quiet_NaN();
    if (domain.shape == DomainShape::half_space) fixed_threshold = tilde_gamma(op.kernel(), op.drift(), domain.normal);

    std::vector<BandSample> out;
    for (std::size_t i = 0; i < g.size(); ++i) {
        const Vector x = g.point(i);
        const double d = domain.distance(x);
        if (d < inner * (1.0 - 1e-12) || d > domain.band * (1.0 + 1e-12)) continue;
        if (domain.shape == DomainShape::half_space && norm(x) > options.restrict_radius * (1.0 + 1e-12)) continue;
        const double thr = domain.shape == DomainShape::half_space
                               ? fixed_threshold
                               : tilde_gamma(op.kernel(), op.drift(), domain.inward_normal(x));
        out.push_back({d, au[i] - barrier_tail(domain, op, kappa, x), thr});
    }
    if (out.empty()) throw InvalidInput("barrier band contains no grid nodes");
    return out;
}

double band_mean(const std::vector<BandSample>& s, double kappa) {
    double sum = 0.0;
    for (const auto& b : s) sum += b.value / std::pow(b.distance, kappa - 1.0);
    return sum / static_cast<double>(s.size());
}

}  // namespace

BarrierDomain BarrierDomain::half_space(Vector e, double band) {
    const double len = norm(e);
    if (!(len > 0.0)) throw InvalidInput("half-space normal must be nonzero");
    for (double& v : e) v /= len;
    BarrierDomain d;
    d.shape = DomainShape::half_space;
    d.normal = std::move(e);
    d.band = band;
    return d;
}

BarrierDomain BarrierDomain::ball(Vector center, double radius, double band) {
    if (!(radius > 0.0)) throw InvalidInput("ball radius must be positive");
    BarrierDomain d;
    d.shape = DomainShape::ball;
    d.center = std::move(center);
    d.radius = radius;
    d.band = band;
    return d;
}

int BarrierDomain::dimension() const {
    return static_cast<int>(shape == DomainShape::half_space ? normal.size() : center.size());
}

double BarrierDomain::distance(std::span<const double> x) const {
    if (shape == DomainShape::half_space) return std::max(0.0, dot(x, normal));
    double r2 = 0.0;
    for (std::size_t a = 0; a < x.size(); ++a) r2 += (x[a] - center[a]) * (x[a] - center[a]);
    return std::max(0.0, radius - std::sqrt(r2));
}

Vector BarrierDomain::inward_normal(std::span<const double> x) const {
    if (shape == DomainShape::half_space) return normal;
    Vector v(x.size());
    for (std::size_t a = 0; a < x.size(); ++a) v[a] = center[a] - x[a];
    const double len = norm(v);
    if (!(len > 0.0)) throw InvalidInput("normal undefined at the ball centre");
    for (double& c : v) c /= len;
    return v;
}

std::string to_string(BarrierVerdict v) {
    switch (v) {
        case BarrierVerdict::supersolution_confirmed: return "supersolution-confirmed";
        case BarrierVerdict::subsolution_confirmed: return "subsolution-confirmed";
        case BarrierVerdict::inconclusive: return "inconclusive";
    }
    return "unknown";
}

double barrier_tail(const BarrierDomain& domain, const DiscreteOperator& op, double kappa,
                    std::span<const double> x) {
    if (domain.shape == DomainShape::ball) return 0.0;
    const Grid& g = op.grid();
    if (g.dimension() == 1) {
        const double xe = x[0] * domain.normal[0];
        return power_tail_correction(op, kappa, xe);
    }
    const double edge = g.R() + 0.5 * g.h();
    const double p = dot(x, domain.normal);
    if (!(p > 0.0)) throw InvalidInput("tail requested outside the half-space");
    const double ex = domain.normal[0], ey = domain.normal[1];
    const KernelSpec& kernel = op.kernel();
    auto integrand = [&](double theta) {
        const double c = std::cos(theta), s = std::sin(theta);
        const double r0 = exit_distance(x[0], x[1], c, s, edge);
        return kernel(theta) * ray_tail(p, c * ex + s * ey, r0, kappa);
    };
    std::vector<double> cuts = {0.0, 2.0 * std::numbers::pi};
    auto add = [&](double a) {
        a = std::fmod(a, 2.0 * std::numbers::pi);
        if (a < 0.0) a += 2.0 * std::numbers::pi;
        cuts.push_back(a);
    };
    for (double cx : {edge, -edge}) {
        for (double cy : {edge, -edge}) add(std::atan2(cy - x[1], cx - x[0]));
    }
    const double base = std::atan2(ey, ex);
    add(base + 0.5 * std::numbers::pi);
    add(base - 0.5 * std::numbers::pi);
    for (double a : kernel.breakpoints()) add(a);
    std::sort(cuts.begin(), cuts.end());
    double total = 0.0;
    for (std::size_t k = 0; k + 1 < cuts.size(); ++k) {
        if (cuts[k + 1] - cuts[k] < 1e-14) continue;
        total += boost::math::quadrature::gauss_kronrod<double, 31>::integrate(integrand, cuts[k], cuts[k + 1], 6,
                                                                               1e-10);
    }
    return total;
}

BarrierReport barrier_sign_report(const BarrierDomain& domain, const DiscreteOperator& op, double kappa,
                                  const BarrierOptions& options) {
    const auto samples = band_values(domain, op, kappa, options);
    BarrierReport rep;
    rep.kappa = kappa;
    rep.nodes_tested = samples.size();
    rep.threshold_min = std::numeric_limits<double>::infinity();
    rep.threshold_max = -std::numeric_limits<double>::infinity();
    rep.min_value = rep.min_normalized = std::numeric_limits<double>::infinity();
    rep.max_value = rep.max_normalized = -std::numeric_limits<double>::infinity();
    double sum = 0.0;
    std::vector<double> ld, lv;
    bool loggable = true;
    for (const auto& s : samples) {
        const double nv = s.value / std::pow(s.distance, kappa - 1.0);
        rep.threshold_min = std::min(rep.threshold_min, s.threshold);
        rep.threshold_max = std::max(rep.threshold_max, s.threshold);
        rep.min_value = std::min(rep.min_value, s.value);
        rep.max_value = std::max(rep.max_value, s.value);
        rep.min_normalized = std::min(rep.min_normalized, nv);
        rep.max_normalized = std::max(rep.max_normalized, nv);
        sum += nv;
        if (s.value == 0.0) loggable = false;
        ld.push_back(std::log(s.distance));
        lv.push_back(std::log(std::abs(s.value)));
    }
    rep.mean_normalized = sum / static_cast<double>(samples.size());
    if (loggable && samples.size() >= 2) {
        double mx = 0.0, my = 0.0;
        for (std::size_t k = 0; k < ld.size(); ++k) {
            mx += ld[k];
            my += lv[k];
        }
        mx /= static_cast<double>(ld.size());
        my /= static_cast<double>(ld.size());
        double sxx = 0.0, sxy = 0.0;
        for (std::size_t k = 0; k < ld.size(); ++k) {
            sxx += (ld[k] - mx) * (ld[k] - mx);
            sxy += (ld[k] - mx) * (lv[k] - my);
        }
        if (sxx > 0.0) rep.decay_slope = sxy / sxx;
    }

    // A kappa exactly one margin away counts as decided.
    const double edge = options.margin - 1e-12;
    if (kappa <= rep.threshold_min - edge) {
        rep.expected = BarrierVerdict::supersolution_confirmed;
    } else if (kappa >= rep.threshold_max + edge) {
        rep.expected = BarrierVerdict::subsolution_confirmed;
    }
    const bool near = kappa > rep.threshold_min - edge && kappa < rep.threshold_max + edge;
    if (!near && rep.min_value > 0.0) {
        rep.verdict = BarrierVerdict::supersolution_confirmed;
    } else if (!near && rep.max_value < 0.0) {
        rep.verdict = BarrierVerdict::subsolution_confirmed;
    }
    return rep;
}

BarrierReport barrier_sign_report(const BarrierDomain& domain, const KernelSpec& kernel, std::span<const double> b,
                                  double kappa, const Grid& grid, const BarrierOptions& options) {
    const auto op = build_operator(grid, kernel, Vector(b.begin(), b.end()));
    return barrier_sign_report(domain, op, kappa, options);
}

ThresholdScan threshold_scan(const BarrierDomain& domain, const DiscreteOperator& op, const std::vector<double>& kappas,
                             const BarrierOptions& options, double tolerance) {
    if (kappas.size() < 2) throw InvalidInput("threshold scan needs at least two kappa values");
    std::vector<double> ks = kappas;
    std::sort(ks.begin(), ks.end());
    auto mean_at = [&](double k) { return band_mean(band_values(domain, op, k, options), k); };

    std::vector<double> values(ks.size());
    const unsigned workers = std::max(1u, std::min<unsigned>(options.workers, static_cast<unsigned>(ks.size())));
    if (workers == 1) {
        for (std::size_t k = 0; k < ks.size(); ++k) values[k] = mean_at(ks[k]);
    } else {
        std::vector<std::exception_ptr> errors(workers);
        {
            std::vector<std::jthread> pool;
            for (unsigned t = 0; t < workers; ++t) {
                pool.emplace_back([&, t] {
                    try {
                        for (std::size_t k = t; k < ks.size(); k += workers) values[k] = mean_at(ks[k]);
                    } catch (...) {
                        errors[t] = std::current_exception();
                    }
                });
            }
        }
        for (auto& e : errors) {
            if (e) std::rethrow_exception(e);
        }
    }

    ThresholdScan scan;
    scan.predicted = domain.shape == DomainShape::half_space ? tilde_gamma(op.kernel(), op.drift(), domain.normal)
                                                             : std::numeric_limits<double>::quiet_NaN();
    for (std::size_t k = 0; k < ks.size(); ++k) scan.evaluations.emplace_back(ks[k], values[k]);
    std::size_t at = ks.size();
    for (std::size_t k = 0; k + 1 < ks.size(); ++k) {
        if ((values[k] > 0.0) != (values[k + 1] > 0.0)) {
            at = k;
            break;
        }
    }
    if (at == ks.size()) throw AnalysisError("all scanned kappa values give the same sign: scan range too narrow");
    double lo = ks[at], hi = ks[at + 1];
    double flo = values[at], fhi = values[at + 1];
    while (hi - lo > tolerance) {
        const double mid = 0.5 * (lo + hi);
        const double fm = mean_at(mid);
        scan.evaluations.emplace_back(mid, fm);
        if ((fm > 0.0) == (flo > 0.0)) {
            lo = mid;
            flo = fm;
        } else {
            hi = mid;
            fhi = fm;
        }
    }
    scan.estimate = flo != fhi ? lo + (hi - lo) * flo / (flo - fhi) : 0.5 * (lo + hi);
    return scan;
}

}  // namespace driftfb
