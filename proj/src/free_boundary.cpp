#include "driftfb/free_boundary.hpp"

#include <algorithm>
#include <cmath>
#include <thread>

#include "driftfb/errors.hpp"

namespace driftfb {

namespace {

Vector gap_of(const SolutionField& s, const ProblemSpec& p) {
    Vector d(s.u.values.size());
    for (std::size_t i = 0; i < d.size(); ++i) d[i] = std::max(0.0, s.u.values[i] - p.obstacle.values[i]);
    return d;
}

// Piecewise (bi)linear interpolation, zero outside the box.
double interpolate(const Grid& g, const Vector& v, const Vector& x) {
    const int n = g.n();
    double t[2] = {0.0, 0.0};
    int i[2] = {0, 0};
    for (int a = 0; a < g.dimension(); ++a) {
        const double s = (x[a] + g.R()) / g.h();
        if (s < 0.0 || s > n - 1) return 0.0;
        i[a] = std::min(n - 2, static_cast<int>(std::floor(s)));
        t[a] = s - i[a];
    }
    if (g.dimension() == 1) return (1.0 - t[0]) * v[i[0]] + t[0] * v[i[0] + 1];
    const double v00 = v[g.index(i[0], i[1])], v10 = v[g.index(i[0] + 1, i[1])];
    const double v01 = v[g.index(i[0], i[1] + 1)], v11 = v[g.index(i[0] + 1, i[1] + 1)];
    return (1.0 - t[1]) * ((1.0 - t[0]) * v00 + t[0] * v10) + t[1] * ((1.0 - t[0]) * v01 + t[0] * v11);
}

// sup of d over nodes in the closed ball, plus the interpolated values at
// x0 +- r nu.
double sup_ball(const Grid& g, const Vector& d, const Vector& x0, const Vector& nu, double r) {
    const int n = g.n();
    const int dim = g.dimension();
    int lo[2] = {0, 0}, hi[2] = {0, 0};
    for (int a = 0; a < dim; ++a) {
        lo[a] = std::max(0, static_cast<int>(std::ceil((x0[a] - r + g.R()) / g.h() - 1e-9)));
        hi[a] = std::min(n - 1, static_cast<int>(std::floor((x0[a] + r + g.R()) / g.h() + 1e-9)));
    }
    double best = 0.0;
    const double r2 = r * r * (1.0 + 1e-12);
    for (int j = lo[1]; j <= hi[1]; ++j) {
        const double dy = dim == 2 ? g.coord(j) - x0[1] : 0.0;
        for (int i = lo[0]; i <= hi[0]; ++i) {
            const double dx = g.coord(i) - x0[0];
            if (dx * dx + dy * dy <= r2) best = std::max(best, d[g.index(i, j)]);
        }
    }
    for (double sgn : {1.0, -1.0}) {
        Vector y = x0;
        for (int a = 0; a < dim; ++a) y[a] += sgn * r * nu[a];
        best = std::max(best, interpolate(g, d, y));
    }
    return best;
}

struct Line {
    double slope = 0.0;
    double intercept = 0.0;
    double r2 = 0.0;
};

Line least_squares(const std::vector<double>& x, const std::vector<double>& y) {
    const double m = static_cast<double>(x.size());
    double sx = 0.0, sy = 0.0;
    for (std::size_t k = 0; k < x.size(); ++k) {
        sx += x[k];
        sy += y[k];
    }
    const double mx = sx / m, my = sy / m;
    double sxx = 0.0, sxy = 0.0, syy = 0.0;
    for (std::size_t k = 0; k < x.size(); ++k) {
        sxx += (x[k] - mx) * (x[k] - mx);
        sxy += (x[k] - mx) * (y[k] - my);
        syy += (y[k] - my) * (y[k] - my);
    }
    Line l;
    l.slope = sxy / sxx;
    l.intercept = my - l.slope * mx;
    l.r2 = syy > 0.0 ? sxy * sxy / (sxx * syy) : 1.0;
    return l;
}

std::vector<double> dyadic_radii(double r_min, int levels, double cap) {
    std::vector<double> r;
    for (int k = 0; k < levels; ++k) {
        const double v = r_min * std::ldexp(1.0, k);
        if (v <= cap * (1.0 + 1e-12)) r.push_back(v);
    }
    return r;
}

Vector along(const Vector& base, const Vector& nu, double s) {
    Vector x = base;
    for (std::size_t a = 0; a < x.size(); ++a) x[a] += s * nu[a];
    return x;
}

GrowthFit fit_gap(const Grid& g, const Vector& d, const Vector& x0, const Vector& nu,
                  const std::vector<double>& radii) {
    if (radii.size() < 2) throw AnalysisError("fit window empty after constraints");
    GrowthFit f;
    f.location = x0;
    f.radii = radii;
    std::vector<double> lr, ld;
    for (double r : radii) {
        const double s = sup_ball(g, d, x0, nu, r);
        if (!(s > 0.0)) throw AnalysisError("sup of u - phi vanishes on a fit ball; point lies inside the contact set");
        f.sup_values.push_back(s);
        lr.push_back(std::log(r));
        ld.push_back(std::log(s));
    }
    const Line l = least_squares(lr, ld);
    f.exponent = l.slope;
    f.c0 = std::exp(l.intercept);
    f.r2 = l.r2;
    f.r_min = radii.front();
    f.r_max = radii.back();
    return f;
}

Vector smoothed_normal(const Grid& g, const std::vector<std::uint8_t>& mask, std::size_t node, double sigma) {
    const int reach = static_cast<int>(std::ceil(6.0 * sigma / g.h()));
    const int n = g.n();
    const int ix = g.ix(node), iy = g.iy(node);
    double vx = 0.0, vy = 0.0;
    for (int j = std::max(0, iy - reach); j <= std::min(n - 1, iy + reach); ++j) {
        for (int i = std::max(0, ix - reach); i <= std::min(n - 1, ix + reach); ++i) {
            if (!mask[g.index(i, j)]) continue;
            const double dx = (ix - i) * g.h(), dy = (iy - j) * g.h();
            const double w = std::exp(-(dx * dx + dy * dy) / (2.0 * sigma * sigma));
            vx += dx * w;
            vy += dy * w;
        }
    }
    const double len = std::hypot(vx, vy);
    if (!(len > 0.0)) throw AnalysisError("smoothed contact indicator has no gradient at a boundary node");
    return {vx / len, vy / len};
}

}  // namespace

std::string to_string(PointClass c) { return c == PointClass::regular ? "regular" : "degenerate-suspect"; }

std::string to_string(NondegeneracyStatus s) {
    switch (s) {
        case NondegeneracyStatus::pass: return "pass";
        case NondegeneracyStatus::fail: return "fail";
        case NondegeneracyStatus::hypothesis_not_met: return "hypothesis-not-met";
    }
    return "unknown";
}

std::vector<FreeBoundaryPoint> locate_free_boundary(const SolutionField& solution, const ProblemSpec& problem,
                                                    double smoothing_width_h) {
    const Grid& g = problem.grid;
    const auto& mask = solution.contact_mask;
    if (mask.size() != g.size()) throw InvalidInput("solution does not match the problem grid");
    if (std::none_of(mask.begin(), mask.end(), [](std::uint8_t m) { return m != 0; })) {
        throw AnalysisError("empty contact set: no free boundary to locate");
    }
    std::vector<FreeBoundaryPoint> out;
    const double h = g.h();
    if (g.dimension() == 1) {
        const int n = g.n();
        for (int i = 0; i < n; ++i) {
            if (!mask[i] || (i > 0 && mask[i - 1])) continue;
            int j = i;
            while (j + 1 < n && mask[j + 1]) ++j;
            for (auto [node, sgn] : {std::pair{i, -1.0}, std::pair{j, 1.0}}) {
                FreeBoundaryPoint p;
                p.anchor = static_cast<std::size_t>(node);
                p.normal = {sgn};
                p.location = {g.coord(node) + 0.5 * sgn * h};
                out.push_back(std::move(p));
            }
            i = j;
        }
        return out;
    }
    const int n = g.n();
    for (std::size_t k = 0; k < g.size(); ++k) {
        if (!mask[k]) continue;
        const int ix = g.ix(k), iy = g.iy(k);
        bool edge = false;
        for (auto [dx, dy] : {std::pair{1, 0}, std::pair{-1, 0}, std::pair{0, 1}, std::pair{0, -1}}) {
            const int jx = ix + dx, jy = iy + dy;
            if (jx < 0 || jy < 0 || jx >= n || jy >= n) continue;
            edge = edge || !mask[g.index(jx, jy)];
        }
        if (!edge) continue;
        FreeBoundaryPoint p;
        p.anchor = k;
        p.normal = smoothed_normal(g, mask, k, smoothing_width_h * h);
        p.location = along(g.point(k), p.normal, 0.5 * h);
        out.push_back(std::move(p));
    }
    return out;
}

GrowthFit fit_at(const SolutionField& solution, const ProblemSpec& problem, const Vector& x0,
                 const std::vector<double>& radii) {
    const Vector d = gap_of(solution, problem);
    return fit_gap(problem.grid, d, x0, Vector(problem.grid.dimension(), 0.0), radii);
}

GrowthFit fit_growth_exponent(const SolutionField& solution, const ProblemSpec& problem,
                              const FreeBoundaryPoint& point, const FitWindow& window) {
    const Grid& g = problem.grid;
    const double h = g.h();
    const double r_min = window.r_min > 0.0 ? window.r_min : 8.0 * h;
    if (r_min < 8.0 * h * (1.0 - 1e-12)) throw InvalidInput("fit window must start at 8h or beyond");
    const auto radii = dyadic_radii(r_min, window.levels, window.r_cap);
    const Vector d = gap_of(solution, problem);
    const Vector base = g.point(point.anchor);
    const Vector& nu = point.normal;

    std::vector<double> s_samples;
    for (int k = 2; k <= 5; ++k) s_samples.push_back(k * h);
    double s0 = 0.5 * h;
    GrowthFit fit = fit_gap(g, d, along(base, nu, s0), nu, radii);
    int it = 0;
    for (; it < 60; ++it) {
        if (!(fit.exponent > 0.0)) break;
        std::vector<double> y;
        for (double s : s_samples) y.push_back(std::pow(interpolate(g, d, along(base, nu, s)), 1.0 / fit.exponent));
        const Line l = least_squares(s_samples, y);
        if (!(l.slope > 0.0)) break;
        const double next = std::clamp(-l.intercept / l.slope, -h, 3.0 * h);
        const bool done = std::abs(next - s0) < 1e-9 * h;
        s0 = next;
        fit = fit_gap(g, d, along(base, nu, s0), nu, radii);
        if (done) break;
    }
    fit.locator_iterations = it + 1;
    return fit;
}

void compare_prediction(FreeBoundaryPoint& point, const KernelSpec& kernel, std::span<const double> b) {
    point.predicted_exponent = 1.0 + tilde_gamma(kernel, b, point.normal);
    point.deviation = point.fitted_exponent - point.predicted_exponent;
}

double sum_rule_residual(const FreeBoundaryPoint& a, const FreeBoundaryPoint& b) {
    return (a.fitted_exponent - 1.0) + (b.fitted_exponent - 1.0) - 1.0;
}

std::vector<FreeBoundaryPoint> analyze_free_boundary(const SolutionField& solution, const ProblemSpec& problem,
                                                     const AnalysisOptions& options) {
    auto points = locate_free_boundary(solution, problem, options.smoothing_width_h);
    const Grid& g = problem.grid;
    const double rho = problem.bump ? problem.bump->radius : std::numeric_limits<double>::infinity();
    const double r_min = options.window_r_min_h * g.h();

    std::vector<double> caps(points.size(), 0.5 * rho);
    for (std::size_t p = 0; p < points.size(); ++p) {
        for (std::size_t q = 0; q < points.size(); ++q) {
            if (q == p || dot(points[p].normal, points[q].normal) >= 0.0) continue;
            double dist = 0.0;
            for (int a = 0; a < g.dimension(); ++a) {
                const double diff = points[p].location[a] - points[q].location[a];
                dist += diff * diff;
            }
            caps[p] = std::min(caps[p], 0.5 * std::sqrt(dist));
        }
    }

    const Vector d = gap_of(solution, problem);
    auto work = [&](std::size_t p) {
        auto& pt = points[p];
        FitWindow w{r_min, options.window_levels, caps[p]};
        GrowthFit fit;
        try {
            fit = fit_growth_exponent(solution, problem, pt, w);
        } catch (const AnalysisError& e) {
            // one unfittable point does not void the others
            pt.note = e.what();
            compare_prediction(pt, problem.kernel, problem.drift);
            return;
        }
        pt.location = fit.location;
        pt.fitted_exponent = fit.exponent;
        pt.fitted_c0 = fit.c0;
        pt.r2 = fit.r2;
        pt.r_min = fit.r_min;
        pt.r_max = fit.r_max;
        const double top = fit.r_max * 2.0;
        const auto shifted = top <= caps[p] * (1.0 + 1e-12)
                                 ? dyadic_radii(2.0 * fit.r_min, static_cast<int>(fit.radii.size()), caps[p])
                                 : dyadic_radii(0.5 * fit.r_min, static_cast<int>(fit.radii.size()), caps[p]);
        try {
            pt.window_shift_delta = std::abs(fit_gap(g, d, pt.location, pt.normal, shifted).exponent - fit.exponent);
        } catch (const AnalysisError&) {
            pt.window_shift_delta = std::numeric_limits<double>::infinity();
        }
        pt.window_stable = pt.window_shift_delta <= 0.02;
        compare_prediction(pt, problem.kernel, problem.drift);
        const bool regular = pt.r2 >= options.min_r2 && pt.fitted_exponent < 2.0 - options.classification_margin;
        pt.classification = regular ? PointClass::regular : PointClass::degenerate_suspect;
    };

    const unsigned workers = std::max(1u, std::min<unsigned>(options.workers, static_cast<unsigned>(points.size())));
    if (workers == 1) {
        for (std::size_t p = 0; p < points.size(); ++p) work(p);
        return points;
    }
    std::vector<std::exception_ptr> errors(workers);
    {
        std::vector<std::jthread> pool;
        for (unsigned t = 0; t < workers; ++t) {
            pool.emplace_back([&, t] {
                try {
                    for (std::size_t p = t; p < points.size(); p += workers) work(p);
                } catch (...) {
                    errors[t] = std::current_exception();
                }
            });
        }
    }
    for (auto& e : errors) {
        if (e) std::rethrow_exception(e);
    }
    return points;
}

double concavity_hypothesis_max(const ProblemSpec& problem) {
    const Grid& g = problem.grid;
    const Vector& phi = problem.obstacle.values;
    const Vector& b = problem.drift;
    const int n = g.n();
    const double h2 = g.h() * g.h();
    double worst = -std::numeric_limits<double>::infinity();
    if (g.dimension() == 1) {
        for (int i = 1; i + 1 < n; ++i) {
            if (phi[i] <= 0.0) continue;
            const double dxx = (phi[i + 1] - 2.0 * phi[i] + phi[i - 1]) / h2;
            worst = std::max(worst, dxx * (1.0 + b[0] * b[0]));
        }
        return worst;
    }
    for (int j = 1; j + 1 < n; ++j) {
        for (int i = 1; i + 1 < n; ++i) {
            const std::size_t k = g.index(i, j);
            if (phi[k] <= 0.0) continue;
            const double c = phi[k];
            const double dxx = (phi[g.index(i + 1, j)] - 2.0 * c + phi[g.index(i - 1, j)]) / h2;
            const double dyy = (phi[g.index(i, j + 1)] - 2.0 * c + phi[g.index(i, j - 1)]) / h2;
            const double dxy = (phi[g.index(i + 1, j + 1)] - phi[g.index(i + 1, j - 1)] - phi[g.index(i - 1, j + 1)] +
                                phi[g.index(i - 1, j - 1)]) /
                               (4.0 * h2);
            const double dbb = b[0] * b[0] * dxx + 2.0 * b[0] * b[1] * dxy + b[1] * b[1] * dyy;
            worst = std::max(worst, dxx + dyy + dbb);
        }
    }
    return worst;
}

NondegeneracyReport nondegeneracy_check(const SolutionField& solution, const ProblemSpec& problem,
                                        const std::vector<FreeBoundaryPoint>& points, double exponent_limit) {
    NondegeneracyReport rep;
    rep.hypothesis_max = concavity_hypothesis_max(problem);
    const auto& phi = problem.obstacle.values;
    const double top = *std::max_element(phi.begin(), phi.end());
    const double slack = 64.0 * std::numeric_limits<double>::epsilon() * std::max(top, 1.0) /
                         (problem.grid.h() * problem.grid.h());
    const bool hypothesis = rep.hypothesis_max <= slack;

    const Vector d = gap_of(solution, problem);
    bool all = true;
    for (std::size_t p = 0; p < points.size(); ++p) {
        const auto& pt = points[p];
        NondegeneracyPoint v;
        v.point = p;
        v.exponent = pt.fitted_exponent;
        v.min_ratio = std::numeric_limits<double>::infinity();
        for (double r = pt.r_min; r <= pt.r_max * (1.0 + 1e-12); r *= 2.0) {
            v.min_ratio = std::min(v.min_ratio, sup_ball(problem.grid, d, pt.location, pt.normal, r) / (r * r));
        }
        v.pass = v.min_ratio > 0.0 && v.exponent <= exponent_limit;
        all = all && v.pass;
        rep.points.push_back(v);
    }
    if (!hypothesis) {
        rep.status = NondegeneracyStatus::hypothesis_not_met;
    } else {
        rep.status = all ? NondegeneracyStatus::pass : NondegeneracyStatus::fail;
    }
    return rep;
}

double holder_seminorm(const SolutionField& solution, double theta, double r_min, double r_max, double inner) {
    const Grid& g = solution.u.grid;
    const Vector& u = solution.u.values;
    const int n = g.n();
    const double h = g.h();
    if (n < 3) return 0.0;
    double best = 0.0;
    // node index range inside the inner window
    inner = std::min(inner, g.R());
    const int lo = std::max(1, static_cast<int>(std::ceil((g.R() - inner) / h - 1e-9)));
    const int hi = std::min(n - 2, static_cast<int>(std::floor((g.R() + inner) / h + 1e-9)));
    if (g.dimension() == 1) {
        const int k_lo = std::max(1, static_cast<int>(std::ceil(r_min / h - 1e-9)));
        const int k_hi = static_cast<int>(std::floor(r_max / h + 1e-9));
        Vector grad(n, 0.0);
        for (int i = 1; i + 1 < n; ++i) grad[i] = (u[i + 1] - u[i - 1]) / (2.0 * h);
        for (int k = k_lo; k <= k_hi; ++k) {
            const double w = std::pow(k * h, -theta);
            double m = 0.0;
            for (int i = lo; i + k <= hi; ++i) m = std::max(m, std::abs(grad[i + k] - grad[i]));
            best = std::max(best, m * w);
        }
        return best;
    }
    Vector gx(g.size(), 0.0), gy(g.size(), 0.0);
    for (int j = 1; j + 1 < n; ++j) {
        for (int i = 1; i + 1 < n; ++i) {
            gx[g.index(i, j)] = (u[g.index(i + 1, j)] - u[g.index(i - 1, j)]) / (2.0 * h);
            gy[g.index(i, j)] = (u[g.index(i, j + 1)] - u[g.index(i, j - 1)]) / (2.0 * h);
        }
    }
    for (auto [sx, sy] : {std::pair{1, 0}, std::pair{0, 1}, std::pair{1, 1}, std::pair{1, -1}}) {
        const double unit = std::hypot(sx, sy) * h;
        for (int k = 1; k * unit <= r_max * (1.0 + 1e-12); ++k) {
            if (k * unit < r_min * (1.0 - 1e-12)) continue;
            const double w = std::pow(k * unit, -theta);
            double m2 = 0.0;
            const int ox = k * sx, oy = k * sy;
            for (int j = std::max(lo, lo - oy); j <= std::min(hi, hi - oy); ++j) {
                for (int i = lo; i + ox <= hi; ++i) {
                    const std::size_t a = g.index(i, j), c = g.index(i + ox, j + oy);
                    const double ex = gx[c] - gx[a], ey = gy[c] - gy[a];
                    m2 = std::max(m2, ex * ex + ey * ey);
                }
            }
            best = std::max(best, std::sqrt(m2) * w);
        }
    }
    return best;
}

RegularityReport regularity_budget(const SolutionField& coarse, const SolutionField& fine, const KernelSpec& kernel,
                                   std::span<const double> b, double rho, double theta, double max_ratio) {
    RegularityReport rep;
    rep.theta = std::isnan(theta) ? min_gamma(kernel, b).gamma_minus - 0.05 : theta;
    const double inner = 0.5 * coarse.u.grid.R();
    rep.coarse = holder_seminorm(coarse, rep.theta, 8.0 * coarse.u.grid.h(), 0.5 * rho, inner);
    rep.fine = holder_seminorm(fine, rep.theta, 8.0 * fine.u.grid.h(), 0.5 * rho, inner);
    if (rep.coarse > 0.0) {
        rep.ratio = rep.fine / rep.coarse;
    } else {
        rep.ratio = rep.fine > 0.0 ? std::numeric_limits<double>::infinity() : 1.0;
    }
    rep.bounded = rep.ratio <= max_ratio;
    return rep;
}

}  // namespace driftfb
