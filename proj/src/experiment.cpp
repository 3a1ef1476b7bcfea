#include "driftfb/experiment.hpp"

#include <algorithm>
#include <array>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <mutex>
#include <numbers>
#include <random>
#include <sstream>
#include <thread>

#include "driftfb/analytic_profiles.hpp"
#include "driftfb/errors.hpp"

namespace driftfb {

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t) { return std::chrono::duration<double>(Clock::now() - t).count(); }

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

RunReport start_report(const ExperimentConfig& c) {
    RunReport r;
    r.scenario = to_string(c.scenario);
    r.name = c.name;
    r.config = c.echo;
    return r;
}

std::string side_label(const FreeBoundaryPoint& p) { return p.normal[0] > 0.0 ? "nu=+1" : "nu=-1"; }

double angle_of(const FreeBoundaryPoint& p) { return std::atan2(p.normal.size() > 1 ? p.normal[1] : 0.0, p.normal[0]); }

// Runs fn(k) for k in [0, count) on up to `workers` threads; exceptions are
// rethrown in index order after all threads finish.
template <class F>
void parallel_for(std::size_t count, unsigned workers, F&& fn) {
    workers = std::max(1u, std::min<unsigned>(workers, static_cast<unsigned>(std::max<std::size_t>(count, 1))));
    std::vector<std::exception_ptr> errors(count);
    if (workers == 1) {
        for (std::size_t k = 0; k < count; ++k) {
            try {
                fn(k);
            } catch (...) {
                errors[k] = std::current_exception();
            }
        }
    } else {
        std::mutex m;
        std::size_t next = 0;
        std::vector<std::jthread> pool;
        for (unsigned t = 0; t < workers; ++t) {
            pool.emplace_back([&] {
                for (;;) {
                    std::size_t k;
                    {
                        std::lock_guard lock(m);
                        if (next >= count) return;
                        k = next++;
                    }
                    try {
                        fn(k);
                    } catch (...) {
                        errors[k] = std::current_exception();
                    }
                }
            });
        }
    }
    for (auto& e : errors) {
        if (e) std::rethrow_exception(e);
    }
}

void add_fb_table(RunReport& report, const std::string& name, const MemberRun& m) {
    const int dim = m.problem->grid.dimension();
    std::vector<std::string> cols{"point_id", "x"};
    if (dim == 2) cols.push_back("y");
    cols.push_back("nu_x");
    if (dim == 2) cols.push_back("nu_y");
    for (const char* c : {"fitted_exponent", "fitted_c0", "r2", "predicted_exponent", "deviation", "classification"}) {
        cols.push_back(c);
    }
    Table& t = report.table(name, cols);
    for (std::size_t i = 0; i < m.points.size(); ++i) {
        const auto& p = m.points[i];
        std::vector<Cell> row{static_cast<std::int64_t>(i), p.location[0]};
        if (dim == 2) row.push_back(p.location[1]);
        row.push_back(p.normal[0]);
        if (dim == 2) row.push_back(p.normal[1]);
        row.insert(row.end(), {p.fitted_exponent, p.fitted_c0, p.r2, p.predicted_exponent, p.deviation,
                               to_string(p.classification)});
        t.add(std::move(row));
    }
}

void add_residual_rows(RunReport& report, const MemberRun& m, bool with_scalar) {
    std::vector<std::string> cols;
    if (with_scalar) cols.push_back("b");
    cols.insert(cols.end(), {"h", "R", "metric", "value"});
    Table& t = report.table("residuals", cols);
    auto row = [&](const std::string& metric, Cell v) {
        std::vector<Cell> r;
        if (with_scalar) r.push_back(m.scalar);
        r.insert(r.end(), {m.h, m.R, metric, v});
        t.add(std::move(r));
    };
    if (!m.solution) return;
    const auto& s = *m.solution;
    row("converged", s.converged);
    row("method", s.method);
    row("iterations", static_cast<std::int64_t>(s.iterations));
    std::int64_t contact = 0;
    for (auto c : s.contact_mask) contact += c;
    row("contact_nodes", contact);
    row("complementarity", m.residual.complementarity);
    row("negative_operator", m.residual.negative_operator);
    row("noncontact_operator", m.residual.noncontact_operator);
    row("negative_gap", m.residual.negative_gap);
    if (m.apriori) {
        const auto& a = *m.apriori;
        row("max_u", a.max_u);
        row("max_phi", a.max_phi);
        row("min_u", a.min_u);
        row("lip_u", a.lip_u);
        row("lip_phi", a.lip_phi);
        row("min_second_difference_u", a.min_second_difference_u);
        row("c11_phi", a.c11_phi);
        row("semiconvexity_slack", a.semiconvexity_slack);
        row("apriori_window", a.window);
    }
}

// Solver property and a-priori checks shared by every solving scenario.
void solver_checks(RunReport& report, const ExperimentConfig& c, const MemberRun& m, const std::string& tag) {
    if (!m.solution) return;
    report.check(tag + "converged", m.solution->converged ? 1.0 : 0.0, "==", 1.0);
    report.check(tag + "complementarity", m.residual.complementarity, "<=", c.residual_tolerance);
    report.check(tag + "u_minus_phi_min", -m.residual.negative_gap, ">=", -1e-12);
    if (c.a_priori && m.apriori) {
        const auto& a = *m.apriori;
        report.check(tag + "max_u_minus_max_phi", a.max_u - a.max_phi, "<=", 1e-8);
        report.check(tag + "lipschitz_ratio", a.lip_phi > 0.0 ? a.lip_u / a.lip_phi : 0.0, "<=", 1.05,
                     "inner window |x| <= " + csv_field(a.window));
        report.check(tag + "min_second_difference", a.min_second_difference_u, ">=",
                     -a.c11_phi - a.semiconvexity_slack);
    }
}

double tolerance_for(const ExperimentConfig& c, std::size_t member) {
    if (c.exponent_tolerance.empty()) return kNaN;
    return c.exponent_tolerance.size() == 1 ? c.exponent_tolerance[0] : c.exponent_tolerance[member];
}

std::string fmt(double v) {
    std::ostringstream o;
    o << v;
    return o.str();
}

void exponent_checks(RunReport& report, const ExperimentConfig& c, const MemberRun& m, double tol,
                     const std::string& tag) {
    if (!c.fit || !m.solution || !m.solution->converged) return;
    const int dim = m.problem->grid.dimension();
    if (dim == 1) {
        if (m.points.size() == 2) {
            report.check(tag + "sum_rule", std::abs(sum_rule_residual(m.points[0], m.points[1])), "<=",
                         c.sum_rule_tolerance);
        }
        if (std::isfinite(tol)) {
            for (const auto& p : m.points) {
                report.check(tag + "deviation[" + side_label(p) + "]", std::abs(p.deviation), "<=", tol,
                             "fitted " + fmt(p.fitted_exponent) + ", predicted " + fmt(p.predicted_exponent));
            }
        }
        return;
    }
    if (!std::isfinite(tol)) return;
    std::size_t ok = 0;
    for (std::size_t i : m.sampled) ok += std::abs(m.points[i].deviation) <= tol;
    const double need = c.min_passing >= 0 ? c.min_passing : static_cast<double>(m.sampled.size());
    report.check(tag + "sampled_normals_within_tolerance", static_cast<double>(ok), ">=", need,
                 std::to_string(m.sampled.size()) + " sampled, tolerance " + fmt(tol));
}

Plot profile_plot(const MemberRun& m, const std::string& name) {
    const Grid& g = m.problem->grid;
    Series u{"u", {}, {}, false}, phi{"phi", {}, {}, false};
    const int stride = std::max(1, g.n() / 2048);
    for (int i = 0; i < g.n(); i += stride) {
        const double x = g.coord(i);
        if (std::abs(x) > 2.0) continue;
        u.x.push_back(x), u.y.push_back(m.solution->u.values[i]);
        phi.x.push_back(x), phi.y.push_back(m.problem->obstacle.values[i]);
    }
    return {name, line_chart_svg("u and phi", {phi, u})};
}

Plot fit_plot(const MemberRun& m, const std::string& name) {
    std::vector<Series> series;
    for (std::size_t k = 0; k < m.sampled.size() && series.size() < 6; ++k) {
        const auto& p = m.points[m.sampled[k]];
        if (!std::isfinite(p.fitted_exponent)) continue;
        std::vector<double> radii;
        for (double r = p.r_min; r <= p.r_max * (1 + 1e-12); r *= 2.0) radii.push_back(r);
        try {
            const auto f = fit_at(*m.solution, *m.problem, p.location, radii);
            series.push_back({"point " + std::to_string(m.sampled[k]) + ": p = " + fmt(p.fitted_exponent), f.radii,
                              f.sup_values, true});
        } catch (const AnalysisError&) {
        }
    }
    return {name, line_chart_svg("sup (u - phi) over B_r", series, true, true)};
}

void add_member_plots(RunReport& report, const MemberRun& m, const std::string& suffix) {
    if (!m.solution) return;
    if (m.problem->grid.dimension() == 1) {
        report.plots.push_back(profile_plot(m, "profile" + suffix));
    } else {
        report.plots.push_back(
            {"contact" + suffix, mask_svg("contact set", m.solution->contact_mask, m.problem->grid.n())});
    }
    if (!m.sampled.empty()) report.plots.push_back(fit_plot(m, "fit" + suffix));
}

void raise_member(RunReport& report, const MemberRun& m, const std::string& label) {
    if (m.status == RunStatus::pass) return;
    report.raise(m.status);
    report.notes.push_back(label + ": " + to_string(m.status) + (m.error.empty() ? "" : " (" + m.error + ")"));
    if (report.error.empty()) report.error = m.error;
}

// Nondegeneracy and regularity follow-ups on a converged member.
void member_extras(RunReport& report, const ExperimentConfig& c, const MemberRun& m, const std::string& tag,
                   unsigned workers) {
    const bool with_scalar = !tag.empty();
    if (c.nondegeneracy && m.status == RunStatus::pass) {
        const auto t0 = Clock::now();
        const auto nd = nondegeneracy_check(*m.solution, *m.problem, m.points);
        report.timings[tag + "nondegeneracy"] = seconds_since(t0);
        Table& t = report.table("nondegeneracy", {"b", "point_id", "min_ratio", "exponent", "pass"});
        for (const auto& p : nd.points) {
            t.add({m.drift[0], static_cast<std::int64_t>(p.point), p.min_ratio, p.exponent, p.pass});
        }
        report.notes.push_back(tag + "nondegeneracy: " + to_string(nd.status) + ", hypothesis max " + fmt(nd.hypothesis_max));
        report.check(tag + "nondegeneracy_pass", nd.status == NondegeneracyStatus::pass ? 1.0 : 0.0, "==", 1.0,
                     to_string(nd.status));
        double worst_ratio = std::numeric_limits<double>::infinity(), worst_exp = 0.0;
        for (const auto& p : nd.points) {
            worst_ratio = std::min(worst_ratio, p.min_ratio);
            worst_exp = std::max(worst_exp, p.exponent);
        }
        if (!nd.points.empty()) {
            report.check(tag + "nondegeneracy_min_ratio", worst_ratio, ">", 0.0);
            report.check(tag + "nondegeneracy_max_exponent", worst_exp, "<=", 2.05);
        }
    }
    if (c.regularity && m.status == RunStatus::pass) {
        ExperimentConfig fine_cfg = c;
        fine_cfg.fit = false;
        const MemberRun fine = solve_member(fine_cfg, m.drift, 0.5 * m.h, m.R, workers);
        report.timings[tag + "solve_fine"] = fine.solve_seconds;
        raise_member(report, fine, tag + "regularity fine solve");
        if (fine.solution && fine.solution->converged) {
            add_residual_rows(report, fine, with_scalar);
            solver_checks(report, c, fine, tag + "fine:");
            const auto reg = regularity_budget(*m.solution, *fine.solution, m.problem->kernel, m.drift,
                                               c.obstacle.radius, kNaN, c.regularity_max_ratio);
            Table& t = report.table("regularity", {"b", "theta", "coarse_h", "fine_h", "coarse", "fine", "ratio"});
            t.add({m.drift[0], reg.theta, m.h, 0.5 * m.h, reg.coarse, reg.fine, reg.ratio});
            report.check(tag + "regularity_ratio", reg.ratio, "<=", c.regularity_max_ratio,
                         "theta " + fmt(reg.theta));
        }
    }
}

RunReport run_solve(const ExperimentConfig& c, const RunOptions& o) {
    RunReport report = start_report(c);
    MemberRun m = solve_member(c, c.drift, c.h, c.R, o.workers);
    report.timings["solve"] = m.solve_seconds;
    report.timings["analysis"] = m.analysis_seconds;
    add_residual_rows(report, m, false);
    solver_checks(report, c, m, "");
    raise_member(report, m, "solve");
    if (m.problem && m.solution) {
        if (m.solution->note.size()) report.notes.push_back(m.solution->note);
        if (c.fit) add_fb_table(report, "fb", m);
        if (c.fit && m.problem->grid.dimension() == 2 && !m.points.empty()) {
            Table& t = report.table("fb_sampled", {"target_angle", "point_id", "normal_angle", "deviation"});
            const int n = static_cast<int>(m.sampled.size());
            for (int k = 0; k < n; ++k) {
                const auto& p = m.points[m.sampled[k]];
                const double target = c.sample_normals > 0 ? -std::numbers::pi + 2.0 * std::numbers::pi * k / n
                                                           : angle_of(p);
                t.add({target, static_cast<std::int64_t>(m.sampled[k]), angle_of(p), p.deviation});
            }
        }
        exponent_checks(report, c, m, tolerance_for(c, 0), "");
        if (m.points.empty() && m.status == RunStatus::pass) report.notes.push_back("empty contact set: no free boundary points");

        member_extras(report, c, m, "", o.workers);
        if (o.plots) add_member_plots(report, m, "");
    }
    return report;
}

RunReport run_identity(const ExperimentConfig& c) {
    RunReport report = start_report(c);
    const auto t0 = Clock::now();
    if (c.identity_mode == IdentityMode::roots) {
        Table& t = report.table("roots", {"b", "root", "gamma", "abs_diff", "multiplier_at_gamma"});
        double worst = 0.0, worst_mult = 0.0;
        for (int k = 0; k < c.roots_count; ++k) {
            const double b = c.roots_count == 1 ? c.roots_min
                                                : c.roots_min + (c.roots_max - c.roots_min) * k / (c.roots_count - 1);
            const double root = solve_exponent_root(b);
            const double g = gamma_exponent(b);
            const double mult = power_multiplier(g, b).multiplier;
            worst = std::max(worst, std::abs(root - g));
            worst_mult = std::max(worst_mult, std::abs(mult));
            t.add({b, root, g, std::abs(root - g), mult});
        }
        report.check("max_root_minus_gamma", worst, "<=", c.root_tolerance);
        report.check("max_multiplier_at_gamma", worst_mult, "<=", c.multiplier_tolerance);
    } else if (c.identity_mode == IdentityMode::extension) {
        Table& t = report.table("extension", {"beta", "b", "r", "laplace_residual", "conormal_value",
                                               "conormal_expected", "boundary_value", "max_residual"});
        double worst = 0.0;
        for (double beta : c.identity_beta) {
            const auto e = extension_identity_check(beta, c.extension_r, c.extension_n_theta, c.identity_b);
            t.add({beta, c.identity_b, c.extension_r, e.laplace_residual, e.conormal_value, e.conormal_expected,
                   e.boundary_value, e.max_residual});
            worst = std::max(worst, e.max_residual);
        }
        report.check("extension_max_residual", worst, "<=", c.identity_tolerance);
    } else {
        Table& t = report.table("identity", {"beta", "x", "b", "oracle", "oracle_error", "stated", "stated_rel_diff",
                                              "normalized", "normalized_rel_diff"});
        for (double beta : c.identity_beta) {
            for (double x : c.identity_x) {
                OracleValue ov;
                try {
                    ov = half_laplacian_power_oracle(beta, x, c.identity_precision);
                } catch (const QuadratureError& e) {
                    report.raise(RunStatus::analysis_error);
                    report.error = e.what();
                    return report;
                }
                const double scale = beta * std::pow(x, beta - 1.0);
                const double value = ov.value + c.identity_b * scale;  // drift term is exact
                const double stated = power_multiplier(beta, c.identity_b).multiplier * std::pow(x, beta - 1.0);
                const double normalized = power_image_coefficient(beta, c.identity_b) * std::pow(x, beta - 1.0);
                const double rs = std::abs(value - stated) / std::max(std::abs(stated), scale);
                const double rn = std::abs(value - normalized) / std::max(std::abs(normalized), scale);
                t.add({beta, x, c.identity_b, value, ov.error_estimate, stated, rs, normalized, rn});
                const bool use_stated = c.identity_reference == "stated";
                report.check("identity[beta=" + fmt(beta) + ",x=" + fmt(x) + "]", use_stated ? rs : rn, "<=",
                             c.identity_tolerance,
                             "oracle " + fmt(value) + " vs " + (use_stated ? "stated " : "normalized ") +
                                 fmt(use_stated ? stated : normalized));
            }
        }
    }
    report.timings["identity"] = seconds_since(t0);
    return report;
}

RunReport run_chi(const ExperimentConfig& c) {
    RunReport report = start_report(c);
    const auto t0 = Clock::now();
    std::mt19937_64 rng(c.seed);
    std::normal_distribution<double> gauss(0.0, 1.0);
    Table& t = report.table("chi", {"dim", "e_x", "e_y", "chi", "quadrature_error"});
    for (int dim : c.chi_dimensions) {
        const KernelSpec kernel = c.kernel_kind == "fractional" ? KernelSpec::fractional(dim) : *c.kernel;
        double worst = 0.0;
        for (int k = 0; k < c.chi_directions; ++k) {
            Vector e(dim);
            for (double& v : e) v = gauss(rng);
            const double len = norm(e);
            for (double& v : e) v /= len;
            const auto cv = chi_with_error(kernel, e);
            t.add({static_cast<std::int64_t>(dim), e[0], dim == 2 ? Cell{e[1]} : Cell{}, cv.value, cv.quadrature_error});
            if (c.chi_expected) worst = std::max(worst, std::abs(cv.value - *c.chi_expected));
        }
        if (c.chi_expected) {
            report.check("chi_max_deviation[n=" + std::to_string(dim) + "]", worst, "<=", c.chi_tolerance);
        }
    }
    if (c.chi_normalization) {
        Table& nt = report.table("normalization", {"dim", "closed_form", "quadrature", "quadrature_error", "reference",
                                                    "quadrature_diff"});
        for (int dim : c.chi_dimensions) {
            const double reference = dim == 1 ? 1.0 / std::numbers::pi : 1.0 / (2.0 * std::numbers::pi);
            const auto q = normalization_integral_quadrature(dim);
            const double cq = 1.0 / q.value;
            nt.add({static_cast<std::int64_t>(dim), normalization_constant(dim), cq, q.error_estimate / (q.value * q.value),
                    reference, std::abs(cq - reference)});
            report.check("normalization_quadrature[n=" + std::to_string(dim) + "]", std::abs(cq - reference), "<=",
                         c.normalization_tolerance);
            report.check("normalization_closed_form[n=" + std::to_string(dim) + "]",
                         std::abs(normalization_constant(dim) - reference), "<=", c.normalization_tolerance);
        }
    }
    report.timings["chi"] = seconds_since(t0);
    return report;
}

BarrierDomain make_domain(const ExperimentConfig& c) {
    const double band = c.barrier_band > 0.0 ? c.barrier_band : c.barrier_band_h * c.h;
    return c.barrier_shape == DomainShape::half_space ? BarrierDomain::half_space(c.barrier_normal, band)
                                                      : BarrierDomain::ball(c.barrier_center, c.barrier_radius, band);
}

RunReport run_barrier(const ExperimentConfig& c, const RunOptions& o) {
    RunReport report = start_report(c);
    const auto t0 = Clock::now();
    const Grid grid = c.grid();
    BarrierDomain domain;
    try {
        domain = make_domain(c);
    } catch (const InvalidInput& e) {
        throw ConfigError(e.what());
    }
    BarrierOptions opts = c.barrier;
    opts.workers = o.workers;
    std::vector<double> scalars = c.sweep;
    const bool swept = !scalars.empty();
    if (!swept) scalars = {kNaN};

    Table& signs = report.table("barrier", {"b_x", "b_y", "kappa", "verdict", "expected", "threshold_min",
                                            "threshold_max", "min_normalized", "max_normalized", "mean_normalized",
                                            "decay_slope", "nodes"});
    auto drift_cells = [&](const Vector& b) {
        return std::vector<Cell>{b[0], b.size() > 1 ? Cell{b[1]} : Cell{}};
    };
    for (double s : scalars) {
        const Vector b = swept ? c.drift_for(s) : c.drift;
        const auto op = build_operator(grid, *c.kernel, b, c.scheme);
        const std::string tag = "[b=" + fmt(b[0]) + (b.size() > 1 ? "," + fmt(b[1]) : "") + "]";
        for (double kappa : c.barrier_kappa) {
            const auto r = barrier_sign_report(domain, op, kappa, opts);
            auto row = drift_cells(b);
            row.insert(row.end(), {kappa, to_string(r.verdict), to_string(r.expected), r.threshold_min,
                                   r.threshold_max, r.min_normalized, r.max_normalized, r.mean_normalized,
                                   r.decay_slope, static_cast<std::int64_t>(r.nodes_tested)});
            signs.add(std::move(row));
            if (r.expected != BarrierVerdict::inconclusive) {
                report.check("verdict" + tag + "[kappa=" + fmt(kappa) + "]", r.verdict == r.expected ? 1.0 : 0.0,
                             "==", 1.0, to_string(r.verdict) + " vs expected " + to_string(r.expected));
            }
        }
        if (c.barrier_scan.empty()) continue;
        const auto scan = threshold_scan(domain, op, c.barrier_scan, opts, c.scan_tolerance);
        Table& th = report.table("threshold", {"b_x", "b_y", "estimate", "predicted", "error", "evaluations"});
        auto row = drift_cells(b);
        row.insert(row.end(), {scan.estimate, scan.predicted, scan.estimate - scan.predicted,
                               static_cast<std::int64_t>(scan.evaluations.size())});
        th.add(std::move(row));
        report.check("threshold" + tag, std::abs(scan.estimate - scan.predicted), "<=", c.threshold_tolerance,
                     "estimate " + fmt(scan.estimate) + ", predicted " + fmt(scan.predicted));
        Table& ev = report.table("threshold_evaluations", {"b_x", "b_y", "kappa", "band_mean"});
        for (const auto& [k, v] : scan.evaluations) {
            auto er = drift_cells(b);
            er.insert(er.end(), {k, v});
            ev.add(std::move(er));
        }
        for (double offset : c.decay_kappa) {
            const double kappa = scan.predicted + offset;
            if (!(kappa > 0.0 && kappa < 1.0)) {
                report.notes.push_back("decay offset " + fmt(offset) + " leaves (0, 1) for " + tag);
                continue;
            }
            const auto r = barrier_sign_report(domain, op, kappa, opts);
            Table& dt = report.table("decay", {"b_x", "b_y", "kappa", "decay_slope", "expected_slope"});
            auto dr = drift_cells(b);
            dr.insert(dr.end(), {kappa, r.decay_slope, kappa - 1.0});
            dt.add(std::move(dr));
            report.check("decay_slope" + tag + "[kappa=" + fmt(kappa) + "]", std::abs(r.decay_slope - (kappa - 1.0)),
                         "<=", c.decay_tolerance);
        }
        if (o.plots) {
            Series s{"band mean", {}, {}, true};
            for (const auto& [k, v] : scan.evaluations) s.x.push_back(k), s.y.push_back(v);
            report.plots.push_back({"threshold" + std::to_string(report.plots.size()),
                                    line_chart_svg("band mean of A d^kappa / d^(kappa-1), b " + tag, {s})});
        }
    }
    report.timings["barrier"] = seconds_since(t0);
    return report;
}

RunReport run_consistency(const ExperimentConfig& c) {
    RunReport report = start_report(c);
    const auto t0 = Clock::now();
    if (c.dimension != 1) throw ConfigError("consistency studies run in one dimension");
    std::vector<double> scalars = c.sweep.empty() ? std::vector<double>{c.drift[0]} : c.sweep;
    Table& t = report.table("consistency", {"b", "beta", "level", "h", "max_abs_error", "scale", "relative_error",
                                            "order"});
    for (double b : scalars) {
        std::vector<double> betas = c.beta.empty() ? std::vector<double>{gamma_exponent(b)} : c.beta;
        for (double beta : betas) {
            const auto conv = consistency_convergence(*c.kernel, beta, b, c.h, c.R, c.window_lo, c.window_hi, c.levels,
                                                      c.scheme);
            for (std::size_t l = 0; l < conv.levels.size(); ++l) {
                const auto& L = conv.levels[l];
                t.add({b, beta, static_cast<std::int64_t>(l), L.h, L.max_abs_error, L.scale, L.relative_error,
                       l < conv.orders.size() ? Cell{conv.orders[l]} : Cell{}});
            }
            const std::string tag = "[b=" + fmt(b) + ",beta=" + fmt(beta) + "]";
            report.check("relative_error" + tag + "[h=" + fmt(conv.levels[c.check_level].h) + "]",
                         conv.levels[c.check_level].relative_error, "<=", c.max_error);
            for (std::size_t l = 0; l + 1 < conv.levels.size(); ++l) {
                report.check("error_decreases" + tag + "[level " + std::to_string(l) + "->" + std::to_string(l + 1) + "]",
                             conv.levels[l + 1].relative_error, "<", conv.levels[l].relative_error);
            }
        }
    }
    report.timings["consistency"] = seconds_since(t0);
    return report;
}

// Matches FB points across runs: by side in 1-D, by nearest normal angle in 2-D.
const FreeBoundaryPoint* match(const MemberRun& m, const FreeBoundaryPoint& p) {
    const FreeBoundaryPoint* best = nullptr;
    double d = 1e9;
    for (const auto& q : m.points) {
        double e = std::abs(std::remainder(angle_of(q) - angle_of(p), 2.0 * std::numbers::pi));
        if (e < d) d = e, best = &q;
    }
    return best;
}

}  // namespace

std::filesystem::path default_output_dir() {
    if (const char* env = std::getenv("DRIFTFB_OUT"); env && *env) return env;
    return "driftfb-out";
}

std::vector<std::size_t> sample_by_normal(const std::vector<FreeBoundaryPoint>& points, int count) {
    std::vector<std::size_t> out;
    if (count <= 0) {
        for (std::size_t i = 0; i < points.size(); ++i) out.push_back(i);
        return out;
    }
    for (int k = 0; k < count; ++k) {
        const double target = -std::numbers::pi + 2.0 * std::numbers::pi * k / count;
        std::size_t best = points.size();
        double d = 1e9;
        for (std::size_t i = 0; i < points.size(); ++i) {
            const double e = std::abs(std::remainder(angle_of(points[i]) - target, 2.0 * std::numbers::pi));
            if (e < d) d = e, best = i;
        }
        if (best < points.size() && std::find(out.begin(), out.end(), best) == out.end()) out.push_back(best);
    }
    return out;
}

MemberRun solve_member(const ExperimentConfig& c, const Vector& drift, double h, double R, unsigned workers) {
    MemberRun m;
    m.drift = drift;
    m.h = h;
    m.R = R;
    m.scalar = kNaN;
    const Grid grid(c.dimension, h, R);
    try {
        m.problem = ProblemSpec::synthetic(grid, *c.kernel, drift, c.obstacle);
    } catch (const InvalidInput& e) {
        throw ConfigError(e.what());
    }
    const auto op = build_operator(grid, *c.kernel, drift, c.scheme);
    auto t0 = Clock::now();
    try {
        m.solution = solve(*m.problem, op, c.solver);
    } catch (const SolverError& e) {
        m.solve_seconds = seconds_since(t0);
        m.status = RunStatus::not_converged;
        m.error = e.what();
        return m;
    }
    m.solve_seconds = seconds_since(t0);
    m.residual = residuals(*m.solution, op, *m.problem);
    if (!m.solution->converged) {
        m.status = RunStatus::not_converged;
        m.error = "solver stopped after " + std::to_string(m.solution->iterations) + " iterations";
        return m;
    }
    if (c.a_priori) m.apriori = a_priori_checks(*m.solution, *m.problem);
    const bool any_contact = std::any_of(m.solution->contact_mask.begin(), m.solution->contact_mask.end(),
                                         [](std::uint8_t v) { return v != 0; });
    if (!c.fit || !any_contact) return m;
    t0 = Clock::now();
    try {
        AnalysisOptions a = c.analysis;
        a.workers = workers;
        m.points = analyze_free_boundary(*m.solution, *m.problem, a);
        m.sampled = sample_by_normal(m.points, c.dimension == 2 ? c.sample_normals : 0);
    } catch (const AnalysisError& e) {
        m.status = RunStatus::analysis_error;
        m.error = e.what();
    }
    m.analysis_seconds = seconds_since(t0);
    return m;
}

RunReport sweep_drift(const ExperimentConfig& c, const RunOptions& o) {
    if (c.dimension != 1 || c.sweep.empty()) throw ConfigError("sweep-drift needs a 1-D grid and drift.sweep");
    RunReport report = start_report(c);
    const auto t0 = Clock::now();
    std::vector<MemberRun> members(c.sweep.size());
    const unsigned member_workers = std::max(1u, std::min<unsigned>(o.workers, static_cast<unsigned>(members.size())));
    parallel_for(members.size(), member_workers, [&](std::size_t k) {
        try {
            members[k] = solve_member(c, c.drift_for(c.sweep[k]), c.h, c.R, 1);
        } catch (const ConfigError&) {
            throw;
        } catch (const std::exception& e) {
            members[k].status = RunStatus::analysis_error;
            members[k].error = e.what();
        }
        members[k].scalar = c.sweep[k];
    });
    report.timings["sweep"] = seconds_since(t0);

    Table& sweep = report.table("sweep", {"b", "side", "fitted", "predicted", "deviation"});
    Table& status = report.table("members", {"b", "status", "error", "points"});
    for (std::size_t k = 0; k < members.size(); ++k) {
        const auto& m = members[k];
        status.add({m.scalar, to_string(m.status), m.error, static_cast<std::int64_t>(m.points.size())});
        raise_member(report, m, "member b=" + fmt(m.scalar));
        for (const auto& p : m.points) sweep.add({m.scalar, side_label(p), p.fitted_exponent, p.predicted_exponent, p.deviation});
        add_residual_rows(report, m, true);
        solver_checks(report, c, m, "b=" + fmt(m.scalar) + ":");
        if (m.status == RunStatus::pass) {
            exponent_checks(report, c, m, tolerance_for(c, k), "b=" + fmt(m.scalar) + ":");
            member_extras(report, c, m, "b=" + fmt(m.scalar) + ":", 1);
        }
        if (o.plots && m.problem) add_member_plots(report, m, "_b" + std::to_string(k));
    }

    // monotone in b per side, over members with two fitted points
    std::vector<std::pair<double, std::array<double, 2>>> fits;
    for (const auto& m : members) {
        if (m.status != RunStatus::pass || m.points.size() != 2) continue;
        fits.push_back({m.scalar, {m.points[0].fitted_exponent, m.points[1].fitted_exponent}});
    }
    std::sort(fits.begin(), fits.end(), [](const auto& a, const auto& b) { return a.first < b.first; });
    if (fits.size() >= 2) {
        double worst_minus = -1e9, worst_plus = -1e9;
        for (std::size_t k = 0; k + 1 < fits.size(); ++k) {
            worst_minus = std::max(worst_minus, fits[k + 1].second[0] - fits[k].second[0]);
            worst_plus = std::max(worst_plus, fits[k].second[1] - fits[k + 1].second[1]);
        }
        report.check("monotone[nu=-1 decreasing in b]", worst_minus, "<", 0.0);
        report.check("monotone[nu=+1 increasing in b]", worst_plus, "<", 0.0);
    }
    // b and -b swap sides
    for (const auto& a : fits) {
        for (const auto& b : fits) {
            if (!(a.first > 0.0) || b.first != -a.first) continue;
            const double d = std::max(std::abs(a.second[0] - b.second[1]), std::abs(a.second[1] - b.second[0]));
            report.check("reflection[b=+-" + fmt(a.first) + "]", d, "<=", c.symmetry_tolerance);
        }
    }
    if (o.plots && !fits.empty()) {
        Series minus{"nu=-1", {}, {}, true}, plus{"nu=+1", {}, {}, true}, pm{"predicted nu=-1", {}, {}, false},
            pp{"predicted nu=+1", {}, {}, false};
        for (const auto& f : fits) {
            minus.x.push_back(f.first), minus.y.push_back(f.second[0]);
            plus.x.push_back(f.first), plus.y.push_back(f.second[1]);
            pm.x.push_back(f.first), pm.y.push_back(1.0 + gamma_exponent(-f.first));
            pp.x.push_back(f.first), pp.y.push_back(1.0 + gamma_exponent(f.first));
        }
        report.plots.push_back({"sweep", line_chart_svg("fitted exponent against b", {minus, plus, pm, pp})});
    }
    return report;
}

RunReport convergence_study(const ExperimentConfig& c, const RunOptions& o) {
    if (c.convergence_kind == ConvergenceKind::consistency) return run_consistency(c);
    RunReport report = start_report(c);
    std::vector<std::size_t> sizes;
    for (int l = 0; l < c.levels; ++l) {
        const Grid g(c.dimension, std::ldexp(c.h, -l), c.R);
        if (g.size() > kMaxNodes) throw ConfigError("convergence level exceeds the 2^22 node guardrail");
    }
    std::vector<double> scalars = c.sweep;
    const bool swept = !scalars.empty();
    if (!swept) scalars = {kNaN};
    const auto t0 = Clock::now();
    Table& t = report.table("convergence", {"b", "level", "h", "R", "nodes", "point", "normal_angle", "fitted",
                                            "predicted", "deviation", "complementarity", "iterations"});
    for (double s : scalars) {
        const Vector b = swept ? c.drift_for(s) : c.drift;
        const double label = b[0];
        std::vector<MemberRun> levels;
        for (int l = 0; l < c.levels; ++l) {
            levels.push_back(solve_member(c, b, std::ldexp(c.h, -l), c.R, o.workers));
        }
        std::optional<MemberRun> wide;
        if (c.truncation) wide = solve_member(c, b, c.h, 2.0 * c.R, o.workers);
        auto emit = [&](const MemberRun& m, std::int64_t level) {
            const auto nodes = static_cast<std::int64_t>(Grid(c.dimension, m.h, m.R).size());
            const std::int64_t iters = m.solution ? m.solution->iterations : 0;
            if (m.points.empty()) {
                t.add({label, level, m.h, m.R, nodes, "", Cell{}, Cell{}, Cell{}, Cell{}, m.residual.complementarity, iters});
            }
            for (std::size_t i = 0; i < m.points.size(); ++i) {
                const auto& p = m.points[i];
                t.add({label, level, m.h, m.R, nodes, c.dimension == 1 ? side_label(p) : std::to_string(i), angle_of(p),
                       p.fitted_exponent, p.predicted_exponent, p.deviation, m.residual.complementarity, iters});
            }
        };
        for (std::size_t l = 0; l < levels.size(); ++l) {
            emit(levels[l], static_cast<std::int64_t>(l));
            raise_member(report, levels[l], "level " + std::to_string(l));
            solver_checks(report, c, levels[l], "b=" + fmt(label) + ",h=" + fmt(levels[l].h) + ":");
        }
        if (wide) {
            emit(*wide, -1);
            raise_member(report, *wide, "truncation run");
            solver_checks(report, c, *wide, "b=" + fmt(label) + ",R=" + fmt(wide->R) + ":");
        }
        const bool trivial = std::all_of(levels.begin(), levels.end(), [](const MemberRun& m) { return m.points.empty(); });
        if (trivial) {
            double top = 0.0;
            for (const auto& m : levels) {
                if (m.solution) {
                    for (double v : m.solution->u.values) top = std::max(top, std::abs(v));
                }
            }
            report.check("b=" + fmt(label) + ":trivial_max_abs_u", top, "==", 0.0);
            continue;
        }
        for (std::size_t l = 0; l + 1 < levels.size(); ++l) {
            const auto& coarse = levels[l];
            const auto& fine = levels[l + 1];
            for (std::size_t i : coarse.sampled) {
                const auto& p = coarse.points[i];
                const auto* q = match(fine, p);
                const double d = q ? std::abs(q->fitted_exponent - p.fitted_exponent) : kNaN;
                const std::string where = c.dimension == 1 ? side_label(p) : "theta=" + fmt(angle_of(p));
                report.check("b=" + fmt(label) + ":refinement[" + where + "][h=" + fmt(coarse.h) + "->" + fmt(fine.h) + "]",
                             d, "<=", c.max_change);
            }
        }
        if (wide) {
            for (std::size_t i : levels[0].sampled) {
                const auto& p = levels[0].points[i];
                const auto* q = match(*wide, p);
                const double d = q ? std::abs(q->fitted_exponent - p.fitted_exponent) : kNaN;
                const std::string where = c.dimension == 1 ? side_label(p) : "theta=" + fmt(angle_of(p));
                report.check("b=" + fmt(label) + ":truncation[" + where + "][R=" + fmt(c.R) + "->" + fmt(2 * c.R) + "]", d,
                             "<=", c.truncation_tolerance);
            }
        }
        if (o.plots) {
            std::vector<Series> series;
            for (std::size_t i : levels[0].sampled) {
                const auto& p = levels[0].points[i];
                Series sr{c.dimension == 1 ? side_label(p) : "theta=" + fmt(angle_of(p)), {}, {}, true};
                for (const auto& m : levels) {
                    if (const auto* q = match(m, p)) sr.x.push_back(m.h), sr.y.push_back(q->fitted_exponent);
                }
                series.push_back(std::move(sr));
                if (series.size() >= 6) break;
            }
            report.plots.push_back({"convergence" + std::to_string(report.plots.size()),
                                    line_chart_svg("fitted exponent against h", series, true, false)});
        }
    }
    report.timings["convergence"] = seconds_since(t0);
    return report;
}

RunReport run_scenario(const ExperimentConfig& c, const RunOptions& o) {
    const auto t0 = Clock::now();
    RunReport r;
    try {
        switch (c.scenario) {
            case Scenario::solve: r = run_solve(c, o); break;
            case Scenario::sweep_drift: r = sweep_drift(c, o); break;
            case Scenario::verify_identity: r = run_identity(c); break;
            case Scenario::chi: r = run_chi(c); break;
            case Scenario::barrier: r = run_barrier(c, o); break;
            case Scenario::convergence: r = convergence_study(c, o); break;
        }
    } catch (const AnalysisError& e) {
        r = start_report(c);
        r.raise(RunStatus::analysis_error);
        r.error = e.what();
    } catch (const SolverError& e) {
        r = start_report(c);
        r.raise(RunStatus::not_converged);
        r.error = e.what();
    } catch (const QuadratureError& e) {
        r = start_report(c);
        r.raise(RunStatus::analysis_error);
        r.error = e.what();
    }
    r.timings["total"] = seconds_since(t0);
    return r;
}

}  // namespace driftfb
