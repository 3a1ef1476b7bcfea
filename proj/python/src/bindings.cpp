// Python bindings: closed forms, single solves and the scenario runner.

#include <optional>

#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "driftfb/analytic_profiles.hpp"
#include "driftfb/errors.hpp"
#include "driftfb/experiment.hpp"
#include "driftfb/free_boundary.hpp"

namespace py = pybind11;
using namespace driftfb;

namespace {

py::object cell_to_py(const Cell& c) {
    return std::visit(
        [](const auto& v) -> py::object {
            using T = std::decay_t<decltype(v)>;
            if constexpr (std::is_same_v<T, std::monostate>) return py::none();
            else return py::cast(v);
        },
        c);
}

py::dict report_to_dict(const RunReport& r) {
    py::dict d;
    d["scenario"] = r.scenario;
    d["name"] = r.name;
    d["status"] = to_string(r.status);
    d["exit_code"] = exit_code(r.status);
    d["error"] = r.error;
    d["notes"] = r.notes;
    py::list checks;
    for (const auto& c : r.checks) {
        py::dict x;
        x["name"] = c.name;
        x["value"] = c.value;
        x["relation"] = c.relation;
        x["threshold"] = c.threshold;
        x["pass"] = c.pass;
        x["detail"] = c.detail;
        checks.append(x);
    }
    d["checks"] = checks;
    py::dict tables;
    for (const auto& t : r.tables) {
        py::list rows;
        for (const auto& row : t.rows) {
            py::dict x;
            for (std::size_t i = 0; i < t.columns.size(); ++i) x[py::str(t.columns[i])] = cell_to_py(row[i]);
            rows.append(x);
        }
        tables[py::str(t.name)] = rows;
    }
    d["tables"] = tables;
    return d;
}

ExperimentConfig parse_config(const std::string& text) { return load_experiment_config(ConfigFile::parse(text)); }

}  // namespace

PYBIND11_MODULE(_core, m) {
    m.doc() = "Nonlocal obstacle problems with drift";

    py::register_exception<ConfigError>(m, "ConfigError", PyExc_ValueError);
    py::register_exception<InvalidInput>(m, "InvalidInput", PyExc_ValueError);

    m.def("gamma_exponent", &gamma_exponent, py::arg("t"));
    m.def("solve_exponent_root", &solve_exponent_root, py::arg("b"));
    m.def("power_multiplier", [](double beta, double b) { return power_multiplier(beta, b).multiplier; },
          py::arg("beta"), py::arg("b"));
    m.def("power_image_coefficient", &power_image_coefficient, py::arg("beta"), py::arg("b"));
    m.def("half_laplacian_power_oracle",
          [](double beta, double x, double precision) { return half_laplacian_power_oracle(beta, x, precision).value; },
          py::arg("beta"), py::arg("x"), py::arg("precision") = 1e-10);
    m.def("normalization_constant", &normalization_constant, py::arg("dimension"));
    m.def(
        "chi", [](int dim, const Vector& e) { return chi(KernelSpec::fractional(dim), e); }, py::arg("dimension"),
        py::arg("e"), "chi(e) for the half-Laplacian kernel");
    m.def(
        "tilde_gamma",
        [](const Vector& b, const Vector& nu) { return tilde_gamma(KernelSpec::fractional(int(b.size())), b, nu); },
        py::arg("b"), py::arg("nu"));

    m.def(
        "solve_bump",
        [](double h, double R, const Vector& b, double a, double rho, bool fit) {
            const int dim = static_cast<int>(b.size());
            ObstacleSpec o;
            o.center = Vector(b.size(), 0.0);
            o.height = a;
            o.radius = rho;
            const auto p = ProblemSpec::synthetic(Grid(dim, h, R), KernelSpec::fractional(dim), b, o);
            std::optional<SolutionField> solved;
            {
                py::gil_scoped_release release;
                solved = solve(p, build_operator(p.grid, p.kernel, p.drift));
            }
            const SolutionField& s = *solved;
            const auto side = static_cast<py::ssize_t>(p.grid.n());
            const std::vector<py::ssize_t> shape =
                dim == 2 ? std::vector<py::ssize_t>{side, side} : std::vector<py::ssize_t>{side};
            py::array_t<double> x(std::vector<py::ssize_t>{side});
            for (int i = 0; i < p.grid.n(); ++i) x.mutable_data()[i] = p.grid.coord(i);
            py::array_t<double> u(shape), phi(shape);
            py::array_t<bool> mask(shape);
            std::copy(s.u.values.begin(), s.u.values.end(), u.mutable_data());
            std::copy(p.obstacle.values.begin(), p.obstacle.values.end(), phi.mutable_data());
            for (std::size_t i = 0; i < s.contact_mask.size(); ++i) mask.mutable_data()[i] = s.contact_mask[i] != 0;
            py::dict d;
            d["x"] = x;
            d["u"] = u;
            d["phi"] = phi;
            d["contact"] = mask;
            d["converged"] = s.converged;
            d["complementarity"] = s.complementarity_residual;
            d["iterations"] = s.iterations;
            d["method"] = s.method;
            py::list pts;
            if (fit && s.converged) {
                AnalysisOptions opt;
                for (const auto& q : analyze_free_boundary(s, p, opt)) {
                    py::dict x2;
                    x2["location"] = q.location;
                    x2["normal"] = q.normal;
                    x2["fitted_exponent"] = q.fitted_exponent;
                    x2["predicted_exponent"] = q.predicted_exponent;
                    x2["deviation"] = q.deviation;
                    x2["r2"] = q.r2;
                    pts.append(x2);
                }
            }
            d["free_boundary"] = pts;
            return d;
        },
        py::arg("h"), py::arg("R"), py::arg("b"), py::arg("a") = 1.0, py::arg("rho") = 1.0, py::arg("fit") = true,
        "Solve the obstacle problem for the smooth bump and optionally fit exponents.");

    m.def(
        "run_config",
        [](const std::string& text, const std::string& out, unsigned workers) {
            const auto c = parse_config(text);
            RunReport r;
            {
                py::gil_scoped_release release;
                r = run_scenario(c, {workers, false});
                if (!out.empty()) write_report(r, out);
            }
            return report_to_dict(r);
        },
        py::arg("text"), py::arg("out") = "", py::arg("workers") = 1,
        "Run a scenario from config text; writes CSV/JSON when `out` is given.");

    m.attr("__version__") = DRIFTFB_VERSION;
}
