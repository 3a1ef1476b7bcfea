#include "driftfb/config.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>

#include "driftfb/errors.hpp"

namespace driftfb {

namespace {

std::string trim(std::string_view s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string_view::npos) return {};
    const auto e = s.find_last_not_of(" \t\r");
    return std::string(s.substr(b, e - b + 1));
}

std::string strip_comment(std::string_view line) {
    bool quoted = false;
    for (std::size_t i = 0; i < line.size(); ++i) {
        if (line[i] == '"') quoted = !quoted;
        if (!quoted && line[i] == '#') return std::string(line.substr(0, i));
    }
    return std::string(line);
}

std::string unquote(std::string s) {
    if (s.size() >= 2 && s.front() == '"' && s.back() == '"') return s.substr(1, s.size() - 2);
    return s;
}

std::vector<std::string> split_list(const std::string& v) {
    std::string body = v;
    if (!body.empty() && body.front() == '[') {
        if (body.back() != ']') return {};
        body = body.substr(1, body.size() - 2);
    }
    std::vector<std::string> out;
    if (trim(body).empty()) return out;
    std::stringstream ss(body);
    std::string item;
    while (std::getline(ss, item, ',')) out.push_back(trim(item));
    return out;
}

constexpr std::size_t kNodeGuard = kMaxNodes;

std::size_t node_count(int dim, double h, double R) {
    const double per_axis = std::floor(2.0 * R / h + 0.5) + 1.0;
    const double total = dim == 1 ? per_axis : per_axis * per_axis;
    return total > 1e18 ? static_cast<std::size_t>(-1) : static_cast<std::size_t>(total);
}

}  // namespace

std::optional<double> parse_real(std::string_view s) {
    const std::string t = trim(s);
    if (t.empty()) return std::nullopt;
    const auto caret = t.find('^');
    if (caret != std::string::npos) {
        const auto base = parse_real(std::string_view(t).substr(0, caret));
        const auto exp = parse_real(std::string_view(t).substr(caret + 1));
        if (!base || !exp) return std::nullopt;
        return std::pow(*base, *exp);
    }
    double v = 0.0;
    const char* first = t.data();
    const char* last = t.data() + t.size();
    if (*first == '+') ++first;
    const auto [ptr, ec] = std::from_chars(first, last, v);
    if (ec != std::errc() || ptr != last || !std::isfinite(v)) return std::nullopt;
    return v;
}

ConfigFile ConfigFile::parse(std::string_view text, const std::string& origin) {
    ConfigFile cfg;
    cfg.origin_ = origin;
    std::string section;
    std::istringstream in{std::string(text)};
    std::string line;
    int number = 0;
    while (std::getline(in, line)) {
        ++number;
        const std::string body = trim(strip_comment(line));
        if (body.empty()) continue;
        const std::string where = origin + ":" + std::to_string(number);
        if (body.front() == '[' && body.find('=') == std::string::npos) {
            if (body.back() != ']') throw ConfigError(where + ": unterminated section header");
            section = trim(body.substr(1, body.size() - 2));
            continue;
        }
        const auto eq = body.find('=');
        if (eq == std::string::npos) throw ConfigError(where + ": expected key = value");
        std::string key = trim(body.substr(0, eq));
        const std::string value = unquote(trim(body.substr(eq + 1)));
        if (key.empty()) throw ConfigError(where + ": empty key");
        if (!section.empty()) key = section + "." + key;
        if (cfg.values_.contains(key)) throw ConfigError(where + ": duplicate key '" + key + "'");
        cfg.values_[key] = value;
        cfg.lines_[key] = number;
    }
    return cfg;
}

ConfigFile ConfigFile::load(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot read config file " + path.string());
    std::stringstream ss;
    ss << in.rdbuf();
    return parse(ss.str(), path.string());
}

bool ConfigFile::has(const std::string& key) const { return values_.contains(key); }

const std::string& ConfigFile::raw(const std::string& key) const {
    const auto it = values_.find(key);
    if (it == values_.end()) throw ConfigError(origin_ + ": missing required key '" + key + "'");
    used_.insert(key);
    return it->second;
}

void ConfigFile::fail(const std::string& key, const std::string& why) const {
    const auto it = lines_.find(key);
    const std::string where = it == lines_.end() ? origin_ : origin_ + ":" + std::to_string(it->second);
    throw ConfigError(where + ": " + key + " " + why);
}

std::string ConfigFile::text(const std::string& key) const { return raw(key); }

std::string ConfigFile::text(const std::string& key, const std::string& fallback) const {
    return has(key) ? raw(key) : fallback;
}

double ConfigFile::number(const std::string& key) const {
    const auto v = parse_real(raw(key));
    if (!v) fail(key, "is not a finite number: '" + raw(key) + "'");
    return *v;
}

double ConfigFile::number(const std::string& key, double fallback) const {
    return has(key) ? number(key) : fallback;
}

long ConfigFile::integer(const std::string& key, long fallback) const {
    if (!has(key)) return fallback;
    const double v = number(key);
    if (v != std::floor(v) || std::abs(v) > 1e15) fail(key, "must be an integer");
    return static_cast<long>(v);
}

bool ConfigFile::flag(const std::string& key, bool fallback) const {
    if (!has(key)) return fallback;
    const std::string v = raw(key);
    if (v == "true" || v == "yes" || v == "1") return true;
    if (v == "false" || v == "no" || v == "0") return false;
    fail(key, "must be true or false");
}

std::vector<double> ConfigFile::numbers(const std::string& key) const {
    const std::string& v = raw(key);
    const auto items = split_list(v);
    if (items.empty() && !v.empty() && v != "[]") fail(key, "is not a list: '" + v + "'");
    std::vector<double> out;
    for (const auto& item : items) {
        const auto x = parse_real(item);
        if (!x) fail(key, "has a non-numeric entry '" + item + "'");
        out.push_back(*x);
    }
    return out;
}

std::vector<double> ConfigFile::numbers(const std::string& key, const std::vector<double>& fallback) const {
    return has(key) ? numbers(key) : fallback;
}

std::vector<std::string> ConfigFile::unused() const {
    std::vector<std::string> out;
    for (const auto& [k, v] : values_) {
        if (!used_.contains(k)) out.push_back(k);
    }
    return out;
}

Scenario parse_scenario(const std::string& name) {
    if (name == "solve") return Scenario::solve;
    if (name == "sweep-drift") return Scenario::sweep_drift;
    if (name == "verify-identity") return Scenario::verify_identity;
    if (name == "chi") return Scenario::chi;
    if (name == "barrier") return Scenario::barrier;
    if (name == "convergence") return Scenario::convergence;
    throw ConfigError("unknown scenario '" + name +
                      "' (expected solve, sweep-drift, verify-identity, chi, barrier or convergence)");
}

std::string to_string(Scenario s) {
    switch (s) {
        case Scenario::solve: return "solve";
        case Scenario::sweep_drift: return "sweep-drift";
        case Scenario::verify_identity: return "verify-identity";
        case Scenario::chi: return "chi";
        case Scenario::barrier: return "barrier";
        case Scenario::convergence: return "convergence";
    }
    return "unknown";
}

Vector ExperimentConfig::drift_for(double scalar) const {
    Vector b(direction.size());
    for (std::size_t i = 0; i < b.size(); ++i) b[i] = scalar * direction[i];
    return b;
}

ExperimentConfig load_experiment_config(const ConfigFile& f) {
    ExperimentConfig c;
    c.echo = f.entries();
    c.scenario = parse_scenario(f.text("scenario"));
    c.name = f.text("name", "");
    const long seed = f.integer("seed", 1);
    if (seed < 0) throw ConfigError("seed must be nonnegative");
    c.seed = static_cast<unsigned long>(seed);

    auto require = [&](bool ok, const std::string& what) {
        if (!ok) throw ConfigError(f.origin() + ": " + what);
    };
    auto positive_list = [&](const std::vector<double>& v, const std::string& key) {
        for (double x : v) require(x > 0.0, key + " entries must be positive");
    };

    // grid
    c.dimension = static_cast<int>(f.integer("grid.dim", 1));
    require(c.dimension == 1 || c.dimension == 2, "grid.dim must be 1 or 2");
    c.h = f.number("grid.h", c.h);
    c.R = f.number("grid.R", c.R);
    require(c.h > 0.0 && c.h <= 1.0, "grid.h must lie in (0, 1]");
    require(c.R >= 4.0, "grid.R must be at least 4");
    const double cells = c.R / c.h;
    require(std::abs(cells - std::round(cells)) <= 1e-9 * cells, "grid.R / grid.h must be an integer");

    // kernel
    c.kernel_kind = f.text("kernel.kind", "fractional");
    try {
        if (c.kernel_kind == "fractional") {
            c.kernel = KernelSpec::fractional(c.dimension);
        } else if (c.kernel_kind == "constant") {
            const double v = f.number("kernel.value");
            c.kernel = KernelSpec(c.dimension, ConstantDensity{v}, f.number("kernel.lambda", v), f.number("kernel.Lambda", v));
        } else if (c.kernel_kind == "sampled") {
            const auto values = f.numbers("kernel.values");
            require(!values.empty(), "kernel.values is empty");
            const auto [lo, hi] = std::minmax_element(values.begin(), values.end());
            c.kernel = KernelSpec(c.dimension, SampledDensity{values}, f.number("kernel.lambda", *lo),
                                  f.number("kernel.Lambda", *hi));
        } else {
            throw ConfigError("kernel.kind must be fractional, constant or sampled, got '" + c.kernel_kind + "'");
        }
    } catch (const InvalidInput& e) {
        throw ConfigError(std::string("invalid kernel: ") + e.what());
    } catch (const UnsupportedDimension& e) {
        throw ConfigError(std::string("invalid kernel: ") + e.what());
    }

    // drift
    c.drift = f.numbers("drift.b", Vector(c.dimension, 0.0));
    require(static_cast<int>(c.drift.size()) == c.dimension, "drift.b must have grid.dim entries");
    Vector e1(c.dimension, 0.0);
    e1[0] = 1.0;
    c.direction = f.numbers("drift.direction", e1);
    require(static_cast<int>(c.direction.size()) == c.dimension, "drift.direction must have grid.dim entries");
    const double len = norm(c.direction);
    require(len > 0.0, "drift.direction must be nonzero");
    for (double& v : c.direction) v /= len;
    c.sweep = f.numbers("drift.sweep", {});
    try {
        c.scheme = parse_drift_scheme(f.text("drift.scheme", "upwind"));
    } catch (const InvalidInput& e) {
        throw ConfigError(e.what());
    }

    // obstacle
    try {
        c.obstacle.family = parse_obstacle_family(f.text("obstacle.family", "bump"));
    } catch (const InvalidInput& e) {
        throw ConfigError(e.what());
    }
    c.obstacle.height = f.number("obstacle.a", 1.0);
    c.obstacle.radius = f.number("obstacle.rho", 1.0);
    c.obstacle.center = f.numbers("obstacle.center", Vector(c.dimension, 0.0));
    require(c.obstacle.radius > 0.0, "obstacle.rho must be positive");
    require(static_cast<int>(c.obstacle.center.size()) == c.dimension, "obstacle.center must have grid.dim entries");
    double reach = c.obstacle.radius;
    for (double x : c.obstacle.center) reach = std::max(reach, std::abs(x) + c.obstacle.radius);
    require(reach <= c.R / 3.0 + 1e-12, "obstacle support must stay within R/3 of the box centre");

    // solver
    c.solver.omega = f.number("solver.omega", c.solver.omega);
    c.solver.tol = f.number("solver.tol", c.solver.tol);
    c.solver.max_iter = f.integer("solver.max_iter", c.solver.max_iter);
    require(c.solver.omega > 0.0 && c.solver.omega < 2.0, "solver.omega must lie in (0, 2)");
    require(c.solver.tol > 0.0, "solver.tol must be positive");
    require(c.solver.max_iter >= 1, "solver.max_iter must be positive");
    try {
        c.solver.method = parse_solver_method(f.text("solver.method", "auto"));
    } catch (const InvalidInput& e) {
        throw ConfigError(e.what());
    }
    if (c.scenario == Scenario::solve || c.scenario == Scenario::sweep_drift || c.scenario == Scenario::convergence) {
        require(c.scheme == DriftScheme::upwind, "the solver needs drift.scheme = upwind");
    }

    // analysis
    c.fit = f.flag("analysis.fit", true);
    c.analysis.smoothing_width_h = f.number("analysis.smoothing_width_h", c.analysis.smoothing_width_h);
    c.analysis.window_r_min_h = f.number("analysis.window_r_min_h", c.analysis.window_r_min_h);
    c.analysis.window_levels = static_cast<int>(f.integer("analysis.window_levels", c.analysis.window_levels));
    c.analysis.classification_margin = f.number("analysis.margin", c.analysis.classification_margin);
    c.analysis.min_r2 = f.number("analysis.min_r2", c.analysis.min_r2);
    require(c.analysis.window_r_min_h >= 8.0, "analysis.window_r_min_h must be at least 8");
    require(c.analysis.window_levels >= 2, "analysis.window_levels must be at least 2");
    require(c.analysis.smoothing_width_h > 0.0, "analysis.smoothing_width_h must be positive");
    c.exponent_tolerance = f.numbers("analysis.exponent_tolerance", {});
    positive_list(c.exponent_tolerance, "analysis.exponent_tolerance");
    c.sum_rule_tolerance = f.number("analysis.sum_rule_tolerance", c.sum_rule_tolerance);
    c.sample_normals = static_cast<int>(f.integer("analysis.sample_normals", 0));
    c.min_passing = static_cast<int>(f.integer("analysis.min_passing", -1));
    require(c.sample_normals >= 0, "analysis.sample_normals must be nonnegative");
    c.a_priori = f.flag("analysis.a_priori", true);
    c.nondegeneracy = f.flag("analysis.nondegeneracy", false);
    c.regularity = f.flag("analysis.regularity", false);
    c.regularity_max_ratio = f.number("analysis.regularity_max_ratio", c.regularity_max_ratio);
    c.symmetry_tolerance = f.number("analysis.symmetry_tolerance", c.symmetry_tolerance);
    c.residual_tolerance = f.number("analysis.residual_tolerance", c.residual_tolerance);

    // identity
    const std::string mode = f.text("identity.mode", "oracle");
    if (mode == "oracle") c.identity_mode = IdentityMode::oracle;
    else if (mode == "roots") c.identity_mode = IdentityMode::roots;
    else if (mode == "extension") c.identity_mode = IdentityMode::extension;
    else throw ConfigError("identity.mode must be oracle, roots or extension");
    c.identity_beta = f.numbers("identity.beta", {0.25, 0.5, 0.75});
    c.identity_x = f.numbers("identity.x", {0.5, 1.0, 2.0, 4.0});
    for (double beta : c.identity_beta) require(beta > 0.0 && beta < 1.0, "identity.beta entries must lie in (0, 1)");
    positive_list(c.identity_x, "identity.x");
    c.identity_b = f.number("identity.b", 0.0);
    c.identity_precision = f.number("identity.precision", c.identity_precision);
    c.identity_tolerance = f.number("identity.tolerance", c.identity_tolerance);
    c.identity_reference = f.text("identity.reference", "stated");
    require(c.identity_reference == "stated" || c.identity_reference == "normalized",
            "identity.reference must be stated or normalized");
    c.roots_min = f.number("identity.b_min", c.roots_min);
    c.roots_max = f.number("identity.b_max", c.roots_max);
    c.roots_count = static_cast<int>(f.integer("identity.count", c.roots_count));
    require(c.roots_count >= 1 && c.roots_max >= c.roots_min, "identity root range is empty");
    c.root_tolerance = f.number("identity.root_tolerance", c.root_tolerance);
    c.multiplier_tolerance = f.number("identity.multiplier_tolerance", c.multiplier_tolerance);
    c.extension_r = f.number("identity.r", c.extension_r);
    c.extension_n_theta = static_cast<int>(f.integer("identity.n_theta", c.extension_n_theta));
    require(c.extension_r > 0.0 && c.extension_n_theta >= 4, "identity.r and identity.n_theta out of range");

    // chi
    for (double d : f.numbers("chi.dims", {static_cast<double>(c.dimension)})) {
        require(d == 1.0 || d == 2.0, "chi.dims entries must be 1 or 2");
        c.chi_dimensions.push_back(static_cast<int>(d));
    }
    c.chi_directions = static_cast<int>(f.integer("chi.directions", c.chi_directions));
    require(c.chi_directions >= 1, "chi.directions must be positive");
    if (f.has("chi.expected")) c.chi_expected = f.number("chi.expected");
    c.chi_tolerance = f.number("chi.tolerance", c.chi_tolerance);
    c.chi_normalization = f.flag("chi.normalization", false);
    c.normalization_tolerance = f.number("chi.normalization_tolerance", c.normalization_tolerance);
    if (c.scenario == Scenario::chi && c.kernel_kind != "fractional") {
        require(c.chi_dimensions.size() == 1 && c.chi_dimensions[0] == c.dimension,
                "chi.dims must equal grid.dim for a non-fractional kernel");
    }

    // barrier
    const std::string shape = f.text("barrier.shape", "half-space");
    if (shape == "half-space") c.barrier_shape = DomainShape::half_space;
    else if (shape == "ball") c.barrier_shape = DomainShape::ball;
    else throw ConfigError("barrier.shape must be half-space or ball");
    c.barrier_normal = f.numbers("barrier.normal", e1);
    c.barrier_center = f.numbers("barrier.center", Vector(c.dimension, 0.0));
    c.barrier_radius = f.number("barrier.radius", 1.0);
    require(static_cast<int>(c.barrier_normal.size()) == c.dimension && norm(c.barrier_normal) > 0.0,
            "barrier.normal must be a nonzero vector with grid.dim entries");
    require(static_cast<int>(c.barrier_center.size()) == c.dimension, "barrier.center must have grid.dim entries");
    c.barrier_band = f.number("barrier.band", 0.0);
    c.barrier_band_h = f.number("barrier.band_h", c.barrier_band_h);
    const double band = c.barrier_band > 0.0 ? c.barrier_band : c.barrier_band_h * c.h;
    require(band >= 16.0 * c.h, "barrier band must be at least 16 cells");
    c.barrier_kappa = f.numbers("barrier.kappa", {});
    c.barrier_scan = f.numbers("barrier.scan", {});
    for (double k : c.barrier_kappa) require(k > 0.0 && k < 1.0, "barrier.kappa entries must lie in (0, 1)");
    for (double k : c.barrier_scan) require(k > 0.0 && k < 1.0, "barrier.scan entries must lie in (0, 1)");
    c.scan_tolerance = f.number("barrier.scan_tolerance", c.scan_tolerance);
    c.threshold_tolerance = f.number("barrier.threshold_tolerance", c.threshold_tolerance);
    c.decay_kappa = f.numbers("barrier.decay_offsets", {});
    c.decay_tolerance = f.number("barrier.decay_tolerance", c.decay_tolerance);
    c.barrier.margin = f.number("barrier.margin", c.barrier.margin);
    c.barrier.inner_h = f.number("barrier.inner_h", c.barrier.inner_h);
    c.barrier.restrict_radius = f.number("barrier.restrict_radius", c.barrier.restrict_radius);
    require(c.barrier.margin >= 0.0 && c.barrier.inner_h >= 1.0 && c.barrier.restrict_radius > 0.0,
            "barrier margin, inner_h or restrict_radius out of range");

    // convergence
    const std::string kind = f.text("convergence.kind", "fit");
    if (kind == "fit") c.convergence_kind = ConvergenceKind::fit;
    else if (kind == "consistency") c.convergence_kind = ConvergenceKind::consistency;
    else throw ConfigError("convergence.kind must be fit or consistency");
    c.levels = static_cast<int>(f.integer("convergence.levels", c.dimension == 2 ? 2 : 3));
    require(c.levels >= 1, "convergence.levels must be positive");
    require(c.dimension == 1 || c.levels <= 2, "2-D convergence studies are limited to two levels");
    c.max_change = f.number("convergence.max_change", c.max_change);
    c.truncation = f.flag("convergence.truncation", false);
    c.truncation_tolerance = f.number("convergence.truncation_tolerance", c.truncation_tolerance);
    c.beta = f.numbers("convergence.beta", {});
    for (double beta : c.beta) require(beta > 0.0 && beta < 1.0, "convergence.beta entries must lie in (0, 1)");
    const auto window = f.numbers("convergence.window", {0.25, 1.0});
    require(window.size() == 2 && window[0] > 0.0 && window[1] > window[0], "convergence.window must be [lo, hi]");
    c.window_lo = window[0];
    c.window_hi = window[1];
    c.max_error = f.number("convergence.max_error", c.max_error);
    c.check_level = static_cast<int>(f.integer("convergence.check_level", 0));
    require(c.check_level >= 0 && c.check_level < c.levels, "convergence.check_level outside the levels");

    // scenario-specific requirements
    if (c.scenario == Scenario::sweep_drift) {
        require(c.dimension == 1, "sweep-drift runs in one dimension");
        require(!c.sweep.empty(), "sweep-drift needs drift.sweep");
    }
    if (!c.exponent_tolerance.empty() && c.exponent_tolerance.size() != 1) {
        require(c.exponent_tolerance.size() == std::max<std::size_t>(c.sweep.size(), 1),
                "analysis.exponent_tolerance needs one entry or one per sweep member");
    }
    if (c.scenario == Scenario::barrier) {
        require(!c.barrier_kappa.empty() || !c.barrier_scan.empty(), "barrier needs barrier.kappa or barrier.scan");
        require(c.decay_kappa.empty() || !c.barrier_scan.empty(), "barrier.decay_offsets needs a barrier.scan");
        if (c.barrier_shape == DomainShape::ball) {
            require(c.barrier_scan.empty(), "threshold scans are defined for half-spaces only");
        }
    }

    // node-count guardrail over every grid the scenario will touch
    std::vector<std::pair<double, double>> grids{{c.h, c.R}};
    if (c.scenario == Scenario::convergence) {
        for (int l = 1; l < c.levels; ++l) grids.emplace_back(std::ldexp(c.h, -l), c.R);
        if (c.truncation) grids.emplace_back(c.h, 2.0 * c.R);
    }
    if (c.regularity) grids.emplace_back(0.5 * c.h, c.R);
    const bool needs_grid = c.scenario != Scenario::verify_identity && c.scenario != Scenario::chi;
    if (needs_grid) {
        for (const auto& [h, R] : grids) {
            if (node_count(c.dimension, h, R) > kNodeGuard) {
                std::ostringstream msg;
                msg << "grid with h = " << h << ", R = " << R << " exceeds the 2^22 node guardrail";
                throw ConfigError(msg.str());
            }
        }
    }

    const auto unused = f.unused();
    if (!unused.empty()) {
        std::string list;
        for (const auto& k : unused) list += (list.empty() ? "" : ", ") + k;
        throw ConfigError(f.origin() + ": unknown key(s): " + list);
    }
    return c;
}

ExperimentConfig load_experiment_config(const std::filesystem::path& path) {
    return load_experiment_config(ConfigFile::load(path));
}

}  // namespace driftfb
