#pragma once

// Flat `key = value` configuration files with dotted sections.
//
//   # comment
//   scenario = solve
//   grid.h = 2^-10
//   [obstacle]          # prefixes the following keys with "obstacle."
//   center = [0, 0]

#include <cstddef>
#include <filesystem>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "driftfb/barrier.hpp"
#include "driftfb/free_boundary.hpp"

namespace driftfb {

class ConfigFile {
public:
    static ConfigFile parse(std::string_view text, const std::string& origin = "<config>");
    static ConfigFile load(const std::filesystem::path& path);

    bool has(const std::string& key) const;
    std::string text(const std::string& key) const;
    std::string text(const std::string& key, const std::string& fallback) const;
    double number(const std::string& key) const;
    double number(const std::string& key, double fallback) const;
    long integer(const std::string& key, long fallback) const;
    bool flag(const std::string& key, bool fallback) const;
    // "[1, 2]" or a single value
    std::vector<double> numbers(const std::string& key) const;
    std::vector<double> numbers(const std::string& key, const std::vector<double>& fallback) const;

    // Keys present in the file but never read.
    std::vector<std::string> unused() const;
    const std::map<std::string, std::string>& entries() const { return values_; }
    const std::string& origin() const { return origin_; }

private:
    std::string origin_;
    std::map<std::string, std::string> values_;
    std::map<std::string, int> lines_;
    mutable std::set<std::string> used_;

    const std::string& raw(const std::string& key) const;
    [[noreturn]] void fail(const std::string& key, const std::string& why) const;
};

// Parses a real, accepting the shorthand a^b (e.g. 2^-10).
std::optional<double> parse_real(std::string_view s);

enum class Scenario { solve, sweep_drift, verify_identity, chi, barrier, convergence };

Scenario parse_scenario(const std::string& name);
std::string to_string(Scenario s);

enum class IdentityMode { oracle, roots, extension };
enum class ConvergenceKind { fit, consistency };

struct ExperimentConfig {
    Scenario scenario = Scenario::solve;
    std::string name;
    unsigned long seed = 1;

    int dimension = 1;
    double h = 1.0 / 64;
    double R = 8.0;

    std::string kernel_kind = "fractional";
    std::optional<KernelSpec> kernel;  // built during validation

    Vector drift;
    Vector direction;             // sweeps scale this unit vector
    std::vector<double> sweep;    // scalar drifts
    DriftScheme scheme = DriftScheme::upwind;

    ObstacleSpec obstacle;

    SolverParams solver;

    AnalysisOptions analysis;
    bool fit = true;
    std::vector<double> exponent_tolerance;  // one per sweep member, or one for all
    double sum_rule_tolerance = 0.08;
    int sample_normals = 0;   // 2-D: points picked at equispaced normal angles, 0 = all
    int min_passing = -1;     // -1 = every checked point
    bool a_priori = true;
    bool nondegeneracy = false;
    bool regularity = false;
    double regularity_max_ratio = 1.5;
    double symmetry_tolerance = 0.02;
    double residual_tolerance = 1e-10;

    IdentityMode identity_mode = IdentityMode::oracle;
    std::vector<double> identity_beta;
    std::vector<double> identity_x;
    double identity_b = 0.0;
    double identity_precision = 1e-10;
    double identity_tolerance = 1e-7;
    std::string identity_reference = "stated";  // stated | normalized
    double roots_min = -10.0, roots_max = 10.0;
    int roots_count = 101;
    double root_tolerance = 1e-10;
    double multiplier_tolerance = 1e-12;
    double extension_r = 1.0;
    int extension_n_theta = 2048;

    std::vector<int> chi_dimensions;
    int chi_directions = 16;
    std::optional<double> chi_expected;
    double chi_tolerance = 1e-8;
    bool chi_normalization = false;
    double normalization_tolerance = 1e-10;

    DomainShape barrier_shape = DomainShape::half_space;
    Vector barrier_normal;
    Vector barrier_center;
    double barrier_radius = 1.0;
    double barrier_band = 0.0;  // absolute; 0 means barrier_band_h cells
    double barrier_band_h = 64.0;
    std::vector<double> barrier_kappa;
    std::vector<double> barrier_scan;
    double scan_tolerance = 1e-4;
    double threshold_tolerance = 0.02;
    std::vector<double> decay_kappa;  // offsets from the predicted threshold
    double decay_tolerance = 0.1;
    BarrierOptions barrier;

    ConvergenceKind convergence_kind = ConvergenceKind::fit;
    int levels = 3;
    double max_change = 0.03;
    bool truncation = false;
    double truncation_tolerance = 0.01;
    std::vector<double> beta;  // consistency profiles; empty = gamma(b)
    double window_lo = 0.25, window_hi = 1.0;
    double max_error = 5e-2;
    int check_level = 0;  // level whose error is held to max_error

    std::map<std::string, std::string> echo;  // raw key/values for the manifest

    Grid grid() const { return Grid(dimension, h, R); }
    // scalar * direction
    Vector drift_for(double scalar) const;
};

// Typed, range-checked configuration; throws ConfigError before any heavy work.
ExperimentConfig load_experiment_config(const ConfigFile& file);
ExperimentConfig load_experiment_config(const std::filesystem::path& path);

}  // namespace driftfb
