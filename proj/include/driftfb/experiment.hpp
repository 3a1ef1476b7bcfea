#pragma once

// Scenario pipelines: build operator, solve, analyze, report.

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "driftfb/config.hpp"
#include "driftfb/report.hpp"

namespace driftfb {

struct RunOptions {
    unsigned workers = 1;
    bool plots = false;
};

// One solve + analysis, kept for reuse by sweeps, studies and tests.
struct MemberRun {
    double scalar = 0.0;  // sweep parameter (drift multiple), NaN outside sweeps
    Vector drift;
    double h = 0.0;
    double R = 0.0;
    std::optional<ProblemSpec> problem;
    std::optional<SolutionField> solution;
    ResidualReport residual;
    std::optional<AprioriReport> apriori;
    std::vector<FreeBoundaryPoint> points;
    std::vector<std::size_t> sampled;  // indices into points used for the exponent checks
    RunStatus status = RunStatus::pass;
    std::string error;
    double solve_seconds = 0.0;
    double analysis_seconds = 0.0;
};

MemberRun solve_member(const ExperimentConfig& config, const Vector& drift, double h, double R, unsigned workers);

// Indices of the points whose normal angles are nearest to `count`
// equispaced angles (distinct points only). count = 0 selects everything.
std::vector<std::size_t> sample_by_normal(const std::vector<FreeBoundaryPoint>& points, int count);

RunReport run_scenario(const ExperimentConfig& config, const RunOptions& options = {});
RunReport sweep_drift(const ExperimentConfig& config, const RunOptions& options = {});
RunReport convergence_study(const ExperimentConfig& config, const RunOptions& options = {});

// Default output directory: $DRIFTFB_OUT, else ./driftfb-out.
std::filesystem::path default_output_dir();

}  // namespace driftfb
