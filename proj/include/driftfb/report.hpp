#pragma once

// In-memory run reports and their CSV / JSON / SVG persistence.

#include <cstdint>
#include <deque>
#include <filesystem>
#include <map>
#include <string>
#include <variant>
#include <vector>

namespace driftfb {

using Cell = std::variant<std::monostate, std::string, double, std::int64_t, bool>;

struct Table {
    std::string name;  // file stem
    std::vector<std::string> columns;
    std::vector<std::vector<Cell>> rows;

    void add(std::vector<Cell> row);
};

// RFC-4180: CRLF-free "\n" line ends, fields quoted when they hold a comma,
// quote or newline; reals printed with %.17g, empty cells for NaN/monostate.
std::string to_csv(const Table& table);
std::string csv_field(const Cell& cell);

struct Check {
    std::string name;
    double value = 0.0;
    double threshold = 0.0;
    std::string relation;  // "<=", ">=", "==" ...
    bool pass = false;
    std::string detail;
};

enum class RunStatus { pass, check_failed, config_error, not_converged, analysis_error };

int exit_code(RunStatus s);
std::string to_string(RunStatus s);

struct Plot {
    std::string name;  // file stem
    std::string svg;
};

struct RunReport {
    std::string scenario;
    std::string name;
    std::map<std::string, std::string> config;
    std::deque<Table> tables;  // deque: table() hands out references that must survive later tables
    std::vector<Check> checks;
    std::vector<Plot> plots;
    std::vector<std::string> notes;
    std::map<std::string, double> timings;  // seconds, manifest only
    RunStatus status = RunStatus::pass;
    std::string error;

    Check& check(std::string name, double value, std::string relation, double threshold, std::string detail = {});
    Table& table(const std::string& name, std::vector<std::string> columns);
    const Table* find_table(const std::string& name) const;
    bool all_checks_pass() const;
    // Worst status wins: config > convergence > analysis > failed checks.
    void raise(RunStatus s);
};

struct WriteOptions {
    bool plots = false;
};

// Writes <name>.csv per table, checks.csv and manifest.json (plus SVGs if
// requested). Returns the files written.
std::vector<std::filesystem::path> write_report(const RunReport& report, const std::filesystem::path& dir,
                                                const WriteOptions& options = {});

// Minimal SVG line chart: series of (x, y) polylines with optional log axes.
struct Series {
    std::string label;
    std::vector<double> x, y;
    bool markers = false;
};
std::string line_chart_svg(const std::string& title, const std::vector<Series>& series, bool log_x = false,
                           bool log_y = false);
// Contact map on a square grid, downsampled to at most `max_cells` per axis.
std::string mask_svg(const std::string& title, const std::vector<std::uint8_t>& mask, int n, int max_cells = 256);

}  // namespace driftfb
