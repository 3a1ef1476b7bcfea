#include "driftfb/report.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <ctime>
#include <fstream>
#include <sstream>

#include "driftfb/errors.hpp"
#include "json.hpp"

#ifndef DRIFTFB_VERSION
#define DRIFTFB_VERSION "0.0.0"
#endif

namespace driftfb {

namespace {

std::string real(double v) {
    if (!std::isfinite(v)) return std::isnan(v) ? "" : (v > 0 ? "inf" : "-inf");
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

std::string short_real(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.4g", v);
    return buf;
}

std::string utc_timestamp() {
    const auto now = std::chrono::system_clock::now();
    const std::time_t t = std::chrono::system_clock::to_time_t(now);
    std::tm tm{};
    gmtime_r(&t, &tm);
    char buf[32];
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

std::string escape_xml(const std::string& s) {
    std::string out;
    for (char c : s) {
        switch (c) {
            case '<': out += "&lt;"; break;
            case '>': out += "&gt;"; break;
            case '&': out += "&amp;"; break;
            case '"': out += "&quot;"; break;
            default: out += c;
        }
    }
    return out;
}

}  // namespace

void Table::add(std::vector<Cell> row) {
    if (row.size() != columns.size()) throw InvalidInput("table '" + name + "': row width does not match the header");
    rows.push_back(std::move(row));
}

std::string csv_field(const Cell& cell) {
    std::string s;
    if (const auto* str = std::get_if<std::string>(&cell)) s = *str;
    else if (const auto* d = std::get_if<double>(&cell)) s = real(*d);
    else if (const auto* i = std::get_if<std::int64_t>(&cell)) s = std::to_string(*i);
    else if (const auto* b = std::get_if<bool>(&cell)) s = *b ? "true" : "false";
    if (s.find_first_of(",\"\r\n") == std::string::npos) return s;
    std::string q = "\"";
    for (char c : s) {
        if (c == '"') q += '"';
        q += c;
    }
    return q + "\"";
}

std::string to_csv(const Table& table) {
    std::string out;
    for (std::size_t i = 0; i < table.columns.size(); ++i) {
        out += (i ? "," : "") + csv_field(table.columns[i]);
    }
    out += "\n";
    for (const auto& row : table.rows) {
        for (std::size_t i = 0; i < row.size(); ++i) out += (i ? "," : "") + csv_field(row[i]);
        out += "\n";
    }
    return out;
}

int exit_code(RunStatus s) {
    switch (s) {
        case RunStatus::pass: return 0;
        case RunStatus::check_failed: return 1;
        case RunStatus::config_error: return 2;
        case RunStatus::not_converged: return 3;
        case RunStatus::analysis_error: return 4;
    }
    return 4;
}

std::string to_string(RunStatus s) {
    switch (s) {
        case RunStatus::pass: return "pass";
        case RunStatus::check_failed: return "check-failed";
        case RunStatus::config_error: return "config-error";
        case RunStatus::not_converged: return "not-converged";
        case RunStatus::analysis_error: return "analysis-error";
    }
    return "unknown";
}

Check& RunReport::check(std::string name, double value, std::string relation, double threshold, std::string detail) {
    bool pass = false;
    if (relation == "<=") pass = value <= threshold;
    else if (relation == "<") pass = value < threshold;
    else if (relation == ">=") pass = value >= threshold;
    else if (relation == ">") pass = value > threshold;
    else if (relation == "==") pass = value == threshold;
    else throw InvalidInput("unknown check relation " + relation);
    checks.push_back({std::move(name), value, threshold, std::move(relation), pass, std::move(detail)});
    if (!pass) raise(RunStatus::check_failed);
    return checks.back();
}

Table& RunReport::table(const std::string& name, std::vector<std::string> columns) {
    for (auto& t : tables) {
        if (t.name == name) return t;
    }
    tables.push_back({name, std::move(columns), {}});
    return tables.back();
}

const Table* RunReport::find_table(const std::string& name) const {
    for (const auto& t : tables) {
        if (t.name == name) return &t;
    }
    return nullptr;
}

bool RunReport::all_checks_pass() const {
    return std::all_of(checks.begin(), checks.end(), [](const Check& c) { return c.pass; });
}

void RunReport::raise(RunStatus s) {
    auto rank = [](RunStatus r) {
        switch (r) {
            case RunStatus::pass: return 0;
            case RunStatus::check_failed: return 1;
            case RunStatus::analysis_error: return 2;
            case RunStatus::not_converged: return 3;
            case RunStatus::config_error: return 4;
        }
        return 0;
    };
    if (rank(s) > rank(status)) status = s;
}

std::vector<std::filesystem::path> write_report(const RunReport& report, const std::filesystem::path& dir,
                                                const WriteOptions& options) {
    std::filesystem::create_directories(dir);
    std::vector<std::filesystem::path> written;
    auto write = [&](const std::string& file, const std::string& body) {
        const auto path = dir / file;
        std::ofstream out(path, std::ios::binary);
        if (!out) throw Error("cannot write " + path.string());
        out << body;
        written.push_back(path);
    };
    for (const auto& t : report.tables) write(t.name + ".csv", to_csv(t));

    Table checks{"checks", {"check", "value", "relation", "threshold", "pass", "detail"}, {}};
    for (const auto& c : report.checks) checks.add({c.name, c.value, c.relation, c.threshold, c.pass, c.detail});
    write("checks.csv", to_csv(checks));

    if (options.plots) {
        for (const auto& p : report.plots) write(p.name + ".svg", p.svg);
    }

    nlohmann::ordered_json m;
    m["scenario"] = report.scenario;
    m["name"] = report.name;
    m["status"] = to_string(report.status);
    m["exit_code"] = exit_code(report.status);
    if (!report.error.empty()) m["error"] = report.error;
    m["config"] = report.config;
    m["versions"] = {{"driftfb", DRIFTFB_VERSION},
                     {"compiler", __VERSION__},
                     {"cxx_standard", static_cast<long>(__cplusplus)},
                     {"json", std::to_string(NLOHMANN_JSON_VERSION_MAJOR) + "." +
                                  std::to_string(NLOHMANN_JSON_VERSION_MINOR) + "." +
                                  std::to_string(NLOHMANN_JSON_VERSION_PATCH)}};
    m["timestamp_utc"] = utc_timestamp();
    m["timings_s"] = report.timings;
    auto& cj = m["checks"] = nlohmann::json::array();
    for (const auto& c : report.checks) {
        cj.push_back({{"name", c.name},
                      {"value", std::isfinite(c.value) ? nlohmann::json(c.value) : nlohmann::json()},
                      {"relation", c.relation},
                      {"threshold", c.threshold},
                      {"pass", c.pass},
                      {"detail", c.detail}});
    }
    m["notes"] = report.notes;
    auto& tj = m["tables"] = nlohmann::json::object();
    for (const auto& t : report.tables) {
        tj[t.name] = {{"file", t.name + ".csv"}, {"columns", t.columns}, {"rows", t.rows.size()}};
    }
    std::vector<std::string> files;
    for (const auto& p : written) files.push_back(p.filename().string());
    files.push_back("manifest.json");
    m["files"] = files;
    write("manifest.json", m.dump(2) + "\n");
    return written;
}

std::string line_chart_svg(const std::string& title, const std::vector<Series>& series, bool log_x, bool log_y) {
    const double W = 640, H = 420, L = 70, Rm = 20, T = 40, B = 50;
    auto tx = [&](double v) { return log_x ? std::log10(v) : v; };
    auto ty = [&](double v) { return log_y ? std::log10(v) : v; };
    double x0 = 1e300, x1 = -1e300, y0 = 1e300, y1 = -1e300;
    for (const auto& s : series) {
        for (std::size_t i = 0; i < s.x.size(); ++i) {
            const double a = tx(s.x[i]), b = ty(s.y[i]);
            if (!std::isfinite(a) || !std::isfinite(b)) continue;
            x0 = std::min(x0, a), x1 = std::max(x1, a), y0 = std::min(y0, b), y1 = std::max(y1, b);
        }
    }
    if (!(x1 > x0)) x0 -= 1, x1 += 1;
    if (!(y1 > y0)) y0 -= 1, y1 += 1;
    const double pad = 0.05 * (y1 - y0);
    y0 -= pad, y1 += pad;
    auto px = [&](double a) { return L + (a - x0) / (x1 - x0) * (W - L - Rm); };
    auto py = [&](double b) { return H - B - (b - y0) / (y1 - y0) * (H - T - B); };
    static const char* colours[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b"};
    std::ostringstream o;
    o << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << W << "\" height=\"" << H << "\">\n";
    o << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
    o << "<text x=\"" << W / 2 << "\" y=\"24\" text-anchor=\"middle\" font-size=\"15\">" << escape_xml(title)
      << "</text>\n";
    o << "<rect x=\"" << L << "\" y=\"" << T << "\" width=\"" << W - L - Rm << "\" height=\"" << H - T - B
      << "\" fill=\"none\" stroke=\"black\"/>\n";
    for (int k = 0; k <= 4; ++k) {
        const double a = x0 + k * (x1 - x0) / 4, b = y0 + k * (y1 - y0) / 4;
        o << "<text x=\"" << px(a) << "\" y=\"" << H - B + 18 << "\" text-anchor=\"middle\" font-size=\"11\">"
          << (log_x ? "1e" + short_real(a) : short_real(a)) << "</text>\n";
        o << "<text x=\"" << L - 6 << "\" y=\"" << py(b) + 4 << "\" text-anchor=\"end\" font-size=\"11\">"
          << (log_y ? "1e" + short_real(b) : short_real(b)) << "</text>\n";
    }
    for (std::size_t k = 0; k < series.size(); ++k) {
        const auto& s = series[k];
        const char* col = colours[k % 6];
        o << "<polyline fill=\"none\" stroke=\"" << col << "\" stroke-width=\"1.5\" points=\"";
        for (std::size_t i = 0; i < s.x.size(); ++i) {
            const double a = tx(s.x[i]), b = ty(s.y[i]);
            if (std::isfinite(a) && std::isfinite(b)) o << px(a) << "," << py(b) << " ";
        }
        o << "\"/>\n";
        if (s.markers) {
            for (std::size_t i = 0; i < s.x.size(); ++i) {
                const double a = tx(s.x[i]), b = ty(s.y[i]);
                if (std::isfinite(a) && std::isfinite(b)) {
                    o << "<circle cx=\"" << px(a) << "\" cy=\"" << py(b) << "\" r=\"3\" fill=\"" << col << "\"/>\n";
                }
            }
        }
        o << "<text x=\"" << L + 10 << "\" y=\"" << T + 16 + 15 * k << "\" font-size=\"12\" fill=\"" << col << "\">"
          << escape_xml(s.label) << "</text>\n";
    }
    o << "</svg>\n";
    return o.str();
}

std::string mask_svg(const std::string& title, const std::vector<std::uint8_t>& mask, int n, int max_cells) {
    const int stride = std::max(1, (n + max_cells - 1) / max_cells);
    const int m = (n + stride - 1) / stride;
    const double size = 512.0 / m;
    std::ostringstream o;
    o << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"540\" height=\"560\">\n";
    o << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
    o << "<text x=\"270\" y=\"24\" text-anchor=\"middle\" font-size=\"15\">" << escape_xml(title) << "</text>\n";
    o << "<rect x=\"14\" y=\"34\" width=\"512\" height=\"512\" fill=\"none\" stroke=\"black\"/>\n";
    for (int J = 0; J < m; ++J) {
        for (int I = 0; I < m; ++I) {
            bool any = false;
            for (int j = J * stride; j < std::min(n, (J + 1) * stride) && !any; ++j) {
                for (int i = I * stride; i < std::min(n, (I + 1) * stride); ++i) {
                    if (mask[static_cast<std::size_t>(j) * n + i]) {
                        any = true;
                        break;
                    }
                }
            }
            if (!any) continue;
            o << "<rect x=\"" << 14 + I * size << "\" y=\"" << 34 + (m - 1 - J) * size << "\" width=\"" << size
              << "\" height=\"" << size << "\" fill=\"#1f77b4\"/>\n";
        }
    }
    o << "</svg>\n";
    return o.str();
}

}  // namespace driftfb
