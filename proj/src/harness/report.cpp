#include "ftbsc/harness/report.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "ftbsc/ecosyslite/csv_io.hpp"

namespace ftbsc::harness {

namespace {

std::string num(double v) { return std::isnan(v) ? std::string() : eco::format_decimal(v); }

std::string clean(std::string s) {
    for (char& c : s) {
        if (c == ',') c = ';';
        if (c == '\n' || c == '\r') c = ' ';
    }
    return s;
}

std::vector<std::string> split_fields(const std::string& line) {
    std::vector<std::string> out;
    std::string field;
    std::istringstream in(line);
    while (std::getline(in, field, ',')) out.push_back(field);
    if (!line.empty() && line.back() == ',') out.emplace_back();
    return out;
}

double parse_double(const std::string& s, std::size_t line) {
    if (s.empty()) return kNaN;
    double v = 0.0;
    const auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc() || p != s.data() + s.size()) {
        throw std::runtime_error("report.csv line " + std::to_string(line) + ": bad number '" + s + "'");
    }
    return v;
}

template <class T>
T parse_uint(const std::string& s, std::size_t line) {
    T v = 0;
    const auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc() || p != s.data() + s.size()) {
        throw std::runtime_error("report.csv line " + std::to_string(line) + ": bad integer '" + s + "'");
    }
    return v;
}

}  // namespace

void write_report_csv(std::ostream& out, const std::vector<CellResult>& cells) {
    out << kReportHeader << '\n';
    for (const auto& c : cells) {
        out << c.experiment << ',' << c.regime.label() << ',' << c.regime.train_region << ',' << c.regime.test_region
            << ',' << c.setting << ',' << c.seed << ',' << (c.ok() ? "ok" : "failed") << ',' << num(c.val_mse) << ','
            << num(c.delta_pct) << ',' << num(c.train.l_pred) << ',' << num(c.train.l_phys) << ','
            << num(c.train.l_prox) << ',' << num(c.train.l_calib) << ',' << num(c.train.total) << ',' << c.best_epoch
            << ',' << c.steps << ',' << c.artifact << ',' << clean(c.error) << '\n';
    }
}

std::vector<CellResult> read_report_csv(std::istream& in) {
    std::string line;
    if (!std::getline(in, line) || line != kReportHeader) throw std::runtime_error("report.csv: unexpected header");
    std::vector<CellResult> cells;
    std::size_t lineno = 1;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) continue;
        const auto f = split_fields(line);
        if (f.size() != 18) {
            throw std::runtime_error("report.csv line " + std::to_string(lineno) + ": expected 18 fields, got " +
                                     std::to_string(f.size()));
        }
        CellResult c;
        c.experiment = f[0];
        try {
            c.regime = parse_regime(f[1], f[2], f[3]);
        } catch (const std::invalid_argument& e) {
            throw std::runtime_error("report.csv line " + std::to_string(lineno) + ": " + e.what());
        }
        c.setting = f[4];
        c.seed = parse_uint<std::uint64_t>(f[5], lineno);
        c.val_mse = parse_double(f[7], lineno);
        c.delta_pct = parse_double(f[8], lineno);
        c.train.l_pred = parse_double(f[9], lineno);
        c.train.l_phys = parse_double(f[10], lineno);
        c.train.l_prox = parse_double(f[11], lineno);
        c.train.l_calib = parse_double(f[12], lineno);
        c.train.total = parse_double(f[13], lineno);
        c.best_epoch = parse_uint<std::size_t>(f[14], lineno);
        c.steps = parse_uint<std::uint64_t>(f[15], lineno);
        c.artifact = f[16];
        c.error = f[17];
        if (f[6] == "failed" && c.error.empty()) c.error = "failed";
        if (f[6] != "ok" && f[6] != "failed") {
            throw std::runtime_error("report.csv line " + std::to_string(lineno) + ": bad status '" + f[6] + "'");
        }
        cells.push_back(std::move(c));
    }
    return cells;
}

void write_heatmap_csv(std::ostream& out, const std::vector<CellResult>& cells) {
    std::vector<std::string> regions;
    for (const auto& c : cells) {
        if (c.experiment == "matrix" && c.regime.kind == RegimeKind::SiteOnly) regions.push_back(c.regime.test_region);
    }
    auto value = [&](RegimeKind kind, const std::string& train, const std::string& test) -> std::string {
        for (const auto& c : cells) {
            if (c.experiment == "matrix" && c.regime.kind == kind && c.regime.train_region == train &&
                c.regime.test_region == test) {
                return c.ok() ? num(c.val_mse) : std::string();
            }
        }
        return {};
    };
    out << "train";
    for (const auto& r : regions) out << ',' << r;
    out << '\n';
    for (const auto& a : regions) {
        out << a;
        for (const auto& b : regions) {
            out << ',' << value(a == b ? RegimeKind::SiteOnly : RegimeKind::CrossRegional, a, b);
        }
        out << '\n';
    }
    out << "global";
    for (const auto& b : regions) out << ',' << value(RegimeKind::GlobalOnly, "all", b);
    out << '\n';
}

void write_gains_csv(std::ostream& out, const std::vector<GainRow>& gains) {
    out << "seed,region,train_site_years,mse_scratch,mse_ftbsc,delta_mse,delta_pct\n";
    for (const auto& g : gains) {
        out << g.seed << ',' << g.region << ',' << g.train_site_years << ',' << num(g.mse_scratch) << ','
            << num(g.mse_ftbsc) << ',' << num(g.delta_mse) << ',' << num(g.delta_pct) << '\n';
    }
}

void write_sensitivity_csv(std::ostream& out, const std::vector<SensitivityRow>& rows) {
    out << "region";
    if (!rows.empty()) {
        for (const auto& s : rows.front().settings) out << ",mse_" << s;
    }
    out << ",spread,regime_gap,all_finite,spread_below_gap\n";
    for (const auto& r : rows) {
        out << r.region;
        for (double m : r.mse) out << ',' << num(m);
        out << ',' << num(r.spread) << ',' << num(r.regime_gap) << ',' << (r.all_finite ? "true" : "false") << ','
            << (r.spread_below_gap ? "true" : "false") << '\n';
    }
}

std::string read_text(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open " + path.string());
    std::ostringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

void write_text(const std::filesystem::path& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write " + path.string());
    out << text;
    if (!out) throw std::runtime_error("write failure on " + path.string());
}

namespace {

template <class F>
std::string to_string(F&& write) {
    std::ostringstream out;
    write(out);
    return out.str();
}

bool has_experiment(const ExperimentReport& r, const char* name) {
    return std::any_of(r.cells.begin(), r.cells.end(), [&](const CellResult& c) { return c.experiment == name; });
}

}  // namespace

void write_report_dir(const std::filesystem::path& dir, const ExperimentReport& report) {
    std::filesystem::create_directories(dir);
    write_text(dir / "report.csv", to_string([&](std::ostream& o) { write_report_csv(o, report.cells); }));
    write_text(dir / "report_meta.json", report.meta.dump(1) + "\n");
    nlohmann::json run{{"runtime_seconds", report.runtime_seconds},
                       {"cells", report.cells.size()},
                       {"failures", report.failures()}};
    write_text(dir / "run_meta.json", run.dump(1) + "\n");
    for (const auto& a : report.artifacts) {
        write_text(dir / ("trace_" + a.id + ".csv"), to_string([&](std::ostream& o) { a.trace.write_csv(o); }));
        kgml::write_checkpoint(a.checkpoint, dir / ("checkpoint_" + a.id + ".json"));
    }
    if (has_experiment(report, "matrix")) {
        write_text(dir / "heatmap.csv", to_string([&](std::ostream& o) { write_heatmap_csv(o, report.cells); }));
    }
    if (has_experiment(report, "pretrain_vs_scratch")) {
        write_text(dir / "pretrain_vs_scratch.csv",
                   to_string([&](std::ostream& o) { write_gains_csv(o, pretrain_gains(report)); }));
    }
    if (has_experiment(report, "sensitivity")) {
        write_text(dir / "sensitivity.csv",
                   to_string([&](std::ostream& o) { write_sensitivity_csv(o, sensitivity_summary(report)); }));
    }
}

void write_resolved_config(const std::filesystem::path& dir, const RunConfig& cfg) {
    std::filesystem::create_directories(dir);
    write_text(dir / "config.resolved.json", config_to_json(cfg).dump(1) + "\n");
}

std::vector<CellResult> regenerate_heatmap(const std::filesystem::path& dir) {
    std::istringstream in(read_text(dir / "report.csv"));
    auto cells = read_report_csv(in);
    write_text(dir / "heatmap.csv", to_string([&](std::ostream& o) { write_heatmap_csv(o, cells); }));
    return cells;
}

}  // namespace ftbsc::harness
