#pragma once

#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include "ftbsc/harness/experiments.hpp"

namespace ftbsc::harness {

inline constexpr const char* kReportHeader =
    "experiment,regime,train_region,test_region,setting,seed,status,val_mse,delta_pct,"
    "train_l_pred,train_l_phys,train_l_prox,train_l_calib,train_total,best_epoch,steps,artifact,error";

/// One row per cell. Numbers use the shortest exact decimal form; NaN is an
/// empty field. Commas and line breaks in error text become ';' and ' '.
void write_report_csv(std::ostream& out, const std::vector<CellResult>& cells);
/// Throws std::runtime_error naming the line on malformed input.
std::vector<CellResult> read_report_csv(std::istream& in);

/// Train-regime x test-region MSE table of the "matrix" cells: one row per
/// SiteOnly training region (its own and cross-regional cells), then
/// "global". Regions appear in the order of the SiteOnly cells.
void write_heatmap_csv(std::ostream& out, const std::vector<CellResult>& cells);

void write_gains_csv(std::ostream& out, const std::vector<GainRow>& gains);
void write_sensitivity_csv(std::ostream& out, const std::vector<SensitivityRow>& rows);

/// Writes report.csv, report_meta.json, run_meta.json (runtime), and
/// trace_<id>.csv / checkpoint_<id>.json for every artifact, plus
/// heatmap.csv, pretrain_vs_scratch.csv or sensitivity.csv when the report
/// holds cells of that experiment.
void write_report_dir(const std::filesystem::path& dir, const ExperimentReport& report);

/// Writes config.resolved.json.
void write_resolved_config(const std::filesystem::path& dir, const RunConfig& cfg);

/// Reads report.csv from `dir` and rewrites heatmap.csv. Returns the cells.
std::vector<CellResult> regenerate_heatmap(const std::filesystem::path& dir);

std::string read_text(const std::filesystem::path& path);
void write_text(const std::filesystem::path& path, const std::string& text);

}  // namespace ftbsc::harness
