#pragma once

#include <array>
#include <cmath>
#include <limits>
#include <map>
#include <string>
#include <vector>

#include <json.hpp>

#include "ftbsc/harness/config.hpp"
#include "ftbsc/harness/data.hpp"
#include "ftbsc/kgmlnet/checkpoint.hpp"

namespace ftbsc::harness {

enum class RegimeKind { SiteOnly, GlobalOnly, CrossRegional, Ftbsc };

/// Which data a model was trained on and where it is tested.
/// SiteOnly and Ftbsc test on their training region; CrossRegional never does.
struct Regime {
    RegimeKind kind = RegimeKind::SiteOnly;
    std::string train_region;  // "all" for GlobalOnly
    std::string test_region;
    bool calibrated = false;  // Ftbsc only

    static Regime site_only(const std::string& region) { return {RegimeKind::SiteOnly, region, region, false}; }
    static Regime global_only(const std::string& test) { return {RegimeKind::GlobalOnly, "all", test, false}; }
    static Regime cross(const std::string& train, const std::string& test) {
        return {RegimeKind::CrossRegional, train, test, false};
    }
    static Regime ftbsc(const std::string& region, bool calibrated = false) {
        return {RegimeKind::Ftbsc, region, region, calibrated};
    }

    /// "site_only", "global_only", "cross_regional", "ftbsc" or "ftbsc_calib".
    std::string label() const;
    void validate() const;
    friend bool operator==(const Regime&, const Regime&) = default;
};

Regime parse_regime(const std::string& label, const std::string& train_region, const std::string& test_region);

inline constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

struct CellResult {
    std::string experiment;  // "matrix", "pretrain_vs_scratch", "sensitivity"
    Regime regime;
    std::string setting;  // sensitivity setting name
    std::uint64_t seed = 0;
    std::string error;  // empty on success
    double val_mse = kNaN;
    double delta_pct = kNaN;  // vs SiteOnly on the same test region, seed and setting
    obj::LossBreakdown train;  // training losses at the selected epoch
    std::size_t best_epoch = 0;
    std::uint64_t steps = 0;
    std::string artifact;  // id of the model this cell evaluates

    bool ok() const { return error.empty(); }
};

/// A trained model and its trace, written as trace_<id>.csv and checkpoint_<id>.json.
struct Artifact {
    std::string id;
    train::TrainTrace trace;
    kgml::Checkpoint checkpoint;
};

struct ExperimentReport {
    std::vector<CellResult> cells;
    std::vector<Artifact> artifacts;
    nlohmann::json meta = nlohmann::json::object();  // deterministic: digests, sizes, seeds
    double runtime_seconds = 0.0;

    std::size_t failures() const;
    /// First successful-or-failed cell matching all fields, or nullptr.
    const CellResult* find(const std::string& experiment, const Regime& regime, std::uint64_t seed = 0,
                           const std::string& setting = "") const;
};

/// 100 * (mse_site_only - mse) / mse_site_only.
double delta_pct(double mse_site_only, double mse);

/// Fills delta_pct on every successful cell with a matching SiteOnly cell.
void fill_deltas(ExperimentReport& report);

/// Regime matrix: SiteOnly per region, CrossRegional for every ordered pair
/// (reusing the SiteOnly models), GlobalOnly tested on every region, and
/// Ftbsc per region (with, without or both calibration variants). Cells that
/// fail are recorded and the rest continue. Needs at least two regions.
ExperimentReport run_matrix(const RunConfig& cfg, const Benchmark& data);

/// For every seed in cfg.experiment.seeds: SiteOnly scratch training and
/// Ftbsc fine-tuning on every region. Data, splits and inits follow the seed.
ExperimentReport run_pretrain_vs_scratch(const RunConfig& cfg);

/// Ftbsc and SiteOnly on every region under each sensitivity setting, fixed
/// seed. With SensitivityScope::Finetune the global model is pretrained once
/// with cfg.train and shared by every setting.
ExperimentReport run_sensitivity(const RunConfig& cfg, const Benchmark& data);

struct GainRow {
    std::uint64_t seed = 0;
    std::string region;
    std::size_t train_site_years = 0;
    double mse_scratch = kNaN;
    double mse_ftbsc = kNaN;
    double delta_mse = kNaN;
    double delta_pct = kNaN;
};
std::vector<GainRow> pretrain_gains(const ExperimentReport& report);

struct GainOrdering {
    std::uint64_t seed = 0;
    std::string smallest;
    std::string largest;
    bool all_positive = false;
    bool smallest_gains_most = false;  // delta% on smallest >= delta% on largest
};
std::vector<GainOrdering> gain_ordering(const std::vector<GainRow>& gains);

struct SensitivityRow {
    std::string region;
    std::vector<std::string> settings;
    std::vector<double> mse;  // Ftbsc, per setting
    double spread = kNaN;     // max - min over settings
    double regime_gap = kNaN; // |SiteOnly - Ftbsc| under the first setting
    bool all_finite = false;
    bool spread_below_gap = false;
};
std::vector<SensitivityRow> sensitivity_summary(const ExperimentReport& report);

struct AblationResult {
    train::TrainTrace full_trace;
    double full_mse = kNaN;     // flux MSE on observed validation, all five steps
    double ablated_mse = kNaN;  // same with step 4 skipped
};
/// Five-step pretraining with and without step 4 from the same init.
AblationResult run_five_step_ablation(const RunConfig& cfg, const Benchmark& data);

}  // namespace ftbsc::harness
