#pragma once

#include <array>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <set>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "ftbsc/ecosyslite/batch.hpp"
#include "ftbsc/kgmlnet/model.hpp"
#include "ftbsc/objective/losses.hpp"
#include "ftbsc/trainer/optimizer.hpp"

namespace ftbsc::train {

using eco::SiteDataset;
using num::ParameterSet;
using obj::TargetSet;

/// How the mu and rho terms move parameters: folded into the gradient, or
/// resolved as exact proximal steps after each optimizer update (stable for any weight).
enum class AnchorUpdate { Proximal, Gradient };

std::string_view name(AnchorUpdate mode);
AnchorUpdate parse_anchor_update(std::string_view text);

struct TrainConfig {
    double lr = 1e-3;
    std::size_t batch_size = 32;  // whole site-year sequences per batch
    std::size_t epochs = 20;      // per phase
    OptimizerKind optimizer = OptimizerKind::Adam;
    obj::LossWeights weights;
    std::uint64_t seed = 0;
    bool shuffle = true;
    double backbone_lr_multiplier = 1.0;  // applied to model tensors whenever a calibration head trains
    AnchorUpdate anchor_update = AnchorUpdate::Proximal;

    void validate() const;
};

/// Trainable state: model tensors and the optional calibration head.
struct ModelState {
    ParameterSet params;
    std::optional<kgml::CalibrationHead> calib;

    friend bool operator==(const ModelState&, const ModelState&) = default;
};

struct TraceRow {
    std::size_t epoch = 0;  // 0 is the evaluation before any update
    std::size_t phase = 0;  // 1-based
    obj::LossBreakdown train;
    double val_mse = 0.0;  // NaN when the phase has no validation signal
};

struct TrainTrace {
    std::vector<TraceRow> rows;
    std::vector<std::string> phase_names;
    std::vector<std::size_t> phase_starts;  // index into rows where each phase begins

    std::size_t phase_count() const noexcept { return phase_names.size(); }
    /// Appends `other`, renumbering its phases after ours.
    void append(const TrainTrace& other);
    /// Throws std::logic_error if markers are not strictly increasing or rows disagree with them.
    void validate() const;
    void write_csv(std::ostream& out) const;
};

inline constexpr const char* kTraceHeader = "epoch,phase,l_pred,l_phys,l_prox,l_calib,total,val_mse";

class DivergenceError : public std::runtime_error {
public:
    DivergenceError(const std::string& what, TrainTrace trace) : std::runtime_error(what), trace_(std::move(trace)) {}
    const TrainTrace& trace() const noexcept { return trace_; }

private:
    TrainTrace trace_;
};

struct PhaseData {
    std::span<const SiteDataset> train;
    std::span<const SiteDataset> validation;  // may be empty
};

struct PhaseSpec {
    std::string label;
    TargetSet supervised;
    std::optional<TargetSet> validate_on;  // defaults to `supervised`
    const ParameterSet* anchor = nullptr;  // theta*, required when mu > 0
};

struct PhaseResult {
    ModelState best;  // state at the best validation epoch
    ModelState last;  // state after the final epoch
    std::size_t best_epoch = 0;
    std::uint64_t steps = 0;
    TrainTrace trace;
    std::set<std::string> regions_seen;  // regions of every sequence used in an update
};

/// Mini-batch optimization of the composed objective restricted to
/// `spec.supervised`. Flux and yield heads outside that set, and calibration
/// entries of unsupervised fluxes, receive zero gradient. Optimizer state is
/// fresh for every call. Throws DivergenceError on a non-finite loss or update.
PhaseResult train_phase(const ModelState& init, const PhaseData& data, const PhaseSpec& spec, const TrainConfig& cfg,
                        const eco::Standardizer& scaler);

/// Standardized masked MSE of `state` over every sequence of `sites`.
/// Returns NaN if no target in `targets` is observed.
double evaluate(const ModelState& state, std::span<const SiteDataset> sites, const TargetSet& targets,
                const eco::Standardizer& scaler, std::size_t chunk = 64);

struct FiveStepData {
    std::span<const SiteDataset> synthetic_train;
    std::span<const SiteDataset> synthetic_validation;
    std::span<const SiteDataset> observed_train;
    std::span<const SiteDataset> observed_validation;
};

struct ScheduleResult {
    ModelState state;
    std::uint64_t steps = 0;
    TrainTrace trace;
    std::set<std::string> regions_seen;
};

/// The five phases, in order:
///   1 yield + ra on synthetic, 2 fluxes on synthetic, 3 yield on observed,
///   4 fluxes on synthetic, 5 fluxes on observed.
/// `enabled` allows ablations; disabled phases leave no trace rows.
/// The anchor term is always off here.
ScheduleResult five_step_schedule(const ModelState& init, const FiveStepData& data, const TrainConfig& cfg,
                                  const eco::Standardizer& scaler, std::array<bool, 5> enabled = {true, true, true, true, true});

enum class PretrainMode { Joint, FiveStep };

struct GlobalData {
    std::span<const SiteDataset> train;
    std::span<const SiteDataset> validation;
    std::span<const SiteDataset> synthetic_train;       // FiveStep only
    std::span<const SiteDataset> synthetic_validation;  // FiveStep only
};

/// Pooled training with mu = rho = 0 regardless of cfg. Needs sites from at
/// least two regions. Joint mode supervises every target in one phase.
ScheduleResult pretrain_global(const ModelState& init, const GlobalData& data, const TrainConfig& cfg,
                               const eco::Standardizer& scaler, PretrainMode mode = PretrainMode::Joint);

/// Starts at theta* and optimizes l_pred + lambda l_phys + mu l_prox on one site's data.
PhaseResult finetune_site(const ParameterSet& theta_star, const PhaseData& data, const TrainConfig& cfg,
                          const eco::Standardizer& scaler);

/// As finetune_site, plus a calibration head starting at the identity and
/// regularized with rho. With attach_head = false this is finetune_site.
PhaseResult finetune_site_calibrated(const ParameterSet& theta_star, const PhaseData& data, const TrainConfig& cfg,
                                     const eco::Standardizer& scaler, bool attach_head = true);

}  // namespace ftbsc::train
