#pragma once

#include <array>
#include <optional>
#include <span>

#include "ftbsc/ecosyslite/batch.hpp"
#include "ftbsc/kgmlnet/model.hpp"

namespace ftbsc::obj {

using eco::Target;
using kgml::ParameterSet;

struct LossWeights {
    double lambda_phys = 0.1;
    double mu_prox = 1.0;
    double rho_calib = 0.01;
    double w_mass = 1.0;
    double w_nonneg = 1.0;

    void validate() const;
    friend bool operator==(const LossWeights&, const LossWeights&) = default;
};

struct LossBreakdown {
    double l_pred = 0.0;
    double l_phys = 0.0;
    double l_prox = 0.0;
    double l_calib = 0.0;
    double total = 0.0;
};

/// Which targets contribute to the prediction loss.
class TargetSet {
public:
    TargetSet() = default;
    TargetSet(std::initializer_list<Target> targets);

    static TargetSet all() { return {Target::Ra, Target::Rh, Target::Nee, Target::Yield}; }
    static TargetSet fluxes() { return {Target::Ra, Target::Rh, Target::Nee}; }

    bool contains(Target t) const { return bits_[eco::index(t)]; }
    void add(Target t) { bits_[eco::index(t)] = true; }
    bool empty() const;
    friend bool operator==(const TargetSet&, const TargetSet&) = default;

private:
    std::array<bool, eco::kTargetCount> bits_{};
};

/// True if `batch` has at least one observed cell for some target in `targets`.
bool has_supervision(const eco::Batch& batch, const TargetSet& targets);

/// Masked MSE in standardized units: per-variable mean over observed cells,
/// then averaged over the variables in `targets` that have any observations.
/// Throws std::invalid_argument when no supervised cell remains.
num::Var loss_pred(const kgml::FluxVars& pred, const eco::Batch& batch, const TargetSet& targets,
                   const eco::Standardizer& scaler);

/// w_mass * mean((nee - (ra + rh - gpp))^2) + w_nonneg * mean(max(0,-ra)^2 + max(0,-rh)^2)
num::Var loss_phys(const kgml::FluxVars& pred, const num::Tensor& gpp, const LossWeights& w);

/// Squared distance of every bound model tensor from the anchor.
num::Var loss_prox(num::Graph& graph, const kgml::BoundModel& model, const ParameterSet& theta_star);

/// Sum of offset^2 + log(scale)^2 over the bound calibration head.
num::Var loss_calib(const kgml::BoundModel& model);

struct TotalLoss {
    num::Var total;
    LossBreakdown parts;
};

/// Composes the objective. Terms whose weight is zero are reported (when the
/// inputs exist) but not added to the graph.
TotalLoss total_loss(num::Graph& graph, const kgml::BoundModel& model, const kgml::FluxVars& pred,
                     const eco::Batch& batch, const TargetSet& targets, const eco::Standardizer& scaler,
                     const ParameterSet* theta_star, const LossWeights& w);

// Value-level versions.
double loss_pred(const kgml::FluxPrediction& pred, const eco::Batch& batch, const TargetSet& targets,
                 const eco::Standardizer& scaler = eco::Standardizer::identity());
double loss_phys(const kgml::FluxPrediction& pred, const num::Tensor& gpp, const LossWeights& w = {});
double loss_prox(const ParameterSet& theta_s, const ParameterSet& theta_star);
double loss_calib(const kgml::CalibrationHead& calib);

/// Running masked squared-error sums for validation over many batches.
/// mse() matches loss_pred on the concatenation of everything added.
class MseAccumulator {
public:
    explicit MseAccumulator(TargetSet targets) : targets_(targets) {}

    void add(const kgml::FluxPrediction& pred, const eco::Batch& batch, const eco::Standardizer& scaler);
    bool has_data() const;
    /// Throws std::invalid_argument when nothing supervised was added.
    double mse() const;
    double mse(Target t) const;

private:
    TargetSet targets_;
    std::array<double, eco::kTargetCount> sum_{};
    std::array<double, eco::kTargetCount> count_{};
};

}  // namespace ftbsc::obj
