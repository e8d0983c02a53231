#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <optional>
#include <string>

#include "ftbsc/ecosyslite/batch.hpp"
#include "ftbsc/numcore/graph.hpp"
#include "ftbsc/numcore/parameters.hpp"

namespace ftbsc::kgml {

using num::ParameterSet;

struct ModelConfig {
    std::size_t input_dim = eco::kFeatureCount;
    std::size_t basis_hidden = 64;
    std::size_t head_hidden = 32;
    bool with_calibration = false;
    std::uint64_t seed = 0;

    void validate() const;
    friend bool operator==(const ModelConfig&, const ModelConfig&) = default;
};

/// Per-site affine correction of each daily flux: f -> scale_f * f + offset_f.
/// Indexed by eco::Target (Ra, Rh, Nee).
struct CalibrationHead {
    std::array<double, eco::kFluxCount> scale{1.0, 1.0, 1.0};
    std::array<double, eco::kFluxCount> offset{0.0, 0.0, 0.0};

    static CalibrationHead identity() { return {}; }
    bool is_identity() const;
    void validate() const;
    /// Offsets squared plus log-scales squared; zero only at the identity.
    double distance_from_identity() const;

    friend bool operator==(const CalibrationHead&, const CalibrationHead&) = default;
};

/// Name prefixes of the parameter groups. The calibration head is not part of
/// the ParameterSet; it uses the "calib." prefix only on graphs.
inline constexpr const char* kTrunkPrefix = "basis.";
std::string head_prefix(eco::Target t);  // "ra.", "rh.", "nee.", "yield."
inline constexpr const char* kCalibPrefix = "calib.";
std::string calib_scale_name(eco::Target t);
std::string calib_offset_name(eco::Target t);

/// Seeded init: weights ~ U(-1/sqrt(fan_in), 1/sqrt(fan_in)), biases zero.
ParameterSet init_model(const ModelConfig& cfg);

/// Throws ShapeError naming the first parameter that does not match `cfg`.
void check_layout(const ParameterSet& params, const ModelConfig& cfg);

/// Daily fluxes [T x B] and annual yield [B] in physical units.
/// reco is always ra + rh, evaluated after calibration.
struct FluxPrediction {
    num::Tensor ra, rh, nee, reco;
    num::Tensor yield_pred;

    const num::Tensor& get(eco::Target t) const;
};

/// The same quantities as graph nodes.
struct FluxVars {
    num::Var ra, rh, nee, reco, yield_pred;

    num::Var get(eco::Target t) const;
    FluxPrediction values() const;
};

/// How parameters enter the graph: as named leaves (for gradients) or constants.
enum class Binding { Parameters, Constants };

/// Graph handles of every model tensor plus the optional calibration head.
struct BoundModel {
    std::map<std::string, num::Var> vars;  // ParameterSet names
    std::optional<std::array<num::Var, eco::kFluxCount>> calib_scale;
    std::optional<std::array<num::Var, eco::kFluxCount>> calib_offset;

    num::Var at(const std::string& name) const;
};

BoundModel bind(num::Graph& graph, const ParameterSet& params, const CalibrationHead* calib,
                Binding params_binding = Binding::Parameters, Binding calib_binding = Binding::Parameters);

/// Builds the forward pass. `drivers` is [T x B x input_dim] in standardized
/// units; flux and yield outputs are mapped back with scaler.target_mean/std,
/// then the calibration head (if bound) is applied to each flux.
FluxVars forward(num::Graph& graph, const BoundModel& model, const num::Tensor& drivers,
                 const eco::Standardizer& scaler);

/// Value-only convenience wrapper.
FluxPrediction forward(const ParameterSet& params, const std::optional<CalibrationHead>& calib,
                       const num::Tensor& drivers, const eco::Standardizer& scaler);

}  // namespace ftbsc::kgml
