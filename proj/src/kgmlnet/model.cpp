#include "ftbsc/kgmlnet/model.hpp"

#include <cmath>
#include <random>
#include <stdexcept>

#include "ftbsc/numcore/layers.hpp"
#include "ftbsc/numcore/ops.hpp"

namespace ftbsc::kgml {

using eco::Target;
using num::Shape;
using num::Tensor;
using num::Var;

void ModelConfig::validate() const {
    if (input_dim < 1 || basis_hidden < 1 || head_hidden < 1) {
        throw std::invalid_argument("model config: all dimensions must be >= 1");
    }
}

bool CalibrationHead::is_identity() const {
    for (std::size_t k = 0; k < eco::kFluxCount; ++k) {
        if (scale[k] != 1.0 || offset[k] != 0.0) return false;
    }
    return true;
}

void CalibrationHead::validate() const {
    for (std::size_t k = 0; k < eco::kFluxCount; ++k) {
        if (!std::isfinite(scale[k]) || !std::isfinite(offset[k])) {
            throw std::invalid_argument("calibration head has non-finite entries");
        }
    }
}

double CalibrationHead::distance_from_identity() const {
    double total = 0.0;
    for (std::size_t k = 0; k < eco::kFluxCount; ++k) {
        if (!(scale[k] > 0.0)) throw std::domain_error("calibration scale must be positive");
        const double ls = std::log(scale[k]);
        total += offset[k] * offset[k] + ls * ls;
    }
    return total;
}

std::string head_prefix(Target t) { return std::string(eco::name(t)) + "."; }
std::string calib_scale_name(Target t) { return std::string(kCalibPrefix) + std::string(eco::name(t)) + ".scale"; }
std::string calib_offset_name(Target t) { return std::string(kCalibPrefix) + std::string(eco::name(t)) + ".offset"; }

namespace {

// name -> (shape, fan_in); fan_in 0 marks a bias (zero init).
struct Slot {
    std::string name;
    Shape shape;
    std::size_t fan_in;
};

void add_gru(std::vector<Slot>& slots, const std::string& prefix, std::size_t in, std::size_t hid) {
    for (const char* g : {"z", "r", "h"}) {
        slots.push_back({prefix + ".w_" + g, {hid, in}, in});
        slots.push_back({prefix + ".u_" + g, {hid, hid}, hid});
        slots.push_back({prefix + ".b_" + g, {hid}, 0});
    }
}

std::vector<Slot> layout(const ModelConfig& cfg) {
    std::vector<Slot> slots;
    add_gru(slots, "basis", cfg.input_dim, cfg.basis_hidden);
    for (Target t : eco::kFluxTargets) {
        const std::string p(eco::name(t));
        add_gru(slots, p + ".gru", cfg.basis_hidden, cfg.head_hidden);
        slots.push_back({p + ".out.w", {1, cfg.head_hidden}, cfg.head_hidden});
        slots.push_back({p + ".out.b", {1}, 0});
    }
    slots.push_back({"yield.attn.w", {cfg.basis_hidden}, cfg.basis_hidden});
    slots.push_back({"yield.attn.b", {1}, 0});
    slots.push_back({"yield.out.w", {1, cfg.basis_hidden}, cfg.basis_hidden});
    slots.push_back({"yield.out.b", {1}, 0});
    return slots;
}

}  // namespace

ParameterSet init_model(const ModelConfig& cfg) {
    cfg.validate();
    std::mt19937_64 rng(cfg.seed);
    ParameterSet params;
    for (const auto& slot : layout(cfg)) {
        Tensor t(slot.shape);
        if (slot.fan_in > 0) {
            const double s = 1.0 / std::sqrt(static_cast<double>(slot.fan_in));
            std::uniform_real_distribution<double> dist(-s, s);
            for (auto& v : t.data()) v = dist(rng);
        }
        params.insert(slot.name, std::move(t));
    }
    return params;
}

void check_layout(const ParameterSet& params, const ModelConfig& cfg) {
    const auto slots = layout(cfg);
    for (const auto& slot : slots) {
        if (!params.contains(slot.name)) throw num::ShapeError("parameter '" + slot.name + "' is missing");
        num::require_shape(params.at(slot.name), slot.shape, "parameter '" + slot.name + "'");
    }
    if (params.tensor_count() != slots.size()) {
        for (const auto& [name, _] : params) {
            bool known = false;
            for (const auto& slot : slots) known = known || slot.name == name;
            if (!known) throw num::ShapeError("unexpected parameter '" + name + "'");
        }
    }
}

const Tensor& FluxPrediction::get(Target t) const {
    switch (t) {
        case Target::Ra: return ra;
        case Target::Rh: return rh;
        case Target::Nee: return nee;
        case Target::Yield: return yield_pred;
    }
    throw std::invalid_argument("bad target");
}

Var FluxVars::get(Target t) const {
    switch (t) {
        case Target::Ra: return ra;
        case Target::Rh: return rh;
        case Target::Nee: return nee;
        case Target::Yield: return yield_pred;
    }
    throw std::invalid_argument("bad target");
}

FluxPrediction FluxVars::values() const {
    return FluxPrediction{ra.value(), rh.value(), nee.value(), reco.value(), yield_pred.value()};
}

Var BoundModel::at(const std::string& name) const {
    auto it = vars.find(name);
    if (it == vars.end()) throw std::out_of_range("unbound parameter '" + name + "'");
    return it->second;
}

BoundModel bind(num::Graph& graph, const ParameterSet& params, const CalibrationHead* calib, Binding params_binding,
                Binding calib_binding) {
    BoundModel model;
    for (const auto& [name, t] : params) {
        model.vars.emplace(name, params_binding == Binding::Parameters ? graph.parameter(name, t) : graph.constant(t));
    }
    if (calib != nullptr) {
        calib->validate();
        std::array<Var, eco::kFluxCount> scales;
        std::array<Var, eco::kFluxCount> offsets;
        for (Target t : eco::kFluxTargets) {
            const std::size_t k = eco::index(t);
            const Tensor s = Tensor::scalar(calib->scale[k]);
            const Tensor o = Tensor::scalar(calib->offset[k]);
            const bool leaf = calib_binding == Binding::Parameters;
            scales[k] = leaf ? graph.parameter(calib_scale_name(t), s) : graph.constant(s);
            offsets[k] = leaf ? graph.parameter(calib_offset_name(t), o) : graph.constant(o);
        }
        model.calib_scale = scales;
        model.calib_offset = offsets;
    }
    return model;
}

namespace {
num::GruCellVars gru_vars(const BoundModel& m, const std::string& prefix) {
    return num::GruCellVars{m.at(prefix + ".w_z"), m.at(prefix + ".w_r"), m.at(prefix + ".w_h"),
                            m.at(prefix + ".u_z"), m.at(prefix + ".u_r"), m.at(prefix + ".u_h"),
                            m.at(prefix + ".b_z"), m.at(prefix + ".b_r"), m.at(prefix + ".b_h")};
}
}  // namespace

FluxVars forward(num::Graph& graph, const BoundModel& model, const Tensor& drivers, const eco::Standardizer& scaler) {
    if (drivers.rank() != 3) {
        throw num::ShapeError("forward: drivers must be [T x batch x input], got " + num::to_string(drivers.shape()));
    }
    const std::size_t steps = drivers.dim(0);
    const std::size_t batch = drivers.dim(1);
    const Tensor& trunk_w = model.at("basis.w_z").value();
    if (drivers.dim(2) != trunk_w.dim(1)) {
        throw num::ShapeError("forward: drivers carry " + std::to_string(drivers.dim(2)) + " features, model expects " +
                              std::to_string(trunk_w.dim(1)));
    }
    const std::size_t basis = trunk_w.dim(0);

    const Var h0 = graph.constant(Tensor({batch, basis}));
    const std::vector<Var> hs = num::gru_sequence(graph, drivers, h0, gru_vars(model, "basis"));

    std::array<Var, eco::kFluxCount> fluxes;
    for (Target t : eco::kFluxTargets) {
        const std::size_t k = eco::index(t);
        const std::string p(eco::name(t));
        const auto head = gru_vars(model, p + ".gru");
        const std::size_t head_hidden = head.w_z.value().dim(0);
        const Var g0 = graph.constant(Tensor({batch, head_hidden}));
        const std::vector<Var> gs = num::gru_sequence(hs, g0, head);
        const Var stacked = num::stack_rows(gs);  // [(T*B) x head], row t*B + b
        const Var z = num::dense(stacked, model.at(p + ".out.w"), model.at(p + ".out.b"));
        Var f = num::reshape(z, {steps, batch});
        f = num::add_scalar(num::scale(f, scaler.target_std[k]), scaler.target_mean[k]);
        if (model.calib_scale) f = num::affine(f, (*model.calib_scale)[k], (*model.calib_offset)[k]);
        fluxes[k] = f;
    }

    FluxVars out;
    out.ra = fluxes[0];
    out.rh = fluxes[1];
    out.nee = fluxes[2];
    out.reco = num::add(out.ra, out.rh);

    const Var pooled = num::attention_pool(hs, model.at("yield.attn.w"), model.at("yield.attn.b"));
    const Var y = num::dense(pooled, model.at("yield.out.w"), model.at("yield.out.b"));
    const std::size_t yk = eco::index(Target::Yield);
    out.yield_pred = num::add_scalar(num::scale(num::reshape(y, {batch}), scaler.target_std[yk]), scaler.target_mean[yk]);
    return out;
}

FluxPrediction forward(const ParameterSet& params, const std::optional<CalibrationHead>& calib, const Tensor& drivers,
                       const eco::Standardizer& scaler) {
    num::Graph graph;
    const BoundModel model = bind(graph, params, calib ? &*calib : nullptr, Binding::Constants, Binding::Constants);
    return forward(graph, model, drivers, scaler).values();
}

}  // namespace ftbsc::kgml
