#include "ftbsc/objective/losses.hpp"

#include <cmath>
#include <stdexcept>

#include "ftbsc/numcore/ops.hpp"

namespace ftbsc::obj {

using num::Tensor;
using num::Var;

void LossWeights::validate() const {
    for (double v : {lambda_phys, mu_prox, rho_calib, w_mass, w_nonneg}) {
        if (!(v >= 0.0) || !std::isfinite(v)) throw std::invalid_argument("loss weights must be finite and >= 0");
    }
}

TargetSet::TargetSet(std::initializer_list<Target> targets) {
    for (Target t : targets) add(t);
}

bool TargetSet::empty() const {
    for (bool b : bits_) {
        if (b) return false;
    }
    return true;
}

namespace {

double mask_count(const Tensor& mask) {
    double n = 0.0;
    for (double m : mask.data()) n += m;
    return n;
}

Var sum_all(std::span<const Var> terms) {
    Var acc = terms.front();
    for (std::size_t i = 1; i < terms.size(); ++i) acc = num::add(acc, terms[i]);
    return acc;
}

kgml::FluxVars constants(num::Graph& g, const kgml::FluxPrediction& p) {
    kgml::FluxVars v;
    v.ra = g.constant(p.ra);
    v.rh = g.constant(p.rh);
    v.nee = g.constant(p.nee);
    v.reco = g.constant(p.reco);
    v.yield_pred = g.constant(p.yield_pred);
    return v;
}

}  // namespace

bool has_supervision(const eco::Batch& batch, const TargetSet& targets) {
    for (Target t : eco::kAllTargets) {
        if (targets.contains(t) && mask_count(batch.mask(t)) > 0.0) return true;
    }
    return false;
}

Var loss_pred(const kgml::FluxVars& pred, const eco::Batch& batch, const TargetSet& targets,
              const eco::Standardizer& scaler) {
    std::vector<Var> terms;
    for (Target t : eco::kAllTargets) {
        if (!targets.contains(t)) continue;
        const Tensor& mask = batch.mask(t);
        const double n = mask_count(mask);
        if (n == 0.0) continue;
        const Var p = pred.get(t);
        num::require_shape(batch.target(t), p.shape(), std::string("target '") + std::string(eco::name(t)) + "'");
        Tensor neg_target = batch.target(t);
        for (auto& v : neg_target.data()) v = -v;
        Tensor weight = mask;
        const double inv_std = 1.0 / scaler.target_std[eco::index(t)];
        for (auto& v : weight.data()) v *= inv_std;
        const Var err = num::mul_const(num::add_const(p, neg_target), weight);
        terms.push_back(num::scale(num::sum(num::square(err)), 1.0 / n));
    }
    if (terms.empty()) throw std::invalid_argument("loss_pred: no supervised signal (empty mask)");
    return num::scale(sum_all(terms), 1.0 / static_cast<double>(terms.size()));
}

Var loss_phys(const kgml::FluxVars& pred, const Tensor& gpp, const LossWeights& w) {
    Tensor neg_gpp = gpp;
    for (auto& v : neg_gpp.data()) v = -v;
    const Var balance = num::add_const(num::add(pred.ra, pred.rh), neg_gpp);
    const Var mass = num::mean(num::square(num::sub(pred.nee, balance)));
    const Var neg_ra = num::square(num::relu(num::scale(pred.ra, -1.0)));
    const Var neg_rh = num::square(num::relu(num::scale(pred.rh, -1.0)));
    const Var nonneg = num::mean(num::add(neg_ra, neg_rh));
    return num::add(num::scale(mass, w.w_mass), num::scale(nonneg, w.w_nonneg));
}

Var loss_prox(num::Graph& graph, const kgml::BoundModel& model, const ParameterSet& theta_star) {
    if (model.vars.size() != theta_star.tensor_count()) {
        throw std::invalid_argument("loss_prox: parameter sets differ in size");
    }
    std::vector<Var> terms;
    for (const auto& [name, var] : model.vars) {
        if (!theta_star.contains(name)) throw std::invalid_argument("loss_prox: anchor lacks '" + name + "'");
        const Tensor& anchor = theta_star.at(name);
        num::require_shape(anchor, var.shape(), "loss_prox anchor '" + name + "'");
        terms.push_back(num::squared_distance(var, anchor));
    }
    if (terms.empty()) return graph.constant(Tensor::scalar(0.0));
    return sum_all(terms);
}

Var loss_calib(const kgml::BoundModel& model) {
    if (!model.calib_scale || !model.calib_offset) throw std::invalid_argument("loss_calib: no calibration head bound");
    std::vector<Var> terms;
    for (std::size_t k = 0; k < eco::kFluxCount; ++k) {
        const Var s = (*model.calib_scale)[k];
        if (!(s.value().item() > 0.0)) throw std::domain_error("loss_calib: calibration scale must be positive");
        terms.push_back(num::square((*model.calib_offset)[k]));
        terms.push_back(num::square(num::log(s)));
    }
    return num::sum(sum_all(terms));
}

TotalLoss total_loss(num::Graph& graph, const kgml::BoundModel& model, const kgml::FluxVars& pred,
                     const eco::Batch& batch, const TargetSet& targets, const eco::Standardizer& scaler,
                     const ParameterSet* theta_star, const LossWeights& w) {
    w.validate();
    if (w.mu_prox > 0.0 && theta_star == nullptr) throw std::invalid_argument("total_loss: mu > 0 needs an anchor");
    const bool has_head = model.calib_scale.has_value();
    if (w.rho_calib > 0.0 && !has_head) throw std::invalid_argument("total_loss: rho > 0 needs a calibration head");

    TotalLoss out;
    const Var pred_term = loss_pred(pred, batch, targets, scaler);
    const Var phys_term = loss_phys(pred, batch.gpp, w);
    out.parts.l_pred = pred_term.value().item();
    out.parts.l_phys = phys_term.value().item();
    Var total = num::add(pred_term, num::scale(phys_term, w.lambda_phys));
    if (theta_star != nullptr) {
        const Var prox = loss_prox(graph, model, *theta_star);
        out.parts.l_prox = prox.value().item();
        if (w.mu_prox > 0.0) total = num::add(total, num::scale(prox, w.mu_prox));
    }
    if (has_head) {
        const Var calib = loss_calib(model);
        out.parts.l_calib = calib.value().item();
        if (w.rho_calib > 0.0) total = num::add(total, num::scale(calib, w.rho_calib));
    }
    out.total = total;
    out.parts.total = total.value().item();
    return out;
}

double loss_pred(const kgml::FluxPrediction& pred, const eco::Batch& batch, const TargetSet& targets,
                 const eco::Standardizer& scaler) {
    num::Graph g;
    return loss_pred(constants(g, pred), batch, targets, scaler).value().item();
}

double loss_phys(const kgml::FluxPrediction& pred, const Tensor& gpp, const LossWeights& w) {
    num::Graph g;
    return loss_phys(constants(g, pred), gpp, w).value().item();
}

double loss_prox(const ParameterSet& theta_s, const ParameterSet& theta_star) {
    if (!theta_s.same_layout(theta_star)) throw std::invalid_argument("loss_prox: mismatched parameter sets");
    return num::squared_distance(theta_s, theta_star);
}

double loss_calib(const kgml::CalibrationHead& calib) { return calib.distance_from_identity(); }

void MseAccumulator::add(const kgml::FluxPrediction& pred, const eco::Batch& batch, const eco::Standardizer& scaler) {
    for (Target t : eco::kAllTargets) {
        if (!targets_.contains(t)) continue;
        const auto p = pred.get(t).data();
        const auto y = batch.target(t).data();
        const auto m = batch.mask(t).data();
        if (p.size() != y.size()) throw num::ShapeError("MseAccumulator: prediction/target size mismatch");
        const double sd = scaler.target_std[eco::index(t)];
        for (std::size_t i = 0; i < p.size(); ++i) {
            if (m[i] == 0.0) continue;
            const double e = (p[i] - y[i]) / sd;
            sum_[eco::index(t)] += e * e;
            count_[eco::index(t)] += 1.0;
        }
    }
}

bool MseAccumulator::has_data() const {
    for (double c : count_) {
        if (c > 0.0) return true;
    }
    return false;
}

double MseAccumulator::mse(Target t) const {
    const std::size_t k = eco::index(t);
    if (count_[k] == 0.0) throw std::invalid_argument("no observations for '" + std::string(eco::name(t)) + "'");
    return sum_[k] / count_[k];
}

double MseAccumulator::mse() const {
    double total = 0.0;
    double vars = 0.0;
    for (Target t : eco::kAllTargets) {
        if (count_[eco::index(t)] == 0.0) continue;
        total += mse(t);
        vars += 1.0;
    }
    if (vars == 0.0) throw std::invalid_argument("validation: no supervised signal");
    return total / vars;
}

}  // namespace ftbsc::obj
