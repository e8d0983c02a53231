#include "ftbsc/trainer/optimizer.hpp"

#include <cmath>
#include <stdexcept>

namespace ftbsc::train {

std::string_view name(OptimizerKind kind) {
    return kind == OptimizerKind::Adam ? "adam" : "gd";
}

OptimizerKind parse_optimizer(std::string_view text) {
    if (text == "adam") return OptimizerKind::Adam;
    if (text == "gd" || text == "sgd") return OptimizerKind::GradientDescent;
    throw std::invalid_argument("unknown optimizer '" + std::string(text) + "' (expected adam or gd)");
}

Optimizer::Optimizer(OptimizerKind kind, AdamSettings settings) : kind_(kind), settings_(settings) {}

void Optimizer::step(num::ParameterSet& params, const num::Gradients& grads, const LearningRate& lr,
                     const ProximalAnchor* anchor) {
    ++steps_;
    const double t = static_cast<double>(steps_);
    const double c1 = 1.0 - std::pow(settings_.beta1, t);
    const double c2 = 1.0 - std::pow(settings_.beta2, t);
    for (const auto& [pname, g] : grads) {
        if (!params.contains(pname)) continue;
        num::Tensor& p = params.at(pname);
        num::require_shape(g, p.shape(), "gradient of '" + pname + "'");
        const double rate = lr(pname);
        auto pd = p.data();
        const auto gd = g.data();
        const bool pulled = anchor != nullptr && anchor->mu > 0.0 && anchor->applies(pname);
        if (pulled) num::require_shape(anchor->theta_star->at(pname), p.shape(), "anchor of '" + pname + "'");
        const auto star = pulled ? anchor->theta_star->at(pname).data() : std::span<const double>{};
        auto pull = [&](std::size_t i, double eta) {
            const double k = 2.0 * eta * anchor->mu;
            pd[i] = (pd[i] + k * star[i]) / (1.0 + k);
        };
        const HeadTerm head = anchor != nullptr && anchor->rho > 0.0 ? anchor->head_term(pname) : HeadTerm::None;
        auto shrink = [&](std::size_t i, double eta) {
            const double k = 1.0 + 2.0 * eta * anchor->rho;
            if (head == HeadTerm::Offset) pd[i] /= k;
            if (head == HeadTerm::Scale && pd[i] > 0.0) pd[i] = std::exp(std::log(pd[i]) / k);
        };
        if (kind_ == OptimizerKind::GradientDescent) {
            for (std::size_t i = 0; i < pd.size(); ++i) {
                pd[i] -= rate * gd[i];
                if (pulled) pull(i, rate);
                if (head != HeadTerm::None) shrink(i, rate);
            }
            continue;
        }
        Moments& mom = moments_[pname];
        if (mom.m.empty()) {
            mom.m.assign(pd.size(), 0.0);
            mom.v.assign(pd.size(), 0.0);
        }
        for (std::size_t i = 0; i < pd.size(); ++i) {
            mom.m[i] = settings_.beta1 * mom.m[i] + (1.0 - settings_.beta1) * gd[i];
            mom.v[i] = settings_.beta2 * mom.v[i] + (1.0 - settings_.beta2) * gd[i] * gd[i];
            const double m_hat = mom.m[i] / c1;
            const double v_hat = mom.v[i] / c2;
            const double denom = std::sqrt(v_hat) + settings_.eps;
            pd[i] -= rate * m_hat / denom;
            if (pulled) pull(i, rate / denom);
            if (head != HeadTerm::None) shrink(i, rate / denom);
        }
    }
}

}  // namespace ftbsc::train
