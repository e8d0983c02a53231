#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <string>

#include "ftbsc/numcore/graph.hpp"
#include "ftbsc/numcore/parameters.hpp"

namespace ftbsc::train {

enum class OptimizerKind { GradientDescent, Adam };

std::string_view name(OptimizerKind kind);
OptimizerKind parse_optimizer(std::string_view text);

struct AdamSettings {
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
};

/// Returns the learning rate for a parameter name.
using LearningRate = std::function<double(const std::string&)>;

/// Quadratic pull mu * ||theta - anchor||^2 on the tensors accepted by `applies`,
/// resolved exactly after each step: theta <- (theta + 2 eta mu anchor) / (1 + 2 eta mu),
/// where eta is the per-coordinate step size the optimizer just used
/// (lr for gradient descent, lr / (sqrt(v_hat) + eps) for Adam).
///
/// The head penalty rho * (offset^2 + log(scale)^2) is resolved the same way:
/// offset <- offset / (1 + 2 eta rho), log(scale) <- log(scale) / (1 + 2 eta rho).
enum class HeadTerm { None, Offset, Scale };

struct ProximalAnchor {
    const num::ParameterSet* theta_star = nullptr;
    double mu = 0.0;
    std::function<bool(const std::string&)> applies;
    double rho = 0.0;
    std::function<HeadTerm(const std::string&)> head_term;
};

/// Stateful first-order optimizer over named tensors. Adam keeps one pair of
/// moment buffers per name; the bias-correction step counter is shared.
class Optimizer {
public:
    explicit Optimizer(OptimizerKind kind, AdamSettings settings = {});

    /// Updates every tensor of `params` that has a gradient in `grads`.
    void step(num::ParameterSet& params, const num::Gradients& grads, const LearningRate& lr,
              const ProximalAnchor* anchor = nullptr);

    OptimizerKind kind() const noexcept { return kind_; }
    std::uint64_t steps() const noexcept { return steps_; }

private:
    struct Moments {
        std::vector<double> m;
        std::vector<double> v;
    };

    OptimizerKind kind_;
    AdamSettings settings_;
    std::uint64_t steps_ = 0;
    std::map<std::string, Moments> moments_;
};

}  // namespace ftbsc::train
