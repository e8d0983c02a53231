#include "ftbsc/numcore/graph.hpp"

#include <stdexcept>

namespace ftbsc::num {

Var Graph::constant(Tensor value) {
    if (!value.all_finite()) throw std::domain_error("constant contains non-finite values");
    nodes_.push_back(Node{std::move(value), {}, {}, {}, false});
    return Var{this, nodes_.size() - 1};
}

Var Graph::parameter(const std::string& name, Tensor value) {
    if (!value.all_finite()) throw std::domain_error("parameter '" + name + "' contains non-finite values");
    nodes_.push_back(Node{std::move(value), {}, {}, name, true});
    return Var{this, nodes_.size() - 1};
}

Var Graph::record(Tensor value, std::vector<std::size_t> inputs, BackwardFn backward) {
    if (!value.all_finite()) throw std::domain_error("operation produced non-finite values");
    bool needs = false;
    for (auto in : inputs) {
        if (in >= nodes_.size()) throw std::out_of_range("graph input refers to a later node");
        needs = needs || nodes_[in].requires_grad;
    }
    nodes_.push_back(Node{std::move(value), std::move(inputs), needs ? std::move(backward) : BackwardFn{}, {}, needs});
    return Var{this, nodes_.size() - 1};
}

Gradients Graph::backward(Var loss) const {
    if (loss.graph != this) throw std::invalid_argument("loss node belongs to another graph");
    const Tensor& loss_value = value(loss.id);
    if (loss_value.size() != 1) {
        throw ShapeError("backward needs a scalar loss, got shape " + to_string(loss_value.shape()));
    }

    std::vector<Tensor> grads(loss.id + 1);
    grads[loss.id] = Tensor(loss_value.shape(), 1.0);

    std::vector<Tensor*> input_grads;
    for (std::size_t i = loss.id + 1; i-- > 0;) {
        const Node& node = nodes_[i];
        if (!node.backward || grads[i].empty()) continue;
        input_grads.assign(node.inputs.size(), nullptr);
        for (std::size_t k = 0; k < node.inputs.size(); ++k) {
            std::size_t in = node.inputs[k];
            if (!nodes_[in].requires_grad) continue;
            if (grads[in].empty()) grads[in] = Tensor::zeros_like(nodes_[in].value);
            input_grads[k] = &grads[in];
        }
        node.backward(grads[i], input_grads);
    }

    Gradients out;
    for (std::size_t i = 0; i < nodes_.size(); ++i) {
        const Node& node = nodes_[i];
        if (node.param_name.empty()) continue;
        Tensor g = (i < grads.size() && !grads[i].empty()) ? grads[i] : Tensor::zeros_like(node.value);
        auto it = out.find(node.param_name);
        if (it == out.end()) {
            out.emplace(node.param_name, std::move(g));
        } else {
            it->second.accumulate(g);
        }
    }
    return out;
}

}  // namespace ftbsc::num
