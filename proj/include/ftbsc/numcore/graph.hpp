#pragma once

#include <cstddef>
#include <functional>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "ftbsc/numcore/tensor.hpp"

namespace ftbsc::num {

/// Named gradient of every parameter leaf reached (or not) by a backward pass.
using Gradients = std::map<std::string, Tensor>;

class Graph;

/// Handle to a node recorded on a Graph. Cheap to copy; valid while the graph lives.
struct Var {
    Graph* graph = nullptr;
    std::size_t id = 0;

    const Tensor& value() const;
    const Shape& shape() const { return value().shape(); }
};

/// Receives the upstream gradient and adds this node's contribution into the
/// gradient buffers of its inputs. Entries of `input_grads` are null for inputs
/// that do not require a gradient.
using BackwardFn = std::function<void(const Tensor& grad_out, std::span<Tensor* const> input_grads)>;

/// Define-by-run computation graph. Nodes are appended in execution order, so
/// insertion order is a topological order; backward walks it in reverse and
/// visits each node once.
class Graph {
public:
    Graph() = default;
    Graph(const Graph&) = delete;
    Graph& operator=(const Graph&) = delete;
    Graph(Graph&&) = default;
    Graph& operator=(Graph&&) = default;

    Var constant(Tensor value);
    Var parameter(const std::string& name, Tensor value);

    /// Records an op result. Non-finite outputs are rejected.
    Var record(Tensor value, std::vector<std::size_t> inputs, BackwardFn backward);

    const Tensor& value(std::size_t id) const { return nodes_.at(id).value; }
    bool requires_grad(std::size_t id) const { return nodes_.at(id).requires_grad; }
    std::size_t size() const noexcept { return nodes_.size(); }

    /// Reverse-mode sweep from a scalar node. Every parameter leaf appears in
    /// the result, with zeros when the loss does not depend on it.
    Gradients backward(Var loss) const;

private:
    struct Node {
        Tensor value;
        std::vector<std::size_t> inputs;
        BackwardFn backward;
        std::string param_name;
        bool requires_grad = false;
    };
    std::vector<Node> nodes_;
};

inline const Tensor& Var::value() const { return graph->value(id); }

}  // namespace ftbsc::num
