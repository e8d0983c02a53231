#pragma once

#include <span>
#include <string>
#include <vector>

#include "ftbsc/numcore/graph.hpp"

namespace ftbsc::num {

/// Weights of one GRU cell. W_* are hidden x input, U_* hidden x hidden, b_* hidden.
struct GruCellParams {
    Tensor w_z, w_r, w_h;
    Tensor u_z, u_r, u_h;
    Tensor b_z, b_r, b_h;

    static GruCellParams zeros(std::size_t input_dim, std::size_t hidden_dim);
    std::size_t input_dim() const { return w_z.dim(1); }
    std::size_t hidden_dim() const { return w_z.dim(0); }
    /// Throws ShapeError unless all nine tensors agree on (input, hidden).
    void validate() const;
};

/// Graph handles of a GruCellParams.
struct GruCellVars {
    Var w_z, w_r, w_h;
    Var u_z, u_r, u_h;
    Var b_z, b_r, b_h;
};

/// Registers each tensor as a named parameter leaf ("<prefix>.w_z", ...).
GruCellVars bind_parameters(Graph& graph, const std::string& prefix, const GruCellParams& p);
/// Registers each tensor as a constant.
GruCellVars bind_constants(Graph& graph, const GruCellParams& p);

/// y = x W^T + b for x [batch x in], W [out x in], b [out].
Var dense(Var x, Var w, Var b);

/// One GRU step:
///   z = sigmoid(W_z x + U_z h + b_z), r = sigmoid(W_r x + U_r h + b_r)
///   c = tanh(W_h x + U_h (r * h) + b_h), h' = (1 - z) * h + z * c
Var gru_cell(Var x, Var h, const GruCellVars& p);

/// Unrolls gru_cell over the leading (time) axis of xs [T x batch x in].
std::vector<Var> gru_sequence(Graph& graph, const Tensor& xs, Var h0, const GruCellVars& p);
std::vector<Var> gru_sequence(std::span<const Var> xs, Var h0, const GruCellVars& p);

/// Softmax with max subtraction. Throws on empty input.
std::vector<double> softmax(std::span<const double> scores);

/// Attention pooling over time: s_t = hs_t . w + b, alpha = softmax_t(s),
/// output sum_t alpha_t hs_t. Each hs_t is [batch x hid]; w is [hid]; b is [1].
Var attention_pool(std::span<const Var> hs, Var w, Var b);

/// Per-batch-row attention weights [T x batch] matching attention_pool.
Tensor attention_weights(std::span<const Tensor> hs, const Tensor& w, double b);

}  // namespace ftbsc::num
