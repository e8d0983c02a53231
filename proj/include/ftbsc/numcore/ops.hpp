#pragma once

#include <span>

#include "ftbsc/numcore/graph.hpp"

namespace ftbsc::num {

double sigmoid(double x) noexcept;

// Elementwise ops. Binary ops require identical shapes; there is no broadcasting.
Var add(Var a, Var b);
Var sub(Var a, Var b);
Var mul(Var a, Var b);
Var scale(Var a, double k);
Var add_scalar(Var a, double c);
Var add_const(Var a, const Tensor& c);
Var mul_const(Var a, const Tensor& c);
Var square(Var a);
Var relu(Var a);
Var log(Var a);
Var sigmoid(Var a);
Var tanh(Var a);

// Reductions to shape {1}.
Var sum(Var a);
Var mean(Var a);

/// Sum of squared differences against a constant, as a scalar.
Var squared_distance(Var a, const Tensor& target);

Var reshape(Var a, Shape shape);

/// Concatenates rank-2 blocks of equal column count along the row axis.
Var stack_rows(std::span<const Var> parts);

/// y = s * a + o with `s` and `o` of shape {1}.
Var affine(Var a, Var s, Var o);

}  // namespace ftbsc::num
