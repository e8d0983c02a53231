#pragma once

#include <functional>
#include <string>

#include "ftbsc/numcore/parameters.hpp"

namespace ftbsc::num {

/// Scalar function of a parameter set. When `grad` is non-null the callee
/// also fills it with the analytic gradient.
using ScalarObjective = std::function<double(const ParameterSet& params, Gradients* grad)>;

struct GradcheckResult {
    double max_relative_error = 0.0;
    std::string worst_parameter;
    std::size_t worst_index = 0;
    std::size_t coordinates = 0;
};

/// Compares the analytic gradient to central differences
/// (f(x + h e_i) - f(x - h e_i)) / 2h coordinate by coordinate and reports
/// max |a - n| / max(1, |n|).
GradcheckResult gradcheck(const ScalarObjective& f, const ParameterSet& params, double step = 1e-5);

}  // namespace ftbsc::num
