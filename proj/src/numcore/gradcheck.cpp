#include "ftbsc/numcore/gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace ftbsc::num {

namespace {
double finite_or_throw(double v) {
    if (!std::isfinite(v)) throw std::domain_error("gradcheck: objective returned a non-finite value");
    return v;
}
}  // namespace

GradcheckResult gradcheck(const ScalarObjective& f, const ParameterSet& params, double step) {
    if (!(step > 0.0)) throw std::invalid_argument("gradcheck: step must be positive");

    Gradients analytic;
    finite_or_throw(f(params, &analytic));

    GradcheckResult result;
    ParameterSet probe = params;
    for (auto& [name, tensor] : probe) {
        auto g = analytic.find(name);
        if (g == analytic.end()) throw std::invalid_argument("gradcheck: no analytic gradient for '" + name + "'");
        require_shape(g->second, tensor.shape(), "gradcheck gradient '" + name + "'");
        for (std::size_t i = 0; i < tensor.size(); ++i) {
            const double saved = tensor[i];
            tensor[i] = saved + step;
            const double plus = finite_or_throw(f(probe, nullptr));
            tensor[i] = saved - step;
            const double minus = finite_or_throw(f(probe, nullptr));
            tensor[i] = saved;

            const double numeric = (plus - minus) / (2.0 * step);
            const double err = std::abs(g->second[i] - numeric) / std::max(1.0, std::abs(numeric));
            if (result.coordinates == 0 || err > result.max_relative_error) {
                result.max_relative_error = err;
                result.worst_parameter = name;
                result.worst_index = i;
            }
            ++result.coordinates;
        }
    }
    return result;
}

}  // namespace ftbsc::num
