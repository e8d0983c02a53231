#pragma once

#include <cstddef>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "ftbsc/numcore/graph.hpp"
#include "ftbsc/numcore/tensor.hpp"

namespace ftbsc::num {

/// Named parameter tensors in name order. Flattening walks names in sorted
/// order and each tensor in row-major order.
class ParameterSet {
public:
    using Map = std::map<std::string, Tensor>;

    void insert(const std::string& name, Tensor value);
    bool contains(const std::string& name) const { return tensors_.count(name) != 0; }
    const Tensor& at(const std::string& name) const;
    Tensor& at(const std::string& name);

    std::size_t tensor_count() const noexcept { return tensors_.size(); }
    std::size_t coordinate_count() const noexcept;

    std::vector<double> flatten() const;
    /// Overwrites every coordinate; `values` must hold exactly coordinate_count() entries.
    void unflatten(std::span<const double> values);

    /// True when both sets have the same names with the same shapes.
    bool same_layout(const ParameterSet& other) const;

    /// Subset of tensors whose names start with any of `prefixes`.
    ParameterSet select(std::span<const std::string> prefixes) const;

    Map::const_iterator begin() const { return tensors_.begin(); }
    Map::const_iterator end() const { return tensors_.end(); }
    Map::iterator begin() { return tensors_.begin(); }
    Map::iterator end() { return tensors_.end(); }

    friend bool operator==(const ParameterSet&, const ParameterSet&) = default;

private:
    Map tensors_;
};

/// Squared Euclidean distance between two parameter sets of the same layout.
double squared_distance(const ParameterSet& a, const ParameterSet& b);

}  // namespace ftbsc::num
