#include "ftbsc/numcore/parameters.hpp"

#include <stdexcept>

namespace ftbsc::num {

void ParameterSet::insert(const std::string& name, Tensor value) {
    if (name.empty()) throw std::invalid_argument("parameter name must not be empty");
    if (!tensors_.emplace(name, std::move(value)).second) {
        throw std::invalid_argument("duplicate parameter name '" + name + "'");
    }
}

const Tensor& ParameterSet::at(const std::string& name) const {
    auto it = tensors_.find(name);
    if (it == tensors_.end()) throw std::out_of_range("unknown parameter '" + name + "'");
    return it->second;
}

Tensor& ParameterSet::at(const std::string& name) {
    auto it = tensors_.find(name);
    if (it == tensors_.end()) throw std::out_of_range("unknown parameter '" + name + "'");
    return it->second;
}

std::size_t ParameterSet::coordinate_count() const noexcept {
    std::size_t n = 0;
    for (const auto& [_, t] : tensors_) n += t.size();
    return n;
}

std::vector<double> ParameterSet::flatten() const {
    std::vector<double> flat;
    flat.reserve(coordinate_count());
    for (const auto& [_, t] : tensors_) flat.insert(flat.end(), t.storage().begin(), t.storage().end());
    return flat;
}

void ParameterSet::unflatten(std::span<const double> values) {
    if (values.size() != coordinate_count()) {
        throw ShapeError("unflatten: expected " + std::to_string(coordinate_count()) + " values, got " +
                         std::to_string(values.size()));
    }
    std::size_t offset = 0;
    for (auto& [_, t] : tensors_) {
        for (auto& v : t.data()) v = values[offset++];
    }
}

bool ParameterSet::same_layout(const ParameterSet& other) const {
    if (tensors_.size() != other.tensors_.size()) return false;
    auto it = other.tensors_.begin();
    for (const auto& [name, t] : tensors_) {
        if (it->first != name || it->second.shape() != t.shape()) return false;
        ++it;
    }
    return true;
}

ParameterSet ParameterSet::select(std::span<const std::string> prefixes) const {
    ParameterSet out;
    for (const auto& [name, t] : tensors_) {
        for (const auto& prefix : prefixes) {
            if (name.rfind(prefix, 0) == 0) {
                out.insert(name, t);
                break;
            }
        }
    }
    return out;
}

double squared_distance(const ParameterSet& a, const ParameterSet& b) {
    if (!a.same_layout(b)) throw std::invalid_argument("squared_distance: parameter sets differ in layout");
    double total = 0.0;
    auto it = b.begin();
    for (const auto& [_, t] : a) {
        const Tensor& u = it->second;
        for (std::size_t i = 0; i < t.size(); ++i) {
            const double d = t[i] - u[i];
            total += d * d;
        }
        ++it;
    }
    return total;
}

}  // namespace ftbsc::num
