#pragma once

#include <array>
#include <span>
#include <string>
#include <vector>

#include "ftbsc/ecosyslite/dataset.hpp"
#include "ftbsc/numcore/tensor.hpp"

namespace ftbsc::eco {

/// Daily model inputs: gpp, temp, precip, radiation, soc, clay, sin(doy), cos(doy).
inline constexpr std::size_t kFeatureCount = 8;
std::string_view feature_name(std::size_t i);

/// Per-variable z-scoring fit on training data. Targets use observed cells only.
struct Standardizer {
    std::array<double, kFeatureCount> feature_mean{};
    std::array<double, kFeatureCount> feature_std{};
    std::array<double, kTargetCount> target_mean{};
    std::array<double, kTargetCount> target_std{};

    static Standardizer identity();
    static Standardizer fit(std::span<const SiteDataset> sites);

    friend bool operator==(const Standardizer&, const Standardizer&) = default;
};

/// One site-year; a training sequence.
struct SequenceRef {
    const SiteDataset* site = nullptr;
    std::size_t year = 0;
};

std::vector<SequenceRef> enumerate_sequences(std::span<const SiteDataset> sites);

/// Mini-batch of B whole site-years, T = 365.
struct Batch {
    num::Tensor drivers;                          // [T x B x F], standardized
    num::Tensor gpp;                              // [T x B], physical units
    std::array<num::Tensor, kFluxCount> flux;     // [T x B] targets, 0 where unobserved
    std::array<num::Tensor, kFluxCount> flux_mask;  // [T x B] 1 observed / 0 missing
    num::Tensor yield;                            // [B]
    num::Tensor yield_mask;                       // [B]
    std::vector<std::string> sites;               // provenance, "<region>/<site_id>:<year>"

    std::size_t steps() const { return gpp.dim(0); }
    std::size_t size() const { return gpp.dim(1); }
    const num::Tensor& target(Target t) const { return t == Target::Yield ? yield : flux[index(t)]; }
    const num::Tensor& mask(Target t) const { return t == Target::Yield ? yield_mask : flux_mask[index(t)]; }
};

Batch make_batch(std::span<const SequenceRef> sequences, const Standardizer& scaler);

}  // namespace ftbsc::eco
