#pragma once

#include <map>
#include <span>
#include <string>
#include <vector>

#include "ftbsc/ecosyslite/batch.hpp"
#include "ftbsc/harness/config.hpp"

namespace ftbsc::harness {

/// Train/validation sites of one region.
struct RegionSplit {
    std::vector<eco::SiteDataset> train;
    std::vector<eco::SiteDataset> validation;
};

/// Observed data split per region, the pooled views, optional synthetic
/// pretraining data and one standardizer fit on the pooled observed training
/// split. Every regime in a run sees these same objects.
struct Benchmark {
    std::vector<std::string> regions;  // in config order, exclusions removed
    std::map<std::string, RegionSplit> by_region;
    std::vector<eco::SiteDataset> pooled_train;
    std::vector<eco::SiteDataset> pooled_validation;
    std::vector<eco::SiteDataset> synthetic_train;
    std::vector<eco::SiteDataset> synthetic_validation;
    eco::Standardizer scaler;

    const RegionSplit& region(const std::string& name) const;
    /// Stable digest of every site's contents and its split membership.
    std::string fingerprint() const;
};

/// Observed sites (generated with noise, or read from CSV), grouped by region.
std::vector<std::pair<std::string, std::vector<eco::SiteDataset>>> observed_sites(const DataConfig& cfg);

Benchmark build_benchmark(const DataConfig& cfg, bool with_synthetic);

/// 16-hex-digit FNV-1a digest of a parameter set's names, shapes and values.
std::string parameter_digest(const num::ParameterSet& params);

}  // namespace ftbsc::harness
