#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "ftbsc/ecosyslite/dataset.hpp"

namespace ftbsc::eco {

/// Latent site parameters of the toy mechanistic model.
struct SiteParams {
    std::string site_id;
    double autotrophic_fraction = 0.45;  // a_s in (0, 1)
    double base_rh_rate = 1.1e-4;        // k_s, day^-1
    double q10 = 2.0;                    // >= 1
    double harvest_index = 0.45;         // (0, 1)
    double soc = 9000.0;                 // gC m-2
    double clay = 0.25;                  // [0, 1]
    double gpp_peak = 14.0;              // gC m-2 day-1 at full radiation

    void validate() const;
};

struct RegionSpec {
    std::string name;
    double volume_ratio = 1.0;  // relative number of site-years
};

/// Per-variable standard deviations of additive observation noise.
struct NoiseLevels {
    std::array<double, kTargetCount> sigma{0.0, 0.0, 0.0, 0.0};  // indexed by Target

    static NoiseLevels uniform(double s) { return NoiseLevels{{s, s, s, s}}; }
};

struct GeneratorConfig {
    std::vector<RegionSpec> regions{{"IA", 41.0}, {"IN", 27.0}, {"IL", 22.0}};
    std::size_t total_site_years = 90;  // shared out across regions by volume_ratio
    std::size_t years_per_site = 10;    // sites hold at most this many years
    int first_year = 2001;
    double heterogeneity = 1.0;         // between-region spread of parameter means
    double site_jitter = 0.25;          // within-region spread, relative to heterogeneity
    double driver_noise = 1.0;
    std::uint64_t seed = 7;

    void validate() const;
    /// Site-years of each region: round(total_site_years * ratio / sum of ratios).
    std::vector<std::size_t> site_years_per_region() const;
};

/// Draws the latent parameters of every site of one region.
std::vector<SiteParams> sample_region_params(std::size_t region_index, const GeneratorConfig& cfg);

/// Generates noiseless targets for each site of a region. By construction
/// nee = ra + rh - gpp and ra, rh >= 0 on every day.
std::vector<SiteDataset> generate_region(std::size_t region_index, const GeneratorConfig& cfg);

/// Simulates one site for the given years with its own RNG stream.
SiteDataset simulate_site(const SiteParams& params, const std::string& region, std::size_t region_index,
                          const GeneratorConfig& cfg, std::size_t years, std::uint64_t stream_seed);

/// Adds zero-mean Gaussian noise to observed targets only. Zero sigma leaves
/// that variable untouched bit for bit.
SiteDataset add_observation_noise(const SiteDataset& ds, const NoiseLevels& noise, std::uint64_t seed);

/// Adds a constant to every observed value of the given flux.
SiteDataset add_flux_bias(const SiteDataset& ds, Target flux, double bias);

}  // namespace ftbsc::eco
