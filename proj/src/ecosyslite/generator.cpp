#include "ftbsc/ecosyslite/generator.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>
#include <stdexcept>

namespace ftbsc::eco {

void SiteParams::validate() const {
    auto fail = [&](const char* what) { throw std::invalid_argument("site " + site_id + ": " + what); };
    if (!(autotrophic_fraction > 0.0 && autotrophic_fraction < 1.0)) fail("autotrophic fraction outside (0,1)");
    if (!(base_rh_rate > 0.0)) fail("heterotrophic rate must be positive");
    if (!(q10 >= 1.0)) fail("q10 must be >= 1");
    if (!(harvest_index > 0.0 && harvest_index < 1.0)) fail("harvest index outside (0,1)");
    if (!(soc > 0.0)) fail("soc must be positive");
    if (!(clay >= 0.0 && clay <= 1.0)) fail("clay outside [0,1]");
    if (!(gpp_peak > 0.0)) fail("gpp peak must be positive");
}

void GeneratorConfig::validate() const {
    if (regions.empty()) throw std::invalid_argument("generator: no regions");
    for (const auto& r : regions) {
        if (!(r.volume_ratio > 0.0)) throw std::invalid_argument("generator: region " + r.name + " needs a positive ratio");
    }
    if (years_per_site < 2) throw std::invalid_argument("generator: years_per_site must be >= 2");
    if (heterogeneity < 0.0 || site_jitter < 0.0 || driver_noise < 0.0) {
        throw std::invalid_argument("generator: spreads and noise must be non-negative");
    }
    for (std::size_t n : site_years_per_region()) {
        if (n < 2) throw std::invalid_argument("generator: every region needs at least 2 site-years");
    }
}

std::vector<std::size_t> GeneratorConfig::site_years_per_region() const {
    double total_ratio = 0.0;
    for (const auto& r : regions) total_ratio += r.volume_ratio;
    std::vector<std::size_t> out;
    for (const auto& r : regions) {
        out.push_back(static_cast<std::size_t>(
            std::llround(static_cast<double>(total_site_years) * r.volume_ratio / total_ratio)));
    }
    return out;
}

namespace {

// Relative amplitude and phase of the between-region shift of each quantity.
struct ShiftPattern {
    double amplitude;
    double phase;
};
constexpr ShiftPattern kAutotrophic{0.15, 0.0};
constexpr ShiftPattern kRhRate{0.30, 2.1};
constexpr ShiftPattern kQ10{0.15, 4.0};
constexpr ShiftPattern kHarvest{0.15, 1.0};
constexpr ShiftPattern kSoc{0.20, 3.0};
constexpr ShiftPattern kClay{0.30, 5.0};
constexpr ShiftPattern kGppPeak{0.12, 0.5};
constexpr ShiftPattern kTemperature{2.0, 1.7};  // absolute, degC
constexpr ShiftPattern kPrecip{0.30, 2.6};

constexpr int kGrowingStart = 121;  // doy, inclusive
constexpr int kGrowingEnd = 273;

double region_direction(std::size_t region_index, std::size_t n_regions, double phase) {
    const double angle = 2.0 * std::numbers::pi * static_cast<double>(region_index) / static_cast<double>(n_regions);
    return std::cos(angle + phase);
}

std::mt19937_64 region_rng(std::uint64_t seed, std::size_t region_index, std::uint64_t salt) {
    std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                      static_cast<std::uint32_t>(region_index), static_cast<std::uint32_t>(salt)};
    return std::mt19937_64(seq);
}

}  // namespace

std::vector<SiteParams> sample_region_params(std::size_t region_index, const GeneratorConfig& cfg) {
    cfg.validate();
    if (region_index >= cfg.regions.size()) throw std::out_of_range("region index out of range");
    const std::size_t n_regions = cfg.regions.size();
    const std::size_t site_years = cfg.site_years_per_region()[region_index];
    const std::size_t n_sites = (site_years + cfg.years_per_site - 1) / cfg.years_per_site;

    auto rng = region_rng(cfg.seed, region_index, 0x5eed);
    std::normal_distribution<double> unit(0.0, 1.0);

    auto draw = [&](double base, ShiftPattern p) {
        const double shift = cfg.heterogeneity * p.amplitude * region_direction(region_index, n_regions, p.phase);
        const double jitter = cfg.heterogeneity * cfg.site_jitter * p.amplitude * unit(rng);
        return base * (1.0 + shift + jitter);
    };

    std::vector<SiteParams> out;
    for (std::size_t s = 0; s < n_sites; ++s) {
        SiteParams p;
        p.site_id = cfg.regions[region_index].name + "_" + std::to_string(s + 1);
        p.autotrophic_fraction = std::clamp(draw(0.45, kAutotrophic), 0.05, 0.95);
        p.base_rh_rate = std::max(draw(1.1e-4, kRhRate), 1e-6);
        p.q10 = std::max(draw(2.0, kQ10), 1.0);
        p.harvest_index = std::clamp(draw(0.45, kHarvest), 0.05, 0.95);
        p.soc = std::max(draw(9000.0, kSoc), 100.0);
        p.clay = std::clamp(draw(0.25, kClay), 0.0, 1.0);
        p.gpp_peak = std::max(draw(14.0, kGppPeak), 1.0);
        out.push_back(std::move(p));
    }
    return out;
}

SiteDataset simulate_site(const SiteParams& params, const std::string& region, std::size_t region_index,
                          const GeneratorConfig& cfg, std::size_t years, std::uint64_t stream_seed) {
    params.validate();
    const std::size_t n_regions = cfg.regions.size();
    const double temp_offset = cfg.heterogeneity * kTemperature.amplitude *
                               region_direction(region_index, n_regions, kTemperature.phase);
    const double precip_scale =
        1.0 + cfg.heterogeneity * kPrecip.amplitude * region_direction(region_index, n_regions, kPrecip.phase);

    std::mt19937_64 rng(stream_seed);
    std::normal_distribution<double> unit(0.0, 1.0);
    const double noise = cfg.driver_noise;

    SiteDataset ds;
    ds.site_id = params.site_id;
    ds.region = region;
    ds.soc = params.soc;
    ds.clay = params.clay;

    for (std::size_t y = 0; y < years; ++y) {
        ds.years.push_back(cfg.first_year + static_cast<int>(y));
        double growing_npp = 0.0;
        for (std::size_t d = 0; d < kDaysPerYear; ++d) {
            const double doy = static_cast<double>(d + 1);
            const double season = std::sin(2.0 * std::numbers::pi * (doy - 105.0) / 365.0);
            const double temp = 10.0 + 14.0 * season + temp_offset + 2.5 * noise * unit(rng);
            const double radiation = std::max(1.0, 16.0 + 9.0 * season + 3.0 * noise * unit(rng));
            const double precip = precip_scale * std::exp(0.3 + 0.9 * unit(rng));
            const double bell = std::exp(-std::pow((doy - 195.0) / 40.0, 2.0));
            const double gpp =
                std::max(0.0, params.gpp_peak * bell * (radiation / 25.0) * (1.0 + 0.1 * noise * unit(rng)));

            const double ra = std::max(0.0, params.autotrophic_fraction * gpp * (1.0 + 0.02 * (temp - 20.0)));
            const double moisture = precip / (precip + 5.0);
            const double rh = params.base_rh_rate * params.soc * std::pow(params.q10, (temp - 10.0) / 10.0) * moisture;
            const double nee = ra + rh - gpp;

            ds.gpp.push_back(gpp);
            ds.temp.push_back(temp);
            ds.precip.push_back(precip);
            ds.radiation.push_back(radiation);
            ds.ra.push(ra, true);
            ds.rh.push(rh, true);
            ds.nee.push(nee, true);
            if (doy >= kGrowingStart && doy <= kGrowingEnd) growing_npp += gpp - ra;
        }
        ds.yield.push(params.harvest_index * growing_npp * 0.01, true);
    }
    return ds;
}

std::vector<SiteDataset> generate_region(std::size_t region_index, const GeneratorConfig& cfg) {
    const auto params = sample_region_params(region_index, cfg);
    const std::size_t site_years = cfg.site_years_per_region()[region_index];
    const std::size_t n_sites = params.size();
    const std::string& region = cfg.regions[region_index].name;

    auto seeds = region_rng(cfg.seed, region_index, 0xda7a);
    std::vector<SiteDataset> out;
    for (std::size_t s = 0; s < n_sites; ++s) {
        const std::size_t years = site_years / n_sites + (s < site_years % n_sites ? 1 : 0);
        out.push_back(simulate_site(params[s], region, region_index, cfg, years, seeds()));
    }
    return out;
}

SiteDataset add_observation_noise(const SiteDataset& ds, const NoiseLevels& noise, std::uint64_t seed) {
    for (double s : noise.sigma) {
        if (!(s >= 0.0)) throw std::invalid_argument("observation noise must be non-negative");
    }
    SiteDataset out = ds;
    std::mt19937_64 rng(seed ^ fnv1a(ds.site_id));
    std::normal_distribution<double> unit(0.0, 1.0);
    for (Target t : kAllTargets) {
        const double sigma = noise.sigma[index(t)];
        if (sigma == 0.0) continue;
        ObservedSeries& series = out.flux(t);
        for (std::size_t i = 0; i < series.size(); ++i) {
            const double e = sigma * unit(rng);
            if (series.observed[i]) series.values[i] += e;
        }
    }
    return out;
}

SiteDataset add_flux_bias(const SiteDataset& ds, Target flux, double bias) {
    SiteDataset out = ds;
    ObservedSeries& series = out.flux(flux);
    for (std::size_t i = 0; i < series.size(); ++i) {
        if (series.observed[i]) series.values[i] += bias;
    }
    return out;
}

}  // namespace ftbsc::eco
