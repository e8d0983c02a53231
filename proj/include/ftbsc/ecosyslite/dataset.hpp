#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace ftbsc::eco {

inline constexpr std::size_t kDaysPerYear = 365;

/// Supervised quantities. The first three are daily fluxes, Yield is annual.
enum class Target : std::size_t { Ra = 0, Rh = 1, Nee = 2, Yield = 3 };
inline constexpr std::size_t kTargetCount = 4;
inline constexpr std::size_t kFluxCount = 3;
inline constexpr std::array<Target, kTargetCount> kAllTargets{Target::Ra, Target::Rh, Target::Nee, Target::Yield};
inline constexpr std::array<Target, kFluxCount> kFluxTargets{Target::Ra, Target::Rh, Target::Nee};

constexpr std::size_t index(Target t) { return static_cast<std::size_t>(t); }
std::string_view name(Target t);
Target parse_target(std::string_view text);

/// Values with a per-entry availability flag. Unobserved entries hold 0.
struct ObservedSeries {
    std::vector<double> values;
    std::vector<std::uint8_t> observed;

    std::size_t size() const noexcept { return values.size(); }
    std::size_t observed_count() const noexcept;
    void push(double v, bool is_observed) {
        values.push_back(is_observed ? v : 0.0);
        observed.push_back(is_observed ? 1 : 0);
    }
    friend bool operator==(const ObservedSeries&, const ObservedSeries&) = default;
};

/// Daily drivers and targets of one site over whole 365-day years, plus
/// annual yield. Fluxes are in gC m-2 day-1, yield in Mg ha-1.
/// NEE follows Reco - GPP, so positive values are a source to the atmosphere.
struct SiteDataset {
    std::string site_id;
    std::string region;
    std::vector<int> years;

    std::vector<double> gpp;
    std::vector<double> temp;
    std::vector<double> precip;
    std::vector<double> radiation;

    ObservedSeries ra;
    ObservedSeries rh;
    ObservedSeries nee;
    ObservedSeries yield;

    double soc = 0.0;
    double clay = 0.0;

    std::size_t year_count() const noexcept { return years.size(); }
    std::size_t day_count() const noexcept { return gpp.size(); }

    const ObservedSeries& flux(Target t) const;
    ObservedSeries& flux(Target t);

    /// Throws std::invalid_argument if array lengths disagree, gpp < 0, or
    /// values are non-finite.
    void validate() const;

    /// Copy restricted to the given year indices, in the given order.
    SiteDataset subset_years(std::span<const std::size_t> year_indices) const;

    friend bool operator==(const SiteDataset&, const SiteDataset&) = default;
};

/// Hide all observations of the listed targets (e.g. a site without a flux tower).
void mask_targets(SiteDataset& ds, std::span<const Target> targets);

/// Year-level split: every year lands wholly in train or validation.
/// The train share is round(fraction * years), clamped to [1, years - 1].
std::pair<SiteDataset, SiteDataset> split(const SiteDataset& ds, double train_fraction, std::uint64_t seed);

/// Splits every site and returns (train sites, validation sites).
std::pair<std::vector<SiteDataset>, std::vector<SiteDataset>> split_all(std::span<const SiteDataset> sites,
                                                                          double train_fraction, std::uint64_t seed);

/// Stable 64-bit FNV-1a, used to derive per-site seeds.
std::uint64_t fnv1a(std::string_view text) noexcept;

}  // namespace ftbsc::eco
