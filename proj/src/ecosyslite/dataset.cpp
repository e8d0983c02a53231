#include "ftbsc/ecosyslite/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <stdexcept>

namespace ftbsc::eco {

std::string_view name(Target t) {
    switch (t) {
        case Target::Ra: return "ra";
        case Target::Rh: return "rh";
        case Target::Nee: return "nee";
        case Target::Yield: return "yield";
    }
    return "?";
}

Target parse_target(std::string_view text) {
    for (Target t : kAllTargets) {
        if (name(t) == text) return t;
    }
    throw std::invalid_argument("unknown target '" + std::string(text) + "' (expected ra, rh, nee or yield)");
}

std::size_t ObservedSeries::observed_count() const noexcept {
    return static_cast<std::size_t>(std::count(observed.begin(), observed.end(), std::uint8_t{1}));
}

const ObservedSeries& SiteDataset::flux(Target t) const {
    switch (t) {
        case Target::Ra: return ra;
        case Target::Rh: return rh;
        case Target::Nee: return nee;
        case Target::Yield: return yield;
    }
    throw std::invalid_argument("bad target");
}

ObservedSeries& SiteDataset::flux(Target t) {
    return const_cast<ObservedSeries&>(std::as_const(*this).flux(t));
}

namespace {
void check_finite(const std::vector<double>& v, const std::string& what, const std::string& site) {
    for (double x : v) {
        if (!std::isfinite(x)) throw std::invalid_argument("site " + site + ": non-finite value in " + what);
    }
}
}  // namespace

void SiteDataset::validate() const {
    const std::size_t days = years.size() * kDaysPerYear;
    auto check_len = [&](std::size_t n, const char* what, std::size_t expected) {
        if (n != expected) {
            throw std::invalid_argument("site " + site_id + ": " + what + " has " + std::to_string(n) +
                                        " entries, expected " + std::to_string(expected));
        }
    };
    check_len(gpp.size(), "gpp", days);
    check_len(temp.size(), "temp", days);
    check_len(precip.size(), "precip", days);
    check_len(radiation.size(), "radiation", days);
    for (Target t : kFluxTargets) {
        check_len(flux(t).values.size(), "flux values", days);
        check_len(flux(t).observed.size(), "flux mask", days);
    }
    check_len(yield.values.size(), "yield", years.size());
    check_len(yield.observed.size(), "yield mask", years.size());
    for (double g : gpp) {
        if (g < 0.0) throw std::invalid_argument("site " + site_id + ": negative gpp");
    }
    check_finite(gpp, "gpp", site_id);
    check_finite(temp, "temp", site_id);
    check_finite(precip, "precip", site_id);
    check_finite(radiation, "radiation", site_id);
    for (Target t : kAllTargets) check_finite(flux(t).values, std::string(name(t)), site_id);
}

SiteDataset SiteDataset::subset_years(std::span<const std::size_t> year_indices) const {
    SiteDataset out;
    out.site_id = site_id;
    out.region = region;
    out.soc = soc;
    out.clay = clay;
    for (std::size_t y : year_indices) {
        if (y >= years.size()) throw std::out_of_range("subset_years: year index out of range");
        out.years.push_back(years[y]);
        const auto first = static_cast<std::ptrdiff_t>(y * kDaysPerYear);
        const auto last = first + static_cast<std::ptrdiff_t>(kDaysPerYear);
        auto copy = [&](const std::vector<double>& src, std::vector<double>& dst) {
            dst.insert(dst.end(), src.begin() + first, src.begin() + last);
        };
        copy(gpp, out.gpp);
        copy(temp, out.temp);
        copy(precip, out.precip);
        copy(radiation, out.radiation);
        for (Target t : kFluxTargets) {
            const ObservedSeries& src = flux(t);
            ObservedSeries& dst = out.flux(t);
            dst.values.insert(dst.values.end(), src.values.begin() + first, src.values.begin() + last);
            dst.observed.insert(dst.observed.end(), src.observed.begin() + first, src.observed.begin() + last);
        }
        out.yield.values.push_back(yield.values[y]);
        out.yield.observed.push_back(yield.observed[y]);
    }
    return out;
}

void mask_targets(SiteDataset& ds, std::span<const Target> targets) {
    for (Target t : targets) {
        ObservedSeries& s = ds.flux(t);
        std::fill(s.values.begin(), s.values.end(), 0.0);
        std::fill(s.observed.begin(), s.observed.end(), std::uint8_t{0});
    }
}

std::uint64_t fnv1a(std::string_view text) noexcept {
    std::uint64_t h = 1469598103934665603ULL;
    for (unsigned char c : text) {
        h ^= c;
        h *= 1099511628211ULL;
    }
    return h;
}

std::pair<SiteDataset, SiteDataset> split(const SiteDataset& ds, double train_fraction, std::uint64_t seed) {
    if (!(train_fraction > 0.0 && train_fraction < 1.0)) {
        throw std::invalid_argument("split: train fraction must lie in (0, 1)");
    }
    const std::size_t n = ds.year_count();
    if (n < 2) throw std::invalid_argument("split: site " + ds.site_id + " has fewer than 2 years");

    auto n_train = static_cast<std::size_t>(std::llround(train_fraction * static_cast<double>(n)));
    n_train = std::clamp<std::size_t>(n_train, 1, n - 1);

    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::mt19937_64 rng(seed ^ fnv1a(ds.site_id));
    std::shuffle(order.begin(), order.end(), rng);

    std::vector<std::size_t> train(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(n_train));
    std::vector<std::size_t> valid(order.begin() + static_cast<std::ptrdiff_t>(n_train), order.end());
    std::sort(train.begin(), train.end());
    std::sort(valid.begin(), valid.end());
    return {ds.subset_years(train), ds.subset_years(valid)};
}

std::pair<std::vector<SiteDataset>, std::vector<SiteDataset>> split_all(std::span<const SiteDataset> sites,
                                                                          double train_fraction, std::uint64_t seed) {
    std::pair<std::vector<SiteDataset>, std::vector<SiteDataset>> out;
    for (const auto& s : sites) {
        auto [train, valid] = split(s, train_fraction, seed);
        out.first.push_back(std::move(train));
        out.second.push_back(std::move(valid));
    }
    return out;
}

}  // namespace ftbsc::eco
