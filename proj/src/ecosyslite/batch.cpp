#include "ftbsc/ecosyslite/batch.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>

namespace ftbsc::eco {

std::string_view feature_name(std::size_t i) {
    static constexpr std::array<std::string_view, kFeatureCount> kNames{
        "gpp", "temp", "precip", "radiation", "soc", "clay", "doy_sin", "doy_cos"};
    return kNames.at(i);
}

namespace {

std::array<double, kFeatureCount> raw_features(const SiteDataset& s, std::size_t year, std::size_t day) {
    const std::size_t i = year * kDaysPerYear + day;
    const double angle = 2.0 * std::numbers::pi * static_cast<double>(day + 1) / static_cast<double>(kDaysPerYear);
    return {s.gpp[i], s.temp[i], s.precip[i], s.radiation[i], s.soc, s.clay, std::sin(angle), std::cos(angle)};
}

struct Moments {
    double sum = 0.0;
    double sum_sq = 0.0;
    double n = 0.0;

    void add(double v) {
        sum += v;
        sum_sq += v * v;
        n += 1.0;
    }
    double mean() const { return n > 0.0 ? sum / n : 0.0; }
    double stddev() const {
        if (n < 2.0) return 1.0;
        const double m = mean();
        const double var = std::max(0.0, sum_sq / n - m * m);
        const double sd = std::sqrt(var);
        return sd > 1e-12 ? sd : 1.0;
    }
};

}  // namespace

Standardizer Standardizer::identity() {
    Standardizer s;
    s.feature_std.fill(1.0);
    s.target_std.fill(1.0);
    return s;
}

Standardizer Standardizer::fit(std::span<const SiteDataset> sites) {
    std::array<Moments, kFeatureCount> features{};
    std::array<Moments, kTargetCount> targets{};
    for (const auto& s : sites) {
        for (std::size_t y = 0; y < s.year_count(); ++y) {
            for (std::size_t d = 0; d < kDaysPerYear; ++d) {
                const auto f = raw_features(s, y, d);
                for (std::size_t k = 0; k < kFeatureCount; ++k) features[k].add(f[k]);
            }
        }
        for (Target t : kAllTargets) {
            const ObservedSeries& series = s.flux(t);
            for (std::size_t i = 0; i < series.size(); ++i) {
                if (series.observed[i]) targets[index(t)].add(series.values[i]);
            }
        }
    }
    Standardizer out;
    for (std::size_t k = 0; k < kFeatureCount; ++k) {
        out.feature_mean[k] = features[k].mean();
        out.feature_std[k] = features[k].stddev();
    }
    for (std::size_t k = 0; k < kTargetCount; ++k) {
        out.target_mean[k] = targets[k].mean();
        out.target_std[k] = targets[k].stddev();
    }
    return out;
}

std::vector<SequenceRef> enumerate_sequences(std::span<const SiteDataset> sites) {
    std::vector<SequenceRef> out;
    for (const auto& s : sites) {
        for (std::size_t y = 0; y < s.year_count(); ++y) out.push_back({&s, y});
    }
    return out;
}

Batch make_batch(std::span<const SequenceRef> sequences, const Standardizer& scaler) {
    if (sequences.empty()) throw std::invalid_argument("make_batch: no sequences");
    const std::size_t T = kDaysPerYear;
    const std::size_t B = sequences.size();
    Batch batch;
    batch.drivers = num::Tensor({T, B, kFeatureCount});
    batch.gpp = num::Tensor({T, B});
    for (std::size_t k = 0; k < kFluxCount; ++k) {
        batch.flux[k] = num::Tensor({T, B});
        batch.flux_mask[k] = num::Tensor({T, B});
    }
    batch.yield = num::Tensor({B});
    batch.yield_mask = num::Tensor({B});

    for (std::size_t b = 0; b < B; ++b) {
        const SiteDataset& s = *sequences[b].site;
        const std::size_t y = sequences[b].year;
        if (y >= s.year_count()) throw std::out_of_range("make_batch: year index out of range");
        batch.sites.push_back(s.region + "/" + s.site_id + ":" + std::to_string(s.years[y]));
        for (std::size_t t = 0; t < T; ++t) {
            const auto f = raw_features(s, y, t);
            double* dst = &batch.drivers[(t * B + b) * kFeatureCount];
            for (std::size_t k = 0; k < kFeatureCount; ++k) {
                dst[k] = (f[k] - scaler.feature_mean[k]) / scaler.feature_std[k];
            }
            const std::size_t i = y * kDaysPerYear + t;
            batch.gpp(t, b) = s.gpp[i];
            for (std::size_t k = 0; k < kFluxCount; ++k) {
                const ObservedSeries& series = s.flux(kFluxTargets[k]);
                batch.flux[k](t, b) = series.observed[i] ? series.values[i] : 0.0;
                batch.flux_mask[k](t, b) = series.observed[i] ? 1.0 : 0.0;
            }
        }
        batch.yield[b] = s.yield.observed[y] ? s.yield.values[y] : 0.0;
        batch.yield_mask[b] = s.yield.observed[y] ? 1.0 : 0.0;
    }
    return batch;
}

}  // namespace ftbsc::eco
