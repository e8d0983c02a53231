#include "ftbsc/harness/data.hpp"

#include <algorithm>
#include <cstring>
#include <cstdio>
#include <stdexcept>

#include "ftbsc/ecosyslite/csv_io.hpp"
#include "ftbsc/ecosyslite/generator.hpp"

namespace ftbsc::harness {

namespace {

bool excluded(const DataConfig& cfg, const std::string& region) {
    return std::find(cfg.exclude_regions.begin(), cfg.exclude_regions.end(), region) != cfg.exclude_regions.end();
}

struct Fnv {
    std::uint64_t h = 1469598103934665603ULL;
    void bytes(const void* p, std::size_t n) {
        const auto* c = static_cast<const unsigned char*>(p);
        for (std::size_t i = 0; i < n; ++i) {
            h ^= c[i];
            h *= 1099511628211ULL;
        }
    }
    void text(const std::string& s) {
        bytes(s.data(), s.size());
        bytes("\0", 1);
    }
    template <class T>
    void value(T v) {
        bytes(&v, sizeof v);
    }
    std::string hex() const {
        char buf[17];
        std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
        return buf;
    }
};

}  // namespace

const RegionSplit& Benchmark::region(const std::string& name) const {
    auto it = by_region.find(name);
    if (it == by_region.end()) throw std::invalid_argument("unknown region '" + name + "'");
    return it->second;
}

std::string Benchmark::fingerprint() const {
    Fnv f;
    for (const auto& r : regions) {
        f.text(r);
        for (const auto* part : {&region(r).train, &region(r).validation}) {
            f.text("|");
            for (const auto& s : *part) {
                f.text(s.site_id);
                for (int y : s.years) f.value(y);
                for (const auto* series : {&s.gpp, &s.temp, &s.precip, &s.radiation}) {
                    for (double v : *series) f.value(v);
                }
                for (eco::Target t : eco::kAllTargets) {
                    for (double v : s.flux(t).values) f.value(v);
                    for (auto m : s.flux(t).observed) f.value(m);
                }
                f.value(s.soc);
                f.value(s.clay);
            }
        }
    }
    return f.hex();
}

std::string parameter_digest(const num::ParameterSet& params) {
    Fnv f;
    for (const auto& [name, t] : params) {
        f.text(name);
        for (std::size_t d : t.shape()) f.value(d);
        for (double v : t.data()) f.value(v);
    }
    return f.hex();
}

std::vector<std::pair<std::string, std::vector<eco::SiteDataset>>> observed_sites(const DataConfig& cfg) {
    std::vector<std::pair<std::string, std::vector<eco::SiteDataset>>> out;
    if (!cfg.csv.empty()) {
        for (const auto& src : cfg.csv) {
            if (excluded(cfg, src.region)) continue;
            out.emplace_back(src.region, eco::read_csv(src.daily, src.annual, src.region));
        }
        return out;
    }
    for (std::size_t r = 0; r < cfg.generator.regions.size(); ++r) {
        const std::string& name = cfg.generator.regions[r].name;
        if (excluded(cfg, name)) continue;
        std::vector<eco::SiteDataset> sites;
        for (const auto& s : eco::generate_region(r, cfg.generator)) {
            sites.push_back(eco::add_observation_noise(s, cfg.noise, cfg.generator.seed ^ eco::fnv1a(s.site_id)));
        }
        out.emplace_back(name, std::move(sites));
    }
    return out;
}

Benchmark build_benchmark(const DataConfig& cfg, bool with_synthetic) {
    Benchmark b;
    for (auto& [name, sites] : observed_sites(cfg)) {
        if (b.by_region.contains(name)) throw ConfigError("data: region '" + name + "' appears twice");
        if (sites.empty()) throw ConfigError("data: region '" + name + "' has no sites");
        RegionSplit split;
        std::tie(split.train, split.validation) = eco::split_all(sites, cfg.train_fraction, cfg.split_seed);
        b.pooled_train.insert(b.pooled_train.end(), split.train.begin(), split.train.end());
        b.pooled_validation.insert(b.pooled_validation.end(), split.validation.begin(), split.validation.end());
        b.regions.push_back(name);
        b.by_region.emplace(name, std::move(split));
    }
    if (b.regions.empty()) throw ConfigError("data: every region is excluded");
    b.scaler = eco::Standardizer::fit(b.pooled_train);

    if (with_synthetic) {
        eco::GeneratorConfig g = cfg.generator;
        g.seed += cfg.synthetic_seed_offset;
        g.total_site_years = cfg.synthetic_site_years;
        std::vector<eco::SiteDataset> sites;
        for (std::size_t r = 0; r < g.regions.size(); ++r) {
            if (excluded(cfg, g.regions[r].name)) continue;
            for (auto& s : eco::generate_region(r, g)) sites.push_back(std::move(s));
        }
        std::tie(b.synthetic_train, b.synthetic_validation) = eco::split_all(sites, cfg.train_fraction, cfg.split_seed);
    }
    return b;
}

}  // namespace ftbsc::harness
