#pragma once

#include <vector>

#include "ftbsc/ecosyslite/generator.hpp"
#include "ftbsc/trainer/trainer.hpp"

namespace ftbsc::testkit {

struct Pooled {
    std::vector<eco::SiteDataset> train;
    std::vector<eco::SiteDataset> validation;
    eco::Standardizer scaler;
};

inline Pooled pooled_benchmark(const eco::GeneratorConfig& cfg, double noise = 0.0, std::uint64_t split_seed = 1) {
    std::vector<eco::SiteDataset> all;
    for (std::size_t r = 0; r < cfg.regions.size(); ++r) {
        for (auto& s : eco::generate_region(r, cfg)) {
            all.push_back(noise > 0.0 ? eco::add_observation_noise(s, eco::NoiseLevels::uniform(noise), cfg.seed + 1) : s);
        }
    }
    Pooled p;
    std::tie(p.train, p.validation) = eco::split_all(all, 0.8, split_seed);
    p.scaler = eco::Standardizer::fit(p.train);
    return p;
}

inline kgml::ModelConfig small_model(std::uint64_t seed = 1, std::size_t basis = 16, std::size_t head = 8) {
    kgml::ModelConfig m;
    m.basis_hidden = basis;
    m.head_hidden = head;
    m.seed = seed;
    return m;
}

inline train::ModelState fresh(const kgml::ModelConfig& m) { return {kgml::init_model(m), std::nullopt}; }

}  // namespace ftbsc::testkit
