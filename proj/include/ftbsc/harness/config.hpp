#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "ftbsc/ecosyslite/generator.hpp"
#include "ftbsc/kgmlnet/model.hpp"
#include "ftbsc/trainer/trainer.hpp"

namespace ftbsc::harness {

/// Bad or inconsistent configuration. The CLI maps it to the usage exit code.
class ConfigError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// One region read from disk instead of generated.
struct CsvSource {
    std::string region;
    std::filesystem::path daily;
    std::filesystem::path annual;
};

struct DataConfig {
    eco::GeneratorConfig generator;
    /// Observation noise on the "observed" data, per target (ra, rh, nee, yield).
    eco::NoiseLevels noise{{0.2, 0.05, 0.2, 0.3}};
    double train_fraction = 0.8;
    std::uint64_t split_seed = 1;
    std::vector<std::string> exclude_regions;
    std::vector<CsvSource> csv;  // non-empty: replaces the generator for observed data
    /// Stand-in process-model output for five-step pretraining: noiseless,
    /// drawn with generator.seed + synthetic_seed_offset.
    std::size_t synthetic_site_years = 90;
    std::uint64_t synthetic_seed_offset = 1000;
};

enum class Calibration { Off, On, Both };

/// What the sensitivity settings perturb: site fine-tuning (and the SiteOnly
/// comparator) from one shared global model, or the whole pipeline including
/// global pretraining.
enum class SensitivityScope { Finetune, Pipeline };

struct SensitivitySetting {
    std::string name;
    double lr = 1e-3;
    std::size_t batch_size = 32;
};

struct ExperimentConfig {
    train::PretrainMode pretrain = train::PretrainMode::Joint;
    Calibration calibration = Calibration::Off;
    std::size_t finetune_epochs = 0;  // 0: same as train.epochs
    std::vector<std::uint64_t> seeds{0, 1, 2};
    SensitivityScope sensitivity_scope = SensitivityScope::Finetune;
    std::vector<SensitivitySetting> sensitivity{
        {"baseline", 1e-3, 32}, {"A", 1e-3, 16}, {"B", 1e-2, 32}};
};

struct RunConfig {
    kgml::ModelConfig model;
    train::TrainConfig train;
    DataConfig data;
    ExperimentConfig experiment;

    /// Throws ConfigError.
    void validate() const;
    std::size_t finetune_epochs() const {
        return experiment.finetune_epochs > 0 ? experiment.finetune_epochs : train.epochs;
    }
};

/// Defaults for every omitted key; unknown keys are rejected.
RunConfig config_from_json(const nlohmann::json& doc);
nlohmann::json config_to_json(const RunConfig& cfg);
RunConfig load_config(const std::filesystem::path& path);

/// Sets the model, training and generator seeds to `seed`.
RunConfig with_seed(RunConfig cfg, std::uint64_t seed);

}  // namespace ftbsc::harness
