#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>

#include "ftbsc/ecosyslite/batch.hpp"
#include "ftbsc/kgmlnet/model.hpp"

namespace ftbsc::kgml {

inline constexpr int kCheckpointVersion = 1;

class CheckpointError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

struct CheckpointMeta {
    std::uint64_t seed = 0;            // training seed
    std::uint64_t training_steps = 0;  // optimizer steps taken so far
    std::string label;
    eco::Standardizer scaler = eco::Standardizer::identity();

    friend bool operator==(const CheckpointMeta&, const CheckpointMeta&) = default;
};

/// Everything needed to rerun a trained model.
struct Checkpoint {
    ModelConfig config;
    ParameterSet params;
    std::optional<CalibrationHead> calib;
    CheckpointMeta meta;

    friend bool operator==(const Checkpoint&, const Checkpoint&) = default;
};

/// JSON document with sorted keys: version, config, meta, params
/// (name -> {shape, data}), calib (null when absent). Doubles are written in
/// shortest round-trip form, so save -> load -> save is byte-identical.
std::string save_checkpoint(const Checkpoint& ckpt);
Checkpoint load_checkpoint(std::string_view document);

void write_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path);
Checkpoint read_checkpoint(const std::filesystem::path& path);

}  // namespace ftbsc::kgml
