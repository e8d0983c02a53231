#include "ftbsc/kgmlnet/checkpoint.hpp"

#include <fstream>
#include <sstream>

#include <json.hpp>

namespace ftbsc::kgml {

using nlohmann::json;

namespace {

template <std::size_t N>
json to_array(const std::array<double, N>& a) {
    return json(std::vector<double>(a.begin(), a.end()));
}

template <std::size_t N>
std::array<double, N> from_array(const json& j, const char* what) {
    if (!j.is_array() || j.size() != N) {
        throw CheckpointError(std::string("checkpoint: '") + what + "' must be an array of " + std::to_string(N) + " numbers");
    }
    std::array<double, N> out{};
    for (std::size_t i = 0; i < N; ++i) out[i] = j[i].get<double>();
    return out;
}

const json& field(const json& obj, const char* key) {
    if (!obj.is_object() || !obj.contains(key)) throw CheckpointError(std::string("checkpoint: missing field '") + key + "'");
    return obj.at(key);
}

}  // namespace

std::string save_checkpoint(const Checkpoint& ckpt) {
    ckpt.config.validate();
    check_layout(ckpt.params, ckpt.config);

    json doc;
    doc["version"] = kCheckpointVersion;
    doc["config"] = {{"input_dim", ckpt.config.input_dim},
                     {"basis_hidden", ckpt.config.basis_hidden},
                     {"head_hidden", ckpt.config.head_hidden},
                     {"with_calibration", ckpt.config.with_calibration},
                     {"seed", ckpt.config.seed}};
    const auto& sc = ckpt.meta.scaler;
    doc["meta"] = {{"seed", ckpt.meta.seed},
                   {"training_steps", ckpt.meta.training_steps},
                   {"label", ckpt.meta.label},
                   {"standardizer",
                    {{"feature_mean", to_array(sc.feature_mean)},
                     {"feature_std", to_array(sc.feature_std)},
                     {"target_mean", to_array(sc.target_mean)},
                     {"target_std", to_array(sc.target_std)}}}};
    json params = json::object();
    for (const auto& [name, t] : ckpt.params) {
        params[name] = {{"shape", t.shape()}, {"data", t.storage()}};
    }
    doc["params"] = std::move(params);
    if (ckpt.calib) {
        doc["calib"] = {{"scale", to_array(ckpt.calib->scale)}, {"offset", to_array(ckpt.calib->offset)}};
    } else {
        doc["calib"] = nullptr;
    }
    return doc.dump(1) + "\n";
}

Checkpoint load_checkpoint(std::string_view document) {
    json doc;
    try {
        doc = json::parse(document);
    } catch (const json::parse_error& e) {
        throw CheckpointError(std::string("checkpoint: malformed document: ") + e.what());
    }
    try {
        const int version = field(doc, "version").get<int>();
        if (version != kCheckpointVersion) {
            throw CheckpointError("checkpoint: unsupported version " + std::to_string(version) + " (expected " +
                                  std::to_string(kCheckpointVersion) + ")");
        }
        Checkpoint ckpt;
        const json& cfg = field(doc, "config");
        ckpt.config.input_dim = field(cfg, "input_dim").get<std::size_t>();
        ckpt.config.basis_hidden = field(cfg, "basis_hidden").get<std::size_t>();
        ckpt.config.head_hidden = field(cfg, "head_hidden").get<std::size_t>();
        ckpt.config.with_calibration = field(cfg, "with_calibration").get<bool>();
        ckpt.config.seed = field(cfg, "seed").get<std::uint64_t>();
        ckpt.config.validate();

        const json& meta = field(doc, "meta");
        ckpt.meta.seed = field(meta, "seed").get<std::uint64_t>();
        ckpt.meta.training_steps = field(meta, "training_steps").get<std::uint64_t>();
        ckpt.meta.label = field(meta, "label").get<std::string>();
        const json& sc = field(meta, "standardizer");
        ckpt.meta.scaler.feature_mean = from_array<eco::kFeatureCount>(field(sc, "feature_mean"), "feature_mean");
        ckpt.meta.scaler.feature_std = from_array<eco::kFeatureCount>(field(sc, "feature_std"), "feature_std");
        ckpt.meta.scaler.target_mean = from_array<eco::kTargetCount>(field(sc, "target_mean"), "target_mean");
        ckpt.meta.scaler.target_std = from_array<eco::kTargetCount>(field(sc, "target_std"), "target_std");

        const json& params = field(doc, "params");
        if (!params.is_object()) throw CheckpointError("checkpoint: 'params' must be an object");
        for (const auto& [name, entry] : params.items()) {
            auto shape = field(entry, "shape").get<num::Shape>();
            auto data = field(entry, "data").get<std::vector<double>>();
            try {
                ckpt.params.insert(name, num::Tensor(std::move(shape), std::move(data)));
            } catch (const num::ShapeError& e) {
                throw CheckpointError("checkpoint: parameter '" + name + "': " + e.what());
            }
        }
        try {
            check_layout(ckpt.params, ckpt.config);
        } catch (const num::ShapeError& e) {
            throw CheckpointError(std::string("checkpoint: shape error: ") + e.what());
        }

        const json& calib = field(doc, "calib");
        if (!calib.is_null()) {
            CalibrationHead head;
            head.scale = from_array<eco::kFluxCount>(field(calib, "scale"), "calib.scale");
            head.offset = from_array<eco::kFluxCount>(field(calib, "offset"), "calib.offset");
            head.validate();
            ckpt.calib = head;
        }
        return ckpt;
    } catch (const json::exception& e) {
        throw CheckpointError(std::string("checkpoint: malformed document: ") + e.what());
    }
}

void write_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw CheckpointError("cannot write " + path.string());
    out << save_checkpoint(ckpt);
    if (!out) throw CheckpointError("write failure on " + path.string());
}

Checkpoint read_checkpoint(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw CheckpointError("cannot open " + path.string());
    std::ostringstream buf;
    buf << in.rdbuf();
    return load_checkpoint(buf.str());
}

}  // namespace ftbsc::kgml
