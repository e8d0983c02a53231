#include "ftbsc/harness/config.hpp"

#include <fstream>
#include <set>
#include <sstream>

namespace ftbsc::harness {

using nlohmann::json;

namespace {

// Reads only known keys and fails loudly on anything else, so typos in a
// config never silently fall back to defaults.
class Section {
public:
    Section(const json& doc, std::string path) : doc_(doc), path_(std::move(path)) {
        if (!doc_.is_object()) throw ConfigError("config: '" + path_ + "' must be an object");
    }

    template <class T>
    void get(const char* key, T& out) {
        seen_.insert(key);
        if (!doc_.contains(key)) return;
        try {
            out = doc_.at(key).get<T>();
        } catch (const json::exception&) {
            throw ConfigError("config: '" + path_ + "." + key + "' has the wrong type");
        }
    }

    bool has(const char* key) {
        seen_.insert(key);
        return doc_.contains(key);
    }
    const json& at(const char* key) const { return doc_.at(key); }
    std::string path(const char* key) const { return path_ + "." + key; }

    void finish() const {
        for (const auto& [key, _] : doc_.items()) {
            if (!seen_.contains(key)) throw ConfigError("config: unknown key '" + path_ + "." + key + "'");
        }
    }

private:
    const json& doc_;
    std::string path_;
    std::set<std::string> seen_;
};

void read_model(const json& j, kgml::ModelConfig& m) {
    Section s(j, "model");
    s.get("basis_hidden", m.basis_hidden);
    s.get("head_hidden", m.head_hidden);
    s.get("seed", m.seed);
    s.finish();
}

void read_train(const json& j, train::TrainConfig& t) {
    Section s(j, "train");
    s.get("lr", t.lr);
    s.get("batch_size", t.batch_size);
    s.get("epochs", t.epochs);
    std::string text(train::name(t.optimizer));
    s.get("optimizer", text);
    try {
        t.optimizer = train::parse_optimizer(text);
    } catch (const std::invalid_argument& e) {
        throw ConfigError(std::string("config: train.optimizer: ") + e.what());
    }
    s.get("lambda", t.weights.lambda_phys);
    s.get("mu", t.weights.mu_prox);
    s.get("rho", t.weights.rho_calib);
    s.get("w_mass", t.weights.w_mass);
    s.get("w_nonneg", t.weights.w_nonneg);
    s.get("seed", t.seed);
    s.get("shuffle", t.shuffle);
    s.get("backbone_lr_multiplier", t.backbone_lr_multiplier);
    text = std::string(train::name(t.anchor_update));
    s.get("anchor_update", text);
    try {
        t.anchor_update = train::parse_anchor_update(text);
    } catch (const std::invalid_argument& e) {
        throw ConfigError(std::string("config: train.anchor_update: ") + e.what());
    }
    s.finish();
}

void read_generator(const json& j, eco::GeneratorConfig& g) {
    Section s(j, "data.generator");
    if (s.has("regions")) {
        const json& regions = s.at("regions");
        if (!regions.is_array()) throw ConfigError("config: data.generator.regions must be an array");
        g.regions.clear();
        for (const auto& r : regions) {
            Section rs(r, "data.generator.regions[]");
            eco::RegionSpec spec;
            rs.get("name", spec.name);
            rs.get("volume_ratio", spec.volume_ratio);
            rs.finish();
            g.regions.push_back(spec);
        }
    }
    s.get("total_site_years", g.total_site_years);
    s.get("years_per_site", g.years_per_site);
    s.get("first_year", g.first_year);
    s.get("heterogeneity", g.heterogeneity);
    s.get("site_jitter", g.site_jitter);
    s.get("driver_noise", g.driver_noise);
    s.get("seed", g.seed);
    s.finish();
}

void read_data(const json& j, DataConfig& d) {
    Section s(j, "data");
    if (s.has("generator")) read_generator(s.at("generator"), d.generator);
    if (s.has("noise")) {
        Section n(s.at("noise"), "data.noise");
        for (eco::Target t : eco::kAllTargets) n.get(std::string(eco::name(t)).c_str(), d.noise.sigma[eco::index(t)]);
        n.finish();
    }
    s.get("train_fraction", d.train_fraction);
    s.get("split_seed", d.split_seed);
    s.get("exclude_regions", d.exclude_regions);
    if (s.has("csv")) {
        const json& list = s.at("csv");
        if (!list.is_array()) throw ConfigError("config: data.csv must be an array");
        d.csv.clear();
        for (const auto& entry : list) {
            Section c(entry, "data.csv[]");
            CsvSource src;
            std::string daily, annual;
            c.get("region", src.region);
            c.get("daily", daily);
            c.get("annual", annual);
            c.finish();
            src.daily = daily;
            src.annual = annual;
            d.csv.push_back(std::move(src));
        }
    }
    s.get("synthetic_site_years", d.synthetic_site_years);
    s.get("synthetic_seed_offset", d.synthetic_seed_offset);
    s.finish();
}

std::string_view calibration_name(Calibration c) {
    switch (c) {
        case Calibration::Off: return "off";
        case Calibration::On: return "on";
        case Calibration::Both: return "both";
    }
    return "off";
}

void read_experiment(const json& j, ExperimentConfig& e) {
    Section s(j, "experiment");
    std::string pretrain = e.pretrain == train::PretrainMode::Joint ? "joint" : "five_step";
    s.get("pretrain", pretrain);
    if (pretrain == "joint") {
        e.pretrain = train::PretrainMode::Joint;
    } else if (pretrain == "five_step") {
        e.pretrain = train::PretrainMode::FiveStep;
    } else {
        throw ConfigError("config: experiment.pretrain must be 'joint' or 'five_step'");
    }
    std::string calib(calibration_name(e.calibration));
    s.get("calibration", calib);
    if (calib == "off") {
        e.calibration = Calibration::Off;
    } else if (calib == "on") {
        e.calibration = Calibration::On;
    } else if (calib == "both") {
        e.calibration = Calibration::Both;
    } else {
        throw ConfigError("config: experiment.calibration must be 'off', 'on' or 'both'");
    }
    s.get("finetune_epochs", e.finetune_epochs);
    s.get("seeds", e.seeds);
    std::string scope = e.sensitivity_scope == SensitivityScope::Finetune ? "finetune" : "pipeline";
    s.get("sensitivity_scope", scope);
    if (scope == "finetune") {
        e.sensitivity_scope = SensitivityScope::Finetune;
    } else if (scope == "pipeline") {
        e.sensitivity_scope = SensitivityScope::Pipeline;
    } else {
        throw ConfigError("config: experiment.sensitivity_scope must be 'finetune' or 'pipeline'");
    }
    if (s.has("sensitivity")) {
        const json& list = s.at("sensitivity");
        if (!list.is_array()) throw ConfigError("config: experiment.sensitivity must be an array");
        e.sensitivity.clear();
        for (const auto& entry : list) {
            Section st(entry, "experiment.sensitivity[]");
            SensitivitySetting setting;
            st.get("name", setting.name);
            st.get("lr", setting.lr);
            st.get("batch_size", setting.batch_size);
            st.finish();
            e.sensitivity.push_back(setting);
        }
    }
    s.finish();
}

}  // namespace

void RunConfig::validate() const {
    try {
        model.validate();
        train.validate();
        data.generator.validate();
    } catch (const std::invalid_argument& e) {
        throw ConfigError(std::string("config: ") + e.what());
    }
    if (model.input_dim != eco::kFeatureCount) throw ConfigError("config: model input_dim is fixed by the feature set");
    if (!(data.train_fraction > 0.0 && data.train_fraction < 1.0)) {
        throw ConfigError("config: data.train_fraction must lie in (0, 1)");
    }
    for (double s : data.noise.sigma) {
        if (!(s >= 0.0) || !std::isfinite(s)) throw ConfigError("config: data.noise entries must be finite and >= 0");
    }
    for (const auto& c : data.csv) {
        if (c.region.empty()) throw ConfigError("config: data.csv entries need a region");
    }
    if (data.synthetic_site_years < 1) throw ConfigError("config: data.synthetic_site_years must be >= 1");
    if (experiment.seeds.empty()) throw ConfigError("config: experiment.seeds must not be empty");
    std::set<std::string> names;
    for (const auto& s : experiment.sensitivity) {
        if (s.name.empty() || !names.insert(s.name).second) {
            throw ConfigError("config: sensitivity settings need unique, non-empty names");
        }
        if (!(s.lr >= 0.0) || s.batch_size < 1) throw ConfigError("config: sensitivity setting '" + s.name + "' is invalid");
    }
}

RunConfig config_from_json(const json& doc) {
    RunConfig cfg;
    Section root(doc, "config");
    if (root.has("model")) read_model(root.at("model"), cfg.model);
    if (root.has("train")) read_train(root.at("train"), cfg.train);
    if (root.has("data")) read_data(root.at("data"), cfg.data);
    if (root.has("experiment")) read_experiment(root.at("experiment"), cfg.experiment);
    root.finish();
    cfg.validate();
    return cfg;
}

json config_to_json(const RunConfig& cfg) {
    json regions = json::array();
    for (const auto& r : cfg.data.generator.regions) regions.push_back({{"name", r.name}, {"volume_ratio", r.volume_ratio}});
    json noise = json::object();
    for (eco::Target t : eco::kAllTargets) noise[std::string(eco::name(t))] = cfg.data.noise.sigma[eco::index(t)];
    json csv = json::array();
    for (const auto& c : cfg.data.csv) {
        csv.push_back({{"region", c.region}, {"daily", c.daily.string()}, {"annual", c.annual.string()}});
    }
    json sens = json::array();
    for (const auto& s : cfg.experiment.sensitivity) {
        sens.push_back({{"name", s.name}, {"lr", s.lr}, {"batch_size", s.batch_size}});
    }
    const auto& t = cfg.train;
    const auto& g = cfg.data.generator;
    return {
        {"model", {{"basis_hidden", cfg.model.basis_hidden}, {"head_hidden", cfg.model.head_hidden}, {"seed", cfg.model.seed}}},
        {"train",
         {{"lr", t.lr},
          {"batch_size", t.batch_size},
          {"epochs", t.epochs},
          {"optimizer", train::name(t.optimizer)},
          {"lambda", t.weights.lambda_phys},
          {"mu", t.weights.mu_prox},
          {"rho", t.weights.rho_calib},
          {"w_mass", t.weights.w_mass},
          {"w_nonneg", t.weights.w_nonneg},
          {"seed", t.seed},
          {"shuffle", t.shuffle},
          {"backbone_lr_multiplier", t.backbone_lr_multiplier},
          {"anchor_update", train::name(t.anchor_update)}}},
        {"data",
         {{"generator",
           {{"regions", regions},
            {"total_site_years", g.total_site_years},
            {"years_per_site", g.years_per_site},
            {"first_year", g.first_year},
            {"heterogeneity", g.heterogeneity},
            {"site_jitter", g.site_jitter},
            {"driver_noise", g.driver_noise},
            {"seed", g.seed}}},
          {"noise", noise},
          {"train_fraction", cfg.data.train_fraction},
          {"split_seed", cfg.data.split_seed},
          {"exclude_regions", cfg.data.exclude_regions},
          {"csv", csv},
          {"synthetic_site_years", cfg.data.synthetic_site_years},
          {"synthetic_seed_offset", cfg.data.synthetic_seed_offset}}},
        {"experiment",
         {{"pretrain", cfg.experiment.pretrain == train::PretrainMode::Joint ? "joint" : "five_step"},
          {"calibration", calibration_name(cfg.experiment.calibration)},
          {"finetune_epochs", cfg.experiment.finetune_epochs},
          {"seeds", cfg.experiment.seeds},
          {"sensitivity_scope",
           cfg.experiment.sensitivity_scope == SensitivityScope::Finetune ? "finetune" : "pipeline"},
          {"sensitivity", sens}}},
    };
}

RunConfig load_config(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("config: cannot open " + path.string());
    json doc;
    try {
        doc = json::parse(in);
    } catch (const json::parse_error& e) {
        throw ConfigError("config: " + path.string() + ": " + e.what());
    }
    return config_from_json(doc);
}

RunConfig with_seed(RunConfig cfg, std::uint64_t seed) {
    cfg.model.seed = seed;
    cfg.train.seed = seed;
    cfg.data.generator.seed = seed;
    return cfg;
}

}  // namespace ftbsc::harness
