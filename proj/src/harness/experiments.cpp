#include "ftbsc/harness/experiments.hpp"

#include <algorithm>
#include <chrono>
#include <functional>
#include <stdexcept>

namespace ftbsc::harness {

using obj::TargetSet;
using train::ModelState;
using train::TrainConfig;

std::string Regime::label() const {
    switch (kind) {
        case RegimeKind::SiteOnly: return "site_only";
        case RegimeKind::GlobalOnly: return "global_only";
        case RegimeKind::CrossRegional: return "cross_regional";
        case RegimeKind::Ftbsc: return calibrated ? "ftbsc_calib" : "ftbsc";
    }
    return "?";
}

void Regime::validate() const {
    if (test_region.empty()) throw std::invalid_argument("regime: test region is empty");
    if (calibrated && kind != RegimeKind::Ftbsc) throw std::invalid_argument("regime: only ftbsc takes a calibration head");
    switch (kind) {
        case RegimeKind::CrossRegional:
            if (train_region == test_region) throw std::invalid_argument("regime: cross-regional train and test must differ");
            break;
        case RegimeKind::SiteOnly:
        case RegimeKind::Ftbsc:
            if (train_region != test_region) throw std::invalid_argument("regime: " + label() + " tests on its own region");
            break;
        case RegimeKind::GlobalOnly: break;
    }
}

Regime parse_regime(const std::string& label, const std::string& train_region, const std::string& test_region) {
    Regime r{RegimeKind::SiteOnly, train_region, test_region, false};
    if (label == "site_only") {
        r.kind = RegimeKind::SiteOnly;
    } else if (label == "global_only") {
        r.kind = RegimeKind::GlobalOnly;
    } else if (label == "cross_regional") {
        r.kind = RegimeKind::CrossRegional;
    } else if (label == "ftbsc" || label == "ftbsc_calib") {
        r.kind = RegimeKind::Ftbsc;
        r.calibrated = label == "ftbsc_calib";
    } else {
        throw std::invalid_argument("unknown regime '" + label + "'");
    }
    r.validate();
    return r;
}

std::size_t ExperimentReport::failures() const {
    return static_cast<std::size_t>(std::count_if(cells.begin(), cells.end(), [](const auto& c) { return !c.ok(); }));
}

const CellResult* ExperimentReport::find(const std::string& experiment, const Regime& regime, std::uint64_t seed,
                                         const std::string& setting) const {
    for (const auto& c : cells) {
        if (c.experiment == experiment && c.regime == regime && c.seed == seed && c.setting == setting) return &c;
    }
    return nullptr;
}

double delta_pct(double mse_site_only, double mse) { return 100.0 * (mse_site_only - mse) / mse_site_only; }

void fill_deltas(ExperimentReport& report) {
    for (auto& c : report.cells) {
        c.delta_pct = kNaN;
        if (!c.ok()) continue;
        const CellResult* base =
            report.find(c.experiment, Regime::site_only(c.regime.test_region), c.seed, c.setting);
        if (base != nullptr && base->ok()) c.delta_pct = delta_pct(base->val_mse, c.val_mse);
    }
}

namespace {

// Row the trainer selected in the last phase: the first minimum of val_mse,
// or the final row when there is no validation signal.
const train::TraceRow& selected_row(const train::TrainTrace& trace) {
    if (trace.rows.empty()) throw std::logic_error("empty trace");
    const std::size_t start = trace.phase_starts.empty() ? 0 : trace.phase_starts.back();
    const train::TraceRow* best = nullptr;
    for (std::size_t i = start; i < trace.rows.size(); ++i) {
        const auto& r = trace.rows[i];
        if (std::isnan(r.val_mse)) continue;
        if (best == nullptr || r.val_mse < best->val_mse) best = &r;
    }
    return best != nullptr ? *best : trace.rows.back();
}

struct Trained {
    std::string id;
    ModelState state;
    train::TrainTrace trace;
    std::uint64_t steps = 0;
    std::string error;
};

// Trains and evaluates the cells of one seed/setting against one benchmark.
class Runner {
public:
    Runner(const RunConfig& cfg, const Benchmark& data, ExperimentReport& report, std::string experiment,
           std::uint64_t seed, std::string setting, std::string prefix)
        : cfg_(cfg),
          data_(data),
          report_(report),
          experiment_(std::move(experiment)),
          seed_(seed),
          setting_(std::move(setting)),
          prefix_(std::move(prefix)),
          init_{kgml::init_model(cfg.model), std::nullopt} {}

    const ModelState& init() const { return init_; }

    const Trained& site_only(const std::string& region) {
        return cached("site_only-" + region, [&] {
            TrainConfig tc = cfg_.train;
            tc.weights.mu_prox = 0.0;
            tc.weights.rho_calib = 0.0;
            const auto& split = data_.region(region);
            train::PhaseSpec spec{"site_only:" + region, TargetSet::all(), std::nullopt, nullptr};
            auto r = train::train_phase(init_, {split.train, split.validation}, spec, tc, data_.scaler);
            return std::tuple{std::move(r.best), std::move(r.trace), r.steps};
        });
    }

    const Trained& global() {
        return cached("global", [&] {
            auto r = train::pretrain_global(init_,
                                            {data_.pooled_train, data_.pooled_validation, data_.synthetic_train,
                                             data_.synthetic_validation},
                                            cfg_.train, data_.scaler, cfg_.experiment.pretrain);
            return std::tuple{std::move(r.state), std::move(r.trace), r.steps};
        });
    }

    /// Uses an already trained global model instead of pretraining again.
    void adopt_global(const Trained& g) { models_.insert_or_assign("global", g); }

    const Trained& ftbsc(const std::string& region, bool calibrated) {
        const std::string id = std::string(calibrated ? "ftbsc_calib-" : "ftbsc-") + region;
        const Trained& g = global();
        if (!g.error.empty()) return fail(id, "global pretraining failed: " + g.error);
        return cached(id, [&] {
            TrainConfig tc = cfg_.train;
            tc.epochs = cfg_.finetune_epochs();
            const auto& split = data_.region(region);
            auto r = train::finetune_site_calibrated(g.state.params, {split.train, split.validation}, tc, data_.scaler,
                                                     calibrated);
            return std::tuple{std::move(r.best), std::move(r.trace), r.steps};
        });
    }

    void cell(const Regime& regime, const Trained& model) {
        regime.validate();
        CellResult c;
        c.experiment = experiment_;
        c.regime = regime;
        c.setting = setting_;
        c.seed = seed_;
        c.artifact = prefix_ + model.id;
        c.error = model.error;
        if (c.ok()) {
            try {
                c.val_mse = train::evaluate(model.state, data_.region(regime.test_region).validation, TargetSet::all(),
                                            data_.scaler);
                const auto& row = selected_row(model.trace);
                c.train = row.train;
                c.best_epoch = row.epoch;
                c.steps = model.steps;
            } catch (const std::exception& e) {
                c.error = e.what();
            }
        }
        report_.cells.push_back(std::move(c));
    }

    nlohmann::json meta() const {
        nlohmann::json sizes = nlohmann::json::object();
        for (const auto& r : data_.regions) {
            std::size_t n = 0;
            for (const auto& s : data_.region(r).train) n += s.year_count();
            sizes[r] = n;
        }
        return {{"regions", data_.regions},
                {"region_train_site_years", sizes},
                {"data_fingerprint", data_.fingerprint()},
                {"init_digest", parameter_digest(init_.params)},
                {"model_seed", cfg_.model.seed},
                {"train_seed", cfg_.train.seed},
                {"split_seed", cfg_.data.split_seed}};
    }

private:
    template <class F>
    const Trained& cached(const std::string& id, F&& train_fn) {
        if (auto it = models_.find(id); it != models_.end()) return it->second;
        Trained t;
        t.id = id;
        try {
            auto [state, trace, steps] = train_fn();
            t.state = std::move(state);
            t.trace = std::move(trace);
            t.steps = steps;
            kgml::Checkpoint ck;
            ck.config = cfg_.model;
            ck.config.with_calibration = t.state.calib.has_value();
            ck.params = t.state.params;
            ck.calib = t.state.calib;
            ck.meta.seed = cfg_.train.seed;
            ck.meta.training_steps = t.steps;
            ck.meta.label = prefix_ + id;
            ck.meta.scaler = data_.scaler;
            report_.artifacts.push_back({prefix_ + id, t.trace, std::move(ck)});
        } catch (const std::exception& e) {
            t.error = e.what();
        }
        return models_.emplace(id, std::move(t)).first->second;
    }

    const Trained& fail(const std::string& id, const std::string& why) {
        Trained t;
        t.id = id;
        t.error = why;
        return models_.insert_or_assign(id, std::move(t)).first->second;
    }

    const RunConfig& cfg_;
    const Benchmark& data_;
    ExperimentReport& report_;
    std::string experiment_;
    std::uint64_t seed_;
    std::string setting_;
    std::string prefix_;
    ModelState init_;
    std::map<std::string, Trained> models_;
};

std::vector<bool> calibration_variants(Calibration c) {
    switch (c) {
        case Calibration::Off: return {false};
        case Calibration::On: return {true};
        case Calibration::Both: return {false, true};
    }
    return {false};
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

}  // namespace

ExperimentReport run_matrix(const RunConfig& cfg, const Benchmark& data) {
    cfg.validate();
    if (data.regions.size() < 2) throw std::invalid_argument("run_matrix: needs at least 2 regions");
    const auto t0 = std::chrono::steady_clock::now();
    ExperimentReport report;
    Runner run(cfg, data, report, "matrix", cfg.train.seed, "", "");
    for (const auto& r : data.regions) run.cell(Regime::site_only(r), run.site_only(r));
    for (const auto& a : data.regions) {
        for (const auto& b : data.regions) {
            if (a != b) run.cell(Regime::cross(a, b), run.site_only(a));
        }
    }
    for (const auto& r : data.regions) run.cell(Regime::global_only(r), run.global());
    for (bool calibrated : calibration_variants(cfg.experiment.calibration)) {
        for (const auto& r : data.regions) run.cell(Regime::ftbsc(r, calibrated), run.ftbsc(r, calibrated));
    }
    fill_deltas(report);
    report.meta = run.meta();
    report.runtime_seconds = seconds_since(t0);
    return report;
}

ExperimentReport run_pretrain_vs_scratch(const RunConfig& cfg) {
    cfg.validate();
    const auto t0 = std::chrono::steady_clock::now();
    ExperimentReport report;
    report.meta["seeds"] = nlohmann::json::object();
    for (std::uint64_t seed : cfg.experiment.seeds) {
        const RunConfig seeded = with_seed(cfg, seed);
        const Benchmark data = build_benchmark(seeded.data, seeded.experiment.pretrain == train::PretrainMode::FiveStep);
        if (data.regions.size() < 2) throw std::invalid_argument("run_pretrain_vs_scratch: needs at least 2 regions");
        const std::string prefix = "s" + std::to_string(seed) + "-";
        Runner run(seeded, data, report, "pretrain_vs_scratch", seed, "", prefix);
        for (const auto& r : data.regions) {
            run.cell(Regime::site_only(r), run.site_only(r));
            run.cell(Regime::ftbsc(r), run.ftbsc(r, false));
        }
        report.meta["seeds"][std::to_string(seed)] = run.meta();
    }
    for (const auto& c : report.cells) {
        if (!c.ok()) throw std::runtime_error("pretrain_vs_scratch: " + c.artifact + ": " + c.error);
    }
    fill_deltas(report);
    report.runtime_seconds = seconds_since(t0);
    return report;
}

ExperimentReport run_sensitivity(const RunConfig& cfg, const Benchmark& data) {
    cfg.validate();
    if (cfg.experiment.sensitivity.empty()) throw std::invalid_argument("run_sensitivity: no settings");
    const auto t0 = std::chrono::steady_clock::now();
    ExperimentReport report;
    report.meta["settings"] = nlohmann::json::array();
    const bool shared = cfg.experiment.sensitivity_scope == SensitivityScope::Finetune;
    std::optional<Trained> global;
    if (shared) {
        Runner pre(cfg, data, report, "sensitivity", cfg.train.seed, "", "shared-");
        global = pre.global();
    }
    for (const auto& s : cfg.experiment.sensitivity) {
        RunConfig local = cfg;
        local.train.lr = s.lr;
        local.train.batch_size = s.batch_size;
        Runner run(local, data, report, "sensitivity", cfg.train.seed, s.name, s.name + "-");
        if (global) run.adopt_global(*global);
        for (const auto& r : data.regions) {
            run.cell(Regime::site_only(r), run.site_only(r));
            run.cell(Regime::ftbsc(r), run.ftbsc(r, false));
        }
        report.meta["settings"].push_back({{"name", s.name}, {"lr", s.lr}, {"batch_size", s.batch_size}});
        report.meta["run"] = run.meta();
    }
    fill_deltas(report);
    report.runtime_seconds = seconds_since(t0);
    return report;
}

std::vector<GainRow> pretrain_gains(const ExperimentReport& report) {
    std::vector<GainRow> out;
    for (const auto& c : report.cells) {
        if (c.experiment != "pretrain_vs_scratch" || c.regime.kind != RegimeKind::SiteOnly) continue;
        const CellResult* ft = report.find(c.experiment, Regime::ftbsc(c.regime.test_region), c.seed);
        GainRow g;
        g.seed = c.seed;
        g.region = c.regime.test_region;
        const auto& seeds = report.meta.value("seeds", nlohmann::json::object());
        const std::string key = std::to_string(c.seed);
        if (seeds.contains(key)) g.train_site_years = seeds[key]["region_train_site_years"].value(g.region, std::size_t{0});
        g.mse_scratch = c.val_mse;
        if (ft != nullptr) {
            g.mse_ftbsc = ft->val_mse;
            g.delta_mse = g.mse_scratch - g.mse_ftbsc;
            g.delta_pct = delta_pct(g.mse_scratch, g.mse_ftbsc);
        }
        out.push_back(std::move(g));
    }
    return out;
}

std::vector<GainOrdering> gain_ordering(const std::vector<GainRow>& gains) {
    std::map<std::uint64_t, std::vector<const GainRow*>> by_seed;
    for (const auto& g : gains) by_seed[g.seed].push_back(&g);
    std::vector<GainOrdering> out;
    for (const auto& [seed, rows] : by_seed) {
        GainOrdering o;
        o.seed = seed;
        auto by_size = [](const GainRow* a, const GainRow* b) { return a->train_site_years < b->train_site_years; };
        const GainRow* small = *std::min_element(rows.begin(), rows.end(), by_size);
        const GainRow* large = *std::max_element(rows.begin(), rows.end(), by_size);
        o.smallest = small->region;
        o.largest = large->region;
        o.all_positive = std::all_of(rows.begin(), rows.end(), [](const GainRow* g) { return g->delta_pct > 0.0; });
        o.smallest_gains_most = small->delta_pct >= large->delta_pct;
        out.push_back(o);
    }
    return out;
}

std::vector<SensitivityRow> sensitivity_summary(const ExperimentReport& report) {
    std::vector<std::string> settings;
    std::vector<std::string> regions;
    for (const auto& c : report.cells) {
        if (c.experiment != "sensitivity") continue;
        if (std::find(settings.begin(), settings.end(), c.setting) == settings.end()) settings.push_back(c.setting);
        if (std::find(regions.begin(), regions.end(), c.regime.test_region) == regions.end()) {
            regions.push_back(c.regime.test_region);
        }
    }
    std::vector<SensitivityRow> out;
    for (const auto& r : regions) {
        SensitivityRow row;
        row.region = r;
        row.settings = settings;
        row.all_finite = true;
        for (const auto& s : settings) {
            for (const auto& regime : {Regime::ftbsc(r), Regime::site_only(r)}) {
                const CellResult* c = report.find("sensitivity", regime, report.cells.front().seed, s);
                const bool finite = c != nullptr && c->ok() && std::isfinite(c->val_mse) && std::isfinite(c->train.total);
                row.all_finite = row.all_finite && finite;
                if (regime.kind == RegimeKind::Ftbsc) row.mse.push_back(c != nullptr && c->ok() ? c->val_mse : kNaN);
            }
        }
        if (row.all_finite) {
            const auto [lo, hi] = std::minmax_element(row.mse.begin(), row.mse.end());
            row.spread = *hi - *lo;
            const CellResult* base = report.find("sensitivity", Regime::site_only(r), report.cells.front().seed, settings[0]);
            row.regime_gap = std::abs(base->val_mse - row.mse[0]);
            row.spread_below_gap = row.spread < row.regime_gap;
        }
        out.push_back(std::move(row));
    }
    return out;
}

AblationResult run_five_step_ablation(const RunConfig& cfg, const Benchmark& data) {
    cfg.validate();
    if (data.synthetic_train.empty()) throw std::invalid_argument("run_five_step_ablation: benchmark has no synthetic data");
    const ModelState init{kgml::init_model(cfg.model), std::nullopt};
    const train::FiveStepData five{data.synthetic_train, data.synthetic_validation, data.pooled_train,
                                   data.pooled_validation};
    AblationResult out;
    const auto full = train::five_step_schedule(init, five, cfg.train, data.scaler);
    const auto ablated = train::five_step_schedule(init, five, cfg.train, data.scaler, {true, true, true, false, true});
    out.full_trace = full.trace;
    out.full_mse = train::evaluate(full.state, data.pooled_validation, TargetSet::fluxes(), data.scaler);
    out.ablated_mse = train::evaluate(ablated.state, data.pooled_validation, TargetSet::fluxes(), data.scaler);
    return out;
}

}  // namespace ftbsc::harness
