// Acceptance gate: one PASS/FAIL line per criterion, exit 0 only if all pass.
// Usage: ftbsc_acceptance [--config configs/desk.json] [--work DIR]

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <functional>
#include <random>
#include <sstream>
#include <string>

#include <CLI11.hpp>

#include "ftbsc/ecosyslite/csv_io.hpp"
#include "ftbsc/harness/gradcheck_suite.hpp"
#include "ftbsc/harness/report.hpp"

namespace fs = std::filesystem;
using namespace ftbsc;
using namespace ftbsc::harness;
using obj::TargetSet;

namespace {

struct Outcome {
    bool pass = false;
    std::string detail;
};

std::string fmt(const char* f, auto... args) {
    char buf[512];
    std::snprintf(buf, sizeof buf, f, args...);
    return buf;
}

kgml::FluxPrediction targets_as_prediction(const eco::Batch& b) {
    kgml::FluxPrediction p;
    p.ra = b.flux[0];
    p.rh = b.flux[1];
    p.nee = b.flux[2];
    p.reco = num::Tensor(p.ra.shape());
    for (std::size_t i = 0; i < p.ra.size(); ++i) p.reco[i] = p.ra[i] + p.rh[i];
    p.yield_pred = b.yield;
    return p;
}

std::string checkpoint_text(const RunConfig& cfg, const train::ModelState& s, const eco::Standardizer& scaler) {
    kgml::Checkpoint ck;
    ck.config = cfg.model;
    ck.config.with_calibration = s.calib.has_value();
    ck.params = s.params;
    ck.calib = s.calib;
    ck.meta.seed = cfg.train.seed;
    ck.meta.scaler = scaler;
    return kgml::save_checkpoint(ck);
}

// Everything criteria 3 and 4 share: the desk benchmark and a pretrained theta*.
struct Fixture {
    RunConfig cfg;
    Benchmark data;
    train::ModelState init;
    num::ParameterSet theta_star;

    train::PhaseData region(const std::string& r) const {
        return {data.region(r).train, data.region(r).validation};
    }
};

Outcome c1_gradients() {
    const auto entries = gradcheck_suite({1, 2, 3});
    const double worst = max_error(entries);
    std::string terms;
    for (const auto& e : entries) {
        if (e.seed == 1) terms += (terms.empty() ? "" : ",") + e.term;
    }
    return {worst < 1e-4, fmt("max relative error %.3e over %zu checks (terms %s; seeds 1-3; h=1e-5)", worst,
                              entries.size(), terms.c_str())};
}

Outcome c2_physics(const RunConfig& cfg) {
    std::vector<eco::SiteDataset> sites;
    for (std::size_t r = 0; r < cfg.data.generator.regions.size(); ++r) {
        for (auto& s : eco::generate_region(r, cfg.data.generator)) sites.push_back(std::move(s));
    }
    std::mt19937_64 rng(2024);
    std::shuffle(sites.begin(), sites.end(), rng);
    sites.resize(std::min<std::size_t>(10, sites.size()));
    double worst_clean = 0.0;
    double least_noisy = std::numeric_limits<double>::infinity();
    for (const auto& s : sites) {
        const std::vector<eco::SiteDataset> one{s};
        const auto refs = eco::enumerate_sequences(one);
        const auto clean = eco::make_batch(refs, eco::Standardizer::identity());
        worst_clean = std::max(worst_clean, obj::loss_phys(targets_as_prediction(clean), clean.gpp));
        const std::vector<eco::SiteDataset> noisy_one{eco::add_observation_noise(s, eco::NoiseLevels::uniform(0.1), 5)};
        const auto noisy_refs = eco::enumerate_sequences(noisy_one);
        const auto noisy = eco::make_batch(noisy_refs, eco::Standardizer::identity());
        least_noisy = std::min(least_noisy, obj::loss_phys(targets_as_prediction(noisy), noisy.gpp));
    }
    return {sites.size() == 10 && worst_clean <= 1e-10 && least_noisy > 0.0,
            fmt("%zu sites: max noiseless l_phys %.3e, min noisy l_phys %.3e", sites.size(), worst_clean, least_noisy)};
}

Outcome c3_reductions(const Fixture& f) {
    const auto& scaler = f.data.scaler;
    train::TrainConfig tc = f.cfg.train;
    tc.epochs = 3;
    const std::string region = f.data.regions.back();

    // calibrated objective, no head, rho = 0  vs  proximal fine-tuning
    tc.weights.rho_calib = 0.0;
    const auto a = train::finetune_site_calibrated(f.theta_star, f.region(region), tc, scaler, false);
    const auto b = train::finetune_site(f.theta_star, f.region(region), tc, scaler);
    const bool eq3 = checkpoint_text(f.cfg, a.best, scaler) == checkpoint_text(f.cfg, b.best, scaler) &&
                     checkpoint_text(f.cfg, a.last, scaler) == checkpoint_text(f.cfg, b.last, scaler);

    // proximal fine-tuning with mu = 0  vs  plain training started at theta*
    tc.weights.mu_prox = 0.0;
    const auto c = train::finetune_site(f.theta_star, f.region(region), tc, scaler);
    train::PhaseSpec plain{"plain", TargetSet::all(), std::nullopt, nullptr};
    const auto d = train::train_phase({f.theta_star, std::nullopt}, f.region(region), plain, tc, scaler);
    const bool eq2 = checkpoint_text(f.cfg, c.last, scaler) == checkpoint_text(f.cfg, d.last, scaler) &&
                     checkpoint_text(f.cfg, c.best, scaler) == checkpoint_text(f.cfg, d.best, scaler);

    // global pretraining (weights set, then ignored)  vs  pooled training with mu = rho = 0
    train::TrainConfig pre = f.cfg.train;
    pre.epochs = 3;
    pre.weights.mu_prox = 5.0;
    pre.weights.rho_calib = 2.0;
    const auto g = train::pretrain_global(f.init, {f.data.pooled_train, f.data.pooled_validation, {}, {}}, pre, scaler);
    pre.weights.mu_prox = 0.0;
    pre.weights.rho_calib = 0.0;
    train::PhaseSpec pooled{"global", TargetSet::all(), std::nullopt, nullptr};
    const auto h = train::train_phase(f.init, {f.data.pooled_train, f.data.pooled_validation}, pooled, pre, scaler);
    const bool eq1 = checkpoint_text(f.cfg, g.state, scaler) == checkpoint_text(f.cfg, h.best, scaler);

    return {eq1 && eq2 && eq3, fmt("bitwise checkpoints: calib(rho=0,no head)==prox %s, prox(mu=0)==plain %s, "
                                   "global==pooled(mu=rho=0) %s",
                                   eq3 ? "yes" : "NO", eq2 ? "yes" : "NO", eq1 ? "yes" : "NO")};
}

Outcome c4_anchors(const Fixture& f) {
    const std::string region = f.data.regions.front();
    train::TrainConfig tc = f.cfg.train;
    tc.epochs = 5;
    tc.weights.mu_prox = 1e6;
    const auto pinned = train::finetune_site(f.theta_star, f.region(region), tc, f.data.scaler);
    const double dist = std::max(num::squared_distance(pinned.last.params, f.theta_star),
                                 num::squared_distance(pinned.best.params, f.theta_star));

    tc.weights.mu_prox = f.cfg.train.weights.mu_prox;
    tc.weights.rho_calib = 1e6;
    const auto held = train::finetune_site_calibrated(f.theta_star, f.region(region), tc, f.data.scaler);
    double head_dev = 0.0;
    for (const auto* s : {&held.last, &held.best}) {
        for (std::size_t k = 0; k < eco::kFluxCount; ++k) {
            head_dev = std::max({head_dev, std::abs(s->calib->scale[k] - 1.0), std::abs(s->calib->offset[k])});
        }
    }
    return {dist < 1e-4 && head_dev < 1e-3,
            fmt("mu=1e6: |theta_s-theta*|^2 = %.3e (< 1e-4); rho=1e6: max head deviation %.3e (< 1e-3)", dist,
                head_dev)};
}

Outcome c5_pretrain_vs_scratch(const RunConfig& cfg, const fs::path& work, double& seconds) {
    const auto t0 = std::chrono::steady_clock::now();
    const ExperimentReport r = run_pretrain_vs_scratch(cfg);
    seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    write_report_dir(work / "pretrain_vs_scratch", r);
    const auto gains = pretrain_gains(r);
    const auto order = gain_ordering(gains);
    bool all_positive = true;
    std::size_t ordered = 0;
    std::string per_seed;
    for (const auto& o : order) {
        all_positive = all_positive && o.all_positive;
        ordered += o.smallest_gains_most;
        std::string pcts;
        for (const auto& g : gains) {
            if (g.seed == o.seed) pcts += fmt(" %s %+.1f%%", g.region.c_str(), g.delta_pct);
        }
        per_seed += fmt("; seed %llu:%s", static_cast<unsigned long long>(o.seed), pcts.c_str());
    }
    return {all_positive && ordered >= 2 && order.size() == 3 && seconds < 600.0,
            fmt("delta%% > 0 everywhere: %s, smallest >= largest in %zu/%zu seeds, %.0f s", all_positive ? "yes" : "NO",
                ordered, order.size(), seconds) +
                per_seed};
}

Outcome c6_heatmap(const RunConfig& cfg, const Benchmark& data, const fs::path& work) {
    const ExperimentReport r = run_matrix(cfg, data);
    write_report_dir(work / "matrix", r);
    write_resolved_config(work / "matrix", cfg);
    std::size_t pairs = 0, shifted = 0;
    double min_ratio = std::numeric_limits<double>::infinity();
    for (const auto& a : data.regions) {
        const CellResult* home = r.find("matrix", Regime::site_only(a));
        for (const auto& b : data.regions) {
            if (a == b) continue;
            const CellResult* away = r.find("matrix", Regime::cross(a, b));
            ++pairs;
            if (home && away && home->ok() && away->ok()) {
                shifted += away->val_mse > home->val_mse;
                min_ratio = std::min(min_ratio, away->val_mse / home->val_mse);
            }
        }
    }
    return {pairs > 0 && shifted == pairs && r.failures() == 0,
            fmt("train A/test B > train A/test A for %zu/%zu ordered pairs (min ratio %.2f)", shifted, pairs,
                min_ratio)};
}

Outcome c7_sensitivity(const RunConfig& cfg, const Benchmark& data, const fs::path& work) {
    const ExperimentReport r = run_sensitivity(cfg, data);
    write_report_dir(work / "sensitivity", r);
    const auto rows = sensitivity_summary(r);
    bool ok = r.failures() == 0 && !rows.empty();
    std::string detail;
    for (const auto& row : rows) {
        ok = ok && row.all_finite && row.spread_below_gap;
        detail += fmt("%s%s spread %.4f vs gap %.4f", detail.empty() ? "" : "; ", row.region.c_str(), row.spread,
                      row.regime_gap);
    }
    return {ok, fmt("%zu settings, scope %s, no divergence: %s; ", cfg.experiment.sensitivity.size(),
                    cfg.experiment.sensitivity_scope == SensitivityScope::Finetune ? "finetune" : "pipeline",
                    r.failures() == 0 ? "yes" : "NO") +
                    detail};
}

Outcome c8_five_step(const RunConfig& cfg) {
    const Benchmark data = build_benchmark(cfg.data, true);
    const AblationResult r = run_five_step_ablation(cfg, data);
    bool marked = r.full_trace.phase_count() == 5;
    try {
        r.full_trace.validate();
    } catch (const std::logic_error&) {
        marked = false;
    }
    return {marked && r.ablated_mse > r.full_mse,
            fmt("%zu phases; flux validation MSE full %.5f vs without step 4 %.5f", r.full_trace.phase_count(),
                r.full_mse, r.ablated_mse)};
}

Outcome c9_determinism(const RunConfig& desk, const fs::path& work) {
    RunConfig cfg = desk;
    cfg.train.epochs = 2;
    cfg.experiment.calibration = Calibration::Both;
    std::vector<std::string> broken;

    // same seed -> identical run directories
    for (const char* name : {"det_a", "det_b"}) {
        const Benchmark data = build_benchmark(cfg.data, false);
        const fs::path dir = work / name;
        fs::remove_all(dir);
        write_report_dir(dir, run_matrix(cfg, data));
        write_resolved_config(dir, cfg);
        std::vector<eco::SiteDataset> all;
        for (const auto& [region, sites] : observed_sites(cfg.data)) {
            eco::write_csv(sites, dir / (region + "_daily.csv"), dir / (region + "_annual.csv"));
        }
    }
    std::size_t files = 0;
    for (const auto& e : fs::directory_iterator(work / "det_a")) {
        const auto name = e.path().filename();
        if (name == "run_meta.json") continue;  // wall-clock runtime only
        ++files;
        if (read_text(e.path()) != read_text(work / "det_b" / name)) broken.push_back(name.string());
    }

    // checkpoint round trip
    std::size_t checkpoints = 0;
    for (const auto& e : fs::directory_iterator(work / "det_a")) {
        if (!e.path().filename().string().starts_with("checkpoint_")) continue;
        ++checkpoints;
        const std::string text = read_text(e.path());
        const kgml::Checkpoint ck = kgml::load_checkpoint(text);
        if (kgml::save_checkpoint(ck) != text || kgml::load_checkpoint(kgml::save_checkpoint(ck)) != ck) {
            broken.push_back("checkpoint round trip " + e.path().filename().string());
        }
    }

    // data CSV round trip
    for (const auto& [region, sites] : observed_sites(cfg.data)) {
        const auto back = eco::read_csv(work / "det_a" / (region + "_daily.csv"),
                                        work / "det_a" / (region + "_annual.csv"), region);
        if (back != sites) broken.push_back("csv round trip " + region);
    }

    // report CSV round trip
    const std::string report = read_text(work / "det_a" / "report.csv");
    std::istringstream in(report);
    std::ostringstream out;
    write_report_csv(out, read_report_csv(in));
    if (out.str() != report) broken.push_back("report.csv round trip");

    std::string detail = fmt("%zu files identical across reruns, %zu checkpoints and %zu region CSVs round-trip",
                             files - std::min(files, broken.size()), checkpoints, cfg.data.generator.regions.size());
    for (const auto& b : broken) detail += "; MISMATCH " + b;
    return {broken.empty() && files > 0 && checkpoints > 0, detail};
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"acceptance gate"};
    std::string config = std::string(FTBSC_SOURCE_DIR) + "/configs/desk.json";
    std::string work = (fs::temp_directory_path() / "ftbsc_acceptance").string();
    app.add_option("--config", config, "experiment config")->capture_default_str();
    app.add_option("--work", work, "directory for run artifacts")->capture_default_str();
    CLI11_PARSE(app, argc, argv);

    const RunConfig cfg = load_config(config);
    fs::create_directories(work);
    std::printf("config %s, artifacts under %s\n", config.c_str(), work.c_str());
    std::fflush(stdout);

    const Benchmark data = build_benchmark(cfg.data, false);
    Fixture fixture{cfg, data, {kgml::init_model(cfg.model), std::nullopt}, {}};
    std::optional<Fixture> shared;
    auto fixture_ready = [&]() -> const Fixture& {
        if (!shared) {
            shared = fixture;
            shared->theta_star =
                train::pretrain_global(shared->init, {data.pooled_train, data.pooled_validation, {}, {}}, cfg.train,
                                       data.scaler)
                    .state.params;
        }
        return *shared;
    };

    double c5_seconds = 0.0;
    const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria{
        {"gradient correctness", [&] { return c1_gradients(); }},
        {"physics oracle", [&] { return c2_physics(cfg); }},
        {"reduction equivalences", [&] { return c3_reductions(fixture_ready()); }},
        {"anchor limits", [&] { return c4_anchors(fixture_ready()); }},
        {"pretrain vs scratch direction", [&] { return c5_pretrain_vs_scratch(cfg, work, c5_seconds); }},
        {"cross-regional degradation", [&] { return c6_heatmap(cfg, data, work); }},
        {"sensitivity stability", [&] { return c7_sensitivity(cfg, data, work); }},
        {"five-step schedule", [&] { return c8_five_step(cfg); }},
        {"determinism and round trips", [&] { return c9_determinism(cfg, work); }},
    };

    std::size_t passed = 0;
    const auto start = std::chrono::steady_clock::now();
    for (std::size_t i = 0; i < criteria.size(); ++i) {
        const auto t0 = std::chrono::steady_clock::now();
        Outcome o;
        try {
            o = criteria[i].second();
        } catch (const std::exception& e) {
            o = {false, std::string("exception: ") + e.what()};
        }
        const double s = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        passed += o.pass;
        std::printf("%s [%zu] %s: %s (%.1f s)\n", o.pass ? "PASS" : "FAIL", i + 1, criteria[i].first.c_str(),
                    o.detail.c_str(), s);
        std::fflush(stdout);
    }
    const double total = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    std::printf("%zu/%zu criteria passed in %.0f s\n", passed, criteria.size(), total);
    return passed == criteria.size() ? 0 : 1;
}
