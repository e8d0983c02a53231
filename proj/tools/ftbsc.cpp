// ftbsc: data generation, training, evaluation and experiment runs.
// Exit codes: 0 ok, 1 usage or config error, 2 runtime failure, 3 partial matrix failure.

#include <cstdio>
#include <iostream>
#include <optional>
#include <sstream>

#include <CLI11.hpp>

#include "ftbsc/ecosyslite/csv_io.hpp"
#include "ftbsc/harness/gradcheck_suite.hpp"
#include "ftbsc/harness/report.hpp"

namespace fs = std::filesystem;
using namespace ftbsc;
using namespace ftbsc::harness;

namespace {

constexpr int kOk = 0;
constexpr int kUsage = 1;
constexpr int kRuntime = 2;
constexpr int kPartial = 3;

struct Common {
    std::string config;
    std::optional<std::uint64_t> seed;
    std::string out = "run";
};

void add_common(CLI::App* cmd, Common& c) {
    cmd->add_option("--config", c.config, "JSON config; defaults apply to omitted keys")->check(CLI::ExistingFile);
    cmd->add_option("--seed", c.seed, "override model, training and generator seeds");
    cmd->add_option("--out", c.out, "run directory")->capture_default_str();
}

RunConfig resolve(const Common& c) {
    RunConfig cfg = c.config.empty() ? config_from_json(nlohmann::json::object()) : load_config(c.config);
    if (c.seed) cfg = with_seed(cfg, *c.seed);
    write_resolved_config(c.out, cfg);
    return cfg;
}

bool needs_synthetic(const RunConfig& cfg) { return cfg.experiment.pretrain == train::PretrainMode::FiveStep; }

std::string trace_text(const train::TrainTrace& t) {
    std::ostringstream o;
    t.write_csv(o);
    return o.str();
}

kgml::Checkpoint make_checkpoint(const RunConfig& cfg, const train::ModelState& s, std::uint64_t steps,
                                 const std::string& label, const eco::Standardizer& scaler) {
    kgml::Checkpoint ck;
    ck.config = cfg.model;
    ck.config.with_calibration = s.calib.has_value();
    ck.params = s.params;
    ck.calib = s.calib;
    ck.meta = {cfg.train.seed, steps, label, scaler};
    return ck;
}

int cmd_generate(const Common& c) {
    const RunConfig cfg = resolve(c);
    for (const auto& [region, sites] : observed_sites(cfg.data)) {
        eco::write_csv(sites, fs::path(c.out) / (region + "_daily.csv"), fs::path(c.out) / (region + "_annual.csv"));
        std::printf("%s: %zu sites -> %s\n", region.c_str(), sites.size(), (fs::path(c.out) / (region + "_daily.csv")).c_str());
    }
    return kOk;
}

int cmd_pretrain(const Common& c) {
    const RunConfig cfg = resolve(c);
    const Benchmark data = build_benchmark(cfg.data, needs_synthetic(cfg));
    const train::ModelState init{kgml::init_model(cfg.model), std::nullopt};
    const auto r = train::pretrain_global(
        init, {data.pooled_train, data.pooled_validation, data.synthetic_train, data.synthetic_validation}, cfg.train,
        data.scaler, cfg.experiment.pretrain);
    write_text(fs::path(c.out) / "trace_global.csv", trace_text(r.trace));
    kgml::write_checkpoint(make_checkpoint(cfg, r.state, r.steps, "global", data.scaler),
                           fs::path(c.out) / "checkpoint_global.json");
    const double mse = train::evaluate(r.state, data.pooled_validation, obj::TargetSet::all(), data.scaler);
    std::printf("global: %llu steps, pooled validation MSE %.6g\n", static_cast<unsigned long long>(r.steps), mse);
    return kOk;
}

int cmd_finetune(const Common& c, const std::string& checkpoint, const std::string& region, bool calibrate) {
    const RunConfig cfg = resolve(c);
    const kgml::Checkpoint base = kgml::read_checkpoint(checkpoint);
    const Benchmark data = build_benchmark(cfg.data, false);
    const auto& split = data.region(region);
    train::TrainConfig tc = cfg.train;
    tc.epochs = cfg.finetune_epochs();
    const auto r = train::finetune_site_calibrated(base.params, {split.train, split.validation}, tc, base.meta.scaler,
                                                   calibrate);
    const std::string id = std::string(calibrate ? "ftbsc_calib-" : "ftbsc-") + region;
    write_text(fs::path(c.out) / ("trace_" + id + ".csv"), trace_text(r.trace));
    kgml::write_checkpoint(make_checkpoint(cfg, r.best, base.meta.training_steps + r.steps, id, base.meta.scaler),
                           fs::path(c.out) / ("checkpoint_" + id + ".json"));
    std::printf("%s: best epoch %zu, validation MSE %.6g\n", id.c_str(), r.best_epoch,
                train::evaluate(r.best, split.validation, obj::TargetSet::all(), base.meta.scaler));
    return kOk;
}

int cmd_evaluate(const Common& c, const std::string& checkpoint) {
    const RunConfig cfg = resolve(c);
    const kgml::Checkpoint ck = kgml::read_checkpoint(checkpoint);
    const Benchmark data = build_benchmark(cfg.data, false);
    const train::ModelState state{ck.params, ck.calib};
    std::ostringstream csv;
    csv << "region,val_mse";
    for (eco::Target t : eco::kAllTargets) csv << ",mse_" << eco::name(t);
    csv << '\n';
    for (const auto& r : data.regions) {
        const auto& v = data.region(r).validation;
        const double all = train::evaluate(state, v, obj::TargetSet::all(), ck.meta.scaler);
        csv << r << ',' << eco::format_decimal(all);
        for (eco::Target t : eco::kAllTargets) {
            const double m = train::evaluate(state, v, obj::TargetSet{t}, ck.meta.scaler);
            csv << ',' << (std::isnan(m) ? std::string() : eco::format_decimal(m));
        }
        csv << '\n';
    }
    write_text(fs::path(c.out) / "evaluate.csv", csv.str());
    std::cout << csv.str();
    return kOk;
}

int finish(const Common& c, const ExperimentReport& report) {
    write_report_dir(c.out, report);
    std::printf("%zu cells, %zu failed, %.1f s -> %s\n", report.cells.size(), report.failures(), report.runtime_seconds,
                c.out.c_str());
    return report.failures() > 0 ? kPartial : kOk;
}

int cmd_matrix(const Common& c) {
    const RunConfig cfg = resolve(c);
    const Benchmark data = build_benchmark(cfg.data, needs_synthetic(cfg));
    const ExperimentReport report = run_matrix(cfg, data);
    const int code = finish(c, report);
    std::ostringstream heat;
    write_heatmap_csv(heat, report.cells);
    std::cout << heat.str();
    return code;
}

int cmd_compare(const Common& c) {
    const RunConfig cfg = resolve(c);
    const ExperimentReport report = run_pretrain_vs_scratch(cfg);
    const int code = finish(c, report);
    const auto gains = pretrain_gains(report);
    write_gains_csv(std::cout, gains);
    for (const auto& o : gain_ordering(gains)) {
        std::printf("seed %llu: gains %s everywhere; smallest region %s %s largest region %s\n",
                    static_cast<unsigned long long>(o.seed), o.all_positive ? "positive" : "NOT positive",
                    o.smallest.c_str(), o.smallest_gains_most ? ">=" : "<", o.largest.c_str());
    }
    return code;
}

int cmd_sweep(const Common& c) {
    const RunConfig cfg = resolve(c);
    const Benchmark data = build_benchmark(cfg.data, needs_synthetic(cfg));
    const ExperimentReport report = run_sensitivity(cfg, data);
    const int code = finish(c, report);
    write_sensitivity_csv(std::cout, sensitivity_summary(report));
    return code;
}

int cmd_gradcheck(const Common& c, double tolerance) {
    const std::uint64_t s = c.seed.value_or(1);
    const auto entries = gradcheck_suite({s, s + 1, s + 2});
    std::printf("%-6s %-6s %-12s %s\n", "seed", "term", "max_rel_err", "worst");
    for (const auto& e : entries) {
        std::printf("%-6llu %-6s %-12.3e %s\n", static_cast<unsigned long long>(e.seed), e.term.c_str(),
                    e.max_relative_error, e.worst_parameter.c_str());
    }
    const double worst = max_error(entries);
    std::printf("max relative error %.3e (tolerance %.0e)\n", worst, tolerance);
    return worst < tolerance ? kOk : kRuntime;
}

int cmd_report(const Common& c) {
    regenerate_heatmap(c.out);
    std::cout << read_text(fs::path(c.out) / "heatmap.csv");
    return kOk;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Global pretraining, site fine-tuning and calibration experiments on synthetic carbon-flux data"};
    app.require_subcommand(1);

    Common common;
    std::string checkpoint;
    std::string region;
    bool calibrate = false;

    auto* generate = app.add_subcommand("generate", "write observed per-region CSVs");
    auto* pretrain = app.add_subcommand("pretrain", "train the global model on pooled regions");
    auto* finetune = app.add_subcommand("finetune", "proximal fine-tuning of a checkpoint on one region");
    auto* evaluate = app.add_subcommand("evaluate", "validation MSE of a checkpoint on every region");
    auto* matrix = app.add_subcommand("matrix", "regime x region MSE matrix");
    auto* compare = app.add_subcommand("compare", "pretrain vs scratch over the configured seeds");
    auto* sweep = app.add_subcommand("sweep", "learning-rate / batch-size sensitivity");
    auto* gradcheck = app.add_subcommand("gradcheck", "finite-difference check of every loss term");
    auto* report = app.add_subcommand("report", "rebuild heatmap.csv from a run directory's report.csv");
    for (auto* cmd : {generate, pretrain, finetune, evaluate, matrix, compare, sweep, gradcheck, report}) {
        add_common(cmd, common);
    }
    finetune->add_option("--checkpoint", checkpoint, "global checkpoint")->required()->check(CLI::ExistingFile);
    finetune->add_option("--region", region, "region to fine-tune on")->required();
    finetune->add_flag("--calibrate", calibrate, "attach a calibration head");
    evaluate->add_option("--checkpoint", checkpoint, "checkpoint to evaluate")->required()->check(CLI::ExistingFile);
    double tolerance = 1e-4;
    gradcheck->add_option("--tolerance", tolerance, "pass threshold")->capture_default_str();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? kOk : kUsage;
    }

    try {
        if (*generate) return cmd_generate(common);
        if (*pretrain) return cmd_pretrain(common);
        if (*finetune) return cmd_finetune(common, checkpoint, region, calibrate);
        if (*evaluate) return cmd_evaluate(common, checkpoint);
        if (*matrix) return cmd_matrix(common);
        if (*compare) return cmd_compare(common);
        if (*sweep) return cmd_sweep(common);
        if (*gradcheck) return cmd_gradcheck(common, tolerance);
        if (*report) return cmd_report(common);
    } catch (const ConfigError& e) {
        std::cerr << "error: " << e.what() << "\n\n" << app.help();
        return kUsage;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kRuntime;
    }
    return kUsage;
}
