#include <gtest/gtest.h>
#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>

#include "ftbsc/harness/report.hpp"

namespace fs = std::filesystem;
using ftbsc::harness::read_text;

namespace {

const std::string kTiny = std::string(FTBSC_SOURCE_DIR) + "/configs/tiny.json";

fs::path scratch(const std::string& name) {
    const fs::path p = fs::temp_directory_path() / ("ftbsc_test_cli_" + name);
    fs::remove_all(p);
    fs::create_directories(p);
    return p;
}

int run(const std::string& args, const fs::path& log) {
    const std::string cmd = std::string(FTBSC_CLI) + " " + args + " > " + log.string() + " 2>&1";
    const int status = std::system(cmd.c_str());
    return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

}  // namespace

TEST(Cli, UsageErrorsExitOne) {
    const fs::path d = scratch("usage");
    EXPECT_EQ(run("", d / "log"), 1);
    EXPECT_EQ(run("frobnicate", d / "log"), 1);
    EXPECT_EQ(run("matrix --bogus-flag", d / "log"), 1);
    std::ofstream(d / "bad.json") << R"({"train": {"lr": 0.1, "momentum": 0.9}})";
    EXPECT_EQ(run("matrix --config " + (d / "bad.json").string() + " --out " + d.string(), d / "log"), 1);
    EXPECT_NE(read_text(d / "log").find("train.momentum"), std::string::npos);
    EXPECT_EQ(run("--help", d / "log"), 0);
}

TEST(Cli, GradcheckThresholdContract) {
    const fs::path d = scratch("gradcheck");
    EXPECT_EQ(run("gradcheck --out " + d.string(), d / "log"), 0);
    EXPECT_NE(read_text(d / "log").find("max relative error"), std::string::npos);
    EXPECT_EQ(run("gradcheck --tolerance 1e-30 --out " + d.string(), d / "log"), 2);
}

TEST(Cli, GenerateIsByteIdenticalPerSeed) {
    const fs::path a = scratch("gen_a"), b = scratch("gen_b"), c = scratch("gen_c");
    ASSERT_EQ(run("generate --config " + kTiny + " --seed 7 --out " + a.string(), a / "log"), 0);
    ASSERT_EQ(run("generate --config " + kTiny + " --seed 7 --out " + b.string(), b / "log"), 0);
    ASSERT_EQ(run("generate --config " + kTiny + " --seed 8 --out " + c.string(), c / "log"), 0);
    for (const char* f : {"IA_daily.csv", "IA_annual.csv", "IN_daily.csv", "IL_daily.csv", "config.resolved.json"}) {
        EXPECT_EQ(read_text(a / f), read_text(b / f)) << f;
    }
    EXPECT_NE(read_text(a / "IA_daily.csv"), read_text(c / "IA_daily.csv"));
}

TEST(Cli, MatrixThenReportRebuildsHeatmap) {
    const fs::path d = scratch("matrix");
    ASSERT_EQ(run("matrix --config " + kTiny + " --out " + d.string(), d / "log"), 0);
    for (const char* f : {"report.csv", "heatmap.csv", "config.resolved.json", "trace_global.csv",
                          "checkpoint_global.json", "checkpoint_site_only-IA.json", "trace_ftbsc-IL.csv"}) {
        EXPECT_TRUE(fs::exists(d / f)) << f;
    }
    const std::string heat = read_text(d / "heatmap.csv");
    fs::remove(d / "heatmap.csv");
    ASSERT_EQ(run("report --out " + d.string(), d / "log2"), 0);
    EXPECT_EQ(read_text(d / "heatmap.csv"), heat);
    EXPECT_EQ(heat.substr(0, heat.find('\n')), "train,IA,IN,IL");
}

TEST(Cli, PartialMatrixFailureExitsThree) {
    const fs::path d = scratch("partial");
    std::ofstream(d / "boom.json") << R"({"model": {"basis_hidden": 4, "head_hidden": 3},
        "train": {"optimizer": "gd", "lr": 1e12, "batch_size": 1, "epochs": 1},
        "data": {"generator": {"total_site_years": 24, "years_per_site": 4}}})";
    EXPECT_EQ(run("matrix --config " + (d / "boom.json").string() + " --out " + d.string(), d / "log"), 3);
    EXPECT_NE(read_text(d / "report.csv").find(",failed,"), std::string::npos);
}

TEST(Cli, PretrainFinetuneEvaluate) {
    const fs::path d = scratch("pipeline");
    const std::string base = " --config " + kTiny + " --out " + d.string();
    ASSERT_EQ(run("pretrain" + base, d / "log"), 0);
    ASSERT_TRUE(fs::exists(d / "checkpoint_global.json"));
    const std::string ck = (d / "checkpoint_global.json").string();
    ASSERT_EQ(run("finetune --checkpoint " + ck + " --region IN --calibrate" + base, d / "log"), 0);
    ASSERT_TRUE(fs::exists(d / "checkpoint_ftbsc_calib-IN.json"));
    ASSERT_EQ(run("evaluate --checkpoint " + (d / "checkpoint_ftbsc_calib-IN.json").string() + base, d / "log"), 0);
    const std::string eval = read_text(d / "evaluate.csv");
    EXPECT_EQ(eval.substr(0, eval.find('\n')), "region,val_mse,mse_ra,mse_rh,mse_nee,mse_yield");
    EXPECT_EQ(run("finetune --checkpoint " + ck + " --region TX" + base, d / "log"), 2);

    std::ofstream(d / "broken.json") << "{\"version\": 1}";
    EXPECT_EQ(run("evaluate --checkpoint " + (d / "broken.json").string() + base, d / "log"), 2);
}

TEST(Cli, CompareAndSweep) {
    const fs::path d = scratch("compare");
    ASSERT_EQ(run("compare --config " + kTiny + " --out " + d.string(), d / "log"), 0);
    EXPECT_TRUE(fs::exists(d / "pretrain_vs_scratch.csv"));
    const fs::path s = scratch("sweep");
    ASSERT_EQ(run("sweep --config " + kTiny + " --out " + s.string(), s / "log"), 0);
    EXPECT_TRUE(fs::exists(s / "sensitivity.csv"));
}
