#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <set>

#include "ftbsc/ecosyslite/batch.hpp"
#include "ftbsc/ecosyslite/csv_io.hpp"
#include "ftbsc/ecosyslite/generator.hpp"

using namespace ftbsc::eco;
namespace fs = std::filesystem;

namespace {

class TempDir {
public:
    TempDir() {
        path_ = fs::temp_directory_path() /
                ("ftbsc_eco_" + std::to_string(::testing::UnitTest::GetInstance()->random_seed()) + "_" +
                 ::testing::UnitTest::GetInstance()->current_test_info()->name());
        fs::remove_all(path_);
        fs::create_directories(path_);
    }
    ~TempDir() { fs::remove_all(path_); }
    const fs::path& path() const { return path_; }

private:
    fs::path path_;
};

GeneratorConfig small_config() {
    GeneratorConfig cfg;
    cfg.total_site_years = 24;
    cfg.years_per_site = 4;
    return cfg;
}

void write_text(const fs::path& p, const std::string& text) {
    std::ofstream(p) << text;
}

std::string csv_error(const fs::path& daily, const fs::path& annual) {
    try {
        read_csv(daily, annual, "X");
    } catch (const CsvError& e) {
        return e.what();
    }
    return "";
}

}  // namespace

TEST(Generator, FluxesObeyConstructionExactly) {
    const auto sites = generate_region(0, small_config());
    ASSERT_FALSE(sites.empty());
    for (const auto& s : sites) {
        s.validate();
        for (std::size_t i = 0; i < s.day_count(); ++i) {
            EXPECT_GE(s.ra.values[i], 0.0);
            EXPECT_GE(s.rh.values[i], 0.0);
            EXPECT_NEAR(s.nee.values[i], s.ra.values[i] + s.rh.values[i] - s.gpp[i], 1e-12);
        }
        EXPECT_EQ(s.ra.observed_count(), s.day_count());
        EXPECT_EQ(s.yield.observed_count(), s.year_count());
    }
}

TEST(Generator, SameSeedSameData) {
    EXPECT_EQ(generate_region(1, small_config()), generate_region(1, small_config()));
    auto other = small_config();
    other.seed = 8;
    EXPECT_NE(generate_region(1, small_config()), generate_region(1, other));
}

TEST(Generator, RegionVolumesFollowRatios) {
    GeneratorConfig cfg;  // 41:27:22
    cfg.total_site_years = 900;
    const auto counts = cfg.site_years_per_region();
    ASSERT_EQ(counts.size(), 3u);
    EXPECT_EQ(counts[0], 410u);
    EXPECT_EQ(counts[1], 270u);
    EXPECT_EQ(counts[2], 220u);
    for (std::size_t r = 0; r < 3; ++r) {
        const auto sites = generate_region(r, cfg);
        std::size_t years = 0;
        for (const auto& s : sites) years += s.year_count();
        EXPECT_EQ(years, counts[r]);
    }

    cfg.total_site_years = 90;
    const auto small = cfg.site_years_per_region();
    const double total = 90.0;
    EXPECT_NEAR(small[0], total * 41.0 / 90.0, 0.5);
    EXPECT_NEAR(small[1], total * 27.0 / 90.0, 0.5);
    EXPECT_NEAR(small[2], total * 22.0 / 90.0, 0.5);
}

TEST(Generator, BetweenRegionSpreadExceedsWithin) {
    GeneratorConfig cfg;
    cfg.total_site_years = 300;
    cfg.years_per_site = 5;
    auto vec = [](const SiteParams& p) {
        return std::vector<double>{std::log(p.autotrophic_fraction), std::log(p.base_rh_rate), std::log(p.q10),
                                   std::log(p.harvest_index),      std::log(p.soc),          std::log(p.clay),
                                   std::log(p.gpp_peak)};
    };
    auto dist = [](const std::vector<double>& a, const std::vector<double>& b) {
        double s = 0.0;
        for (std::size_t i = 0; i < a.size(); ++i) s += (a[i] - b[i]) * (a[i] - b[i]);
        return std::sqrt(s);
    };
    std::vector<std::vector<double>> means;
    double within = 0.0;
    double within_n = 0.0;
    for (std::size_t r = 0; r < cfg.regions.size(); ++r) {
        const auto params = sample_region_params(r, cfg);
        std::vector<double> mean(7, 0.0);
        for (const auto& p : params) {
            p.validate();
            const auto v = vec(p);
            for (std::size_t i = 0; i < 7; ++i) mean[i] += v[i] / static_cast<double>(params.size());
        }
        for (const auto& p : params) {
            within += dist(vec(p), mean);
            within_n += 1.0;
        }
        means.push_back(mean);
    }
    double between = 0.0;
    double between_n = 0.0;
    for (std::size_t a = 0; a < means.size(); ++a) {
        for (std::size_t b = a + 1; b < means.size(); ++b) {
            between += dist(means[a], means[b]);
            between_n += 1.0;
        }
    }
    EXPECT_GT(between / between_n, within / within_n);
}

TEST(Noise, ZeroSigmaIsBitwiseIdentity) {
    const auto sites = generate_region(0, small_config());
    EXPECT_EQ(add_observation_noise(sites[0], NoiseLevels{}, 3), sites[0]);
}

TEST(Noise, TouchesTargetsOnlyAndIsCentred) {
    GeneratorConfig cfg = small_config();
    const auto params = sample_region_params(0, cfg);
    const SiteDataset clean = simulate_site(params[0], "IA", 0, cfg, 274, 99);  // 100010 days
    const double sigma = 0.5;
    NoiseLevels noise;
    noise.sigma[index(Target::Ra)] = sigma;
    const SiteDataset noisy = add_observation_noise(clean, noise, 4);
    EXPECT_EQ(noisy.gpp, clean.gpp);
    EXPECT_EQ(noisy.temp, clean.temp);
    EXPECT_EQ(noisy.precip, clean.precip);
    EXPECT_EQ(noisy.radiation, clean.radiation);
    EXPECT_EQ(noisy.rh, clean.rh);
    double sum = 0.0;
    for (std::size_t i = 0; i < clean.day_count(); ++i) sum += noisy.ra.values[i] - clean.ra.values[i];
    const double n = static_cast<double>(clean.day_count());
    EXPECT_LT(std::abs(sum / n), 3.0 * sigma / std::sqrt(n));
    EXPECT_THROW(add_observation_noise(clean, NoiseLevels::uniform(-1.0), 1), std::invalid_argument);
}

TEST(Split, ByWholeYearsAndDeterministic) {
    GeneratorConfig cfg = small_config();
    const SiteDataset site = simulate_site(sample_region_params(0, cfg)[0], "IA", 0, cfg, 10, 5);
    const auto [train, val] = split(site, 0.8, 17);
    EXPECT_EQ(train.year_count(), 8u);
    EXPECT_EQ(val.year_count(), 2u);
    EXPECT_EQ(train.day_count(), 8 * kDaysPerYear);
    std::set<int> all(train.years.begin(), train.years.end());
    for (int y : val.years) EXPECT_TRUE(all.insert(y).second) << "year in both halves";
    EXPECT_EQ(all, std::set<int>(site.years.begin(), site.years.end()));
    const auto again = split(site, 0.8, 17);
    EXPECT_EQ(again.first, train);
    EXPECT_EQ(again.second, val);

    // Each held-out year carries its own daily block.
    const std::size_t v0 = static_cast<std::size_t>(
        std::find(site.years.begin(), site.years.end(), val.years[0]) - site.years.begin());
    EXPECT_EQ(val.gpp[0], site.gpp[v0 * kDaysPerYear]);

    EXPECT_THROW(split(site.subset_years(std::vector<std::size_t>{0}), 0.5, 1), std::invalid_argument);
    EXPECT_THROW(split(site, 1.0, 1), std::invalid_argument);
    EXPECT_THROW(split(site, 0.0, 1), std::invalid_argument);
}

TEST(Csv, RoundTripIsExact) {
    TempDir dir;
    auto sites = generate_region(2, small_config());
    for (auto& s : sites) s = add_observation_noise(s, NoiseLevels::uniform(0.3), 11);
    mask_targets(sites[0], std::vector<Target>{Target::Rh});
    sites[1].yield.observed[0] = 0;
    sites[1].yield.values[0] = 0.0;
    write_csv(sites, dir.path() / "d.csv", dir.path() / "a.csv");
    const auto back = read_csv(dir.path() / "d.csv", dir.path() / "a.csv", sites[0].region);
    EXPECT_EQ(back, sites);

    write_csv(back, dir.path() / "d2.csv", dir.path() / "a2.csv");
    auto slurp = [](const fs::path& p) {
        std::ifstream in(p);
        return std::string(std::istreambuf_iterator<char>(in), {});
    };
    EXPECT_EQ(slurp(dir.path() / "d.csv"), slurp(dir.path() / "d2.csv"));
    EXPECT_EQ(slurp(dir.path() / "a.csv"), slurp(dir.path() / "a2.csv"));
}

TEST(Csv, FormatDecimalRoundTrips) {
    for (double v : {0.1, 1e-300, 123456789.125, -2.5e-7, 1.0 / 3.0}) {
        EXPECT_EQ(std::stod(format_decimal(v)), v) << format_decimal(v);
        EXPECT_EQ(format_decimal(v).find('e'), std::string::npos);
    }
}

namespace {

std::string daily_rows(const std::string& ra_cell) {
    std::string out;
    for (int d = 1; d <= 365; ++d) {
        out += "S1,2001," + std::to_string(d) + ",3,10,2,15,9000,0.2," + (d == 5 ? ra_cell : std::string("1")) +
               ",0.5,-1.5\n";
    }
    return out;
}

}  // namespace

TEST(Csv, MissingColumnIsNamed) {
    TempDir dir;
    write_text(dir.path() / "d.csv", "site_id,year,doy,temp,precip,radiation,soc,clay,ra,rh,nee\n");
    write_text(dir.path() / "a.csv", std::string(kAnnualHeader) + "\n");
    EXPECT_NE(csv_error(dir.path() / "d.csv", dir.path() / "a.csv").find("'gpp'"), std::string::npos);
}

TEST(Csv, RaggedAndNonNumericReportLine) {
    TempDir dir;
    write_text(dir.path() / "a.csv", std::string(kAnnualHeader) + "\nS1,2001,4.5\n");
    write_text(dir.path() / "d.csv", std::string(kDailyHeader) + "\nS1,2001,1,3,10\n");
    EXPECT_NE(csv_error(dir.path() / "d.csv", dir.path() / "a.csv").find("d.csv:2"), std::string::npos);

    write_text(dir.path() / "d.csv", std::string(kDailyHeader) + "\n" + daily_rows("abc"));
    const std::string err = csv_error(dir.path() / "d.csv", dir.path() / "a.csv");
    EXPECT_NE(err.find("d.csv:6"), std::string::npos) << err;
    EXPECT_NE(err.find("'ra'"), std::string::npos) << err;
}

TEST(Csv, EmptyCellsAreMasked) {
    TempDir dir;
    write_text(dir.path() / "d.csv", std::string(kDailyHeader) + "\n" + daily_rows(""));
    write_text(dir.path() / "a.csv", std::string(kAnnualHeader) + "\nS1,2001,4.5\n");
    const auto sites = read_csv(dir.path() / "d.csv", dir.path() / "a.csv", "X");
    ASSERT_EQ(sites.size(), 1u);
    EXPECT_EQ(sites[0].ra.observed_count(), 364u);
    EXPECT_EQ(sites[0].ra.observed[4], 0);
    EXPECT_EQ(sites[0].yield.values[0], 4.5);

    const Batch b = make_batch(enumerate_sequences(sites), Standardizer::identity());
    EXPECT_EQ(b.mask(Target::Ra)(4, 0), 0.0);
    EXPECT_EQ(b.mask(Target::Ra)(5, 0), 1.0);
}

TEST(Csv, LeapDayIsDropped) {
    TempDir dir;
    write_text(dir.path() / "d.csv", std::string(kDailyHeader) + "\n" + daily_rows("1") +
                                         "S1,2001,366,3,10,2,15,9000,0.2,1,0.5,-1.5\n");
    write_text(dir.path() / "a.csv", std::string(kAnnualHeader) + "\n");
    const auto sites = read_csv(dir.path() / "d.csv", dir.path() / "a.csv", "X");
    EXPECT_EQ(sites[0].day_count(), kDaysPerYear);
    EXPECT_EQ(sites[0].yield.observed_count(), 0u);
}

TEST(Batch, StandardizerAndLayout) {
    const auto sites = generate_region(0, small_config());
    const Standardizer sc = Standardizer::fit(sites);
    const auto refs = enumerate_sequences(sites);
    const Batch b = make_batch(refs, sc);
    EXPECT_EQ(b.steps(), kDaysPerYear);
    EXPECT_EQ(b.size(), refs.size());
    for (std::size_t k = 0; k < kFeatureCount; ++k) {
        double mean = 0.0;
        for (std::size_t t = 0; t < b.steps(); ++t) {
            for (std::size_t s = 0; s < b.size(); ++s) mean += b.drivers[(t * b.size() + s) * kFeatureCount + k];
        }
        EXPECT_NEAR(mean / static_cast<double>(b.steps() * b.size()), 0.0, 1e-9) << feature_name(k);
    }
    EXPECT_EQ(b.gpp(10, 1), refs[1].site->gpp[refs[1].year * kDaysPerYear + 10]);
    EXPECT_EQ(b.sites[0], "IA/" + sites[0].site_id + ":" + std::to_string(sites[0].years[0]));
}
