#include "ftbsc/ecosyslite/csv_io.hpp"

#include <algorithm>
#include <array>
#include <charconv>
#include <cmath>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>

namespace ftbsc::eco {

std::string format_decimal(double value) {
    if (!std::isfinite(value)) throw std::invalid_argument("format_decimal: non-finite value");
    std::array<char, 512> buf{};
    auto [end, ec] = std::to_chars(buf.data(), buf.data() + buf.size(), value, std::chars_format::fixed);
    if (ec != std::errc{}) throw std::runtime_error("format_decimal: value does not fit");
    return std::string(buf.data(), end);
}

namespace {

std::vector<std::string_view> split_fields(std::string_view line) {
    std::vector<std::string_view> out;
    std::size_t start = 0;
    while (true) {
        const std::size_t comma = line.find(',', start);
        if (comma == std::string_view::npos) {
            out.push_back(line.substr(start));
            return out;
        }
        out.push_back(line.substr(start, comma - start));
        start = comma + 1;
    }
}

std::string where(const std::filesystem::path& path, std::size_t line) {
    return path.string() + ":" + std::to_string(line);
}

struct Table {
    std::filesystem::path path;
    std::map<std::string, std::size_t, std::less<>> columns;
    std::size_t width = 0;
    std::vector<std::pair<std::size_t, std::vector<std::string>>> rows;  // (line number, fields)

    std::size_t column(std::string_view name) const {
        auto it = columns.find(name);
        if (it == columns.end()) {
            throw CsvError(path.string() + ": missing required column '" + std::string(name) + "'");
        }
        return it->second;
    }
};

Table load_table(const std::filesystem::path& path, std::span<const std::string_view> required) {
    std::ifstream in(path);
    if (!in) throw CsvError("cannot open " + path.string());
    Table table;
    table.path = path;
    std::string line;
    std::size_t line_no = 0;
    bool have_header = false;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (!have_header) {
            if (line.size() >= 3 && line.compare(0, 3, "\xEF\xBB\xBF") == 0) line.erase(0, 3);
            const auto names = split_fields(line);
            table.width = names.size();
            for (std::size_t i = 0; i < names.size(); ++i) table.columns.emplace(std::string(names[i]), i);
            have_header = true;
            continue;
        }
        if (line.empty()) continue;
        const auto fields = split_fields(line);
        if (fields.size() != table.width) {
            throw CsvError(where(path, line_no) + ": expected " + std::to_string(table.width) + " fields, found " +
                           std::to_string(fields.size()));
        }
        table.rows.emplace_back(line_no, std::vector<std::string>(fields.begin(), fields.end()));
    }
    if (!have_header) throw CsvError(path.string() + ": missing header row");
    for (auto name : required) table.column(name);
    return table;
}

double parse_number(const std::string& text, const Table& table, std::size_t line, std::string_view column) {
    double value = 0.0;
    const char* first = text.data();
    const char* last = text.data() + text.size();
    auto [ptr, ec] = std::from_chars(first, last, value);
    if (text.empty() || ec != std::errc{} || ptr != last || !std::isfinite(value)) {
        throw CsvError(where(table.path, line) + ": column '" + std::string(column) + "' has non-numeric value '" +
                       text + "'");
    }
    return value;
}

std::optional<double> parse_optional(const std::string& text, const Table& table, std::size_t line,
                                     std::string_view column) {
    if (text.empty()) return std::nullopt;
    return parse_number(text, table, line, column);
}

int parse_int(const std::string& text, const Table& table, std::size_t line, std::string_view column) {
    int value = 0;
    auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
    if (text.empty() || ec != std::errc{} || ptr != text.data() + text.size()) {
        throw CsvError(where(table.path, line) + ": column '" + std::string(column) + "' has non-integer value '" +
                       text + "'");
    }
    return value;
}

struct DayRow {
    int doy;
    std::size_t line;
    std::array<double, 4> drivers;  // gpp, temp, precip, radiation
    std::array<std::optional<double>, 3> fluxes;
};

}  // namespace

void write_csv(std::span<const SiteDataset> sites, const std::filesystem::path& daily_path,
               const std::filesystem::path& annual_path) {
    std::ofstream daily(daily_path, std::ios::binary);
    std::ofstream annual(annual_path, std::ios::binary);
    if (!daily) throw CsvError("cannot write " + daily_path.string());
    if (!annual) throw CsvError("cannot write " + annual_path.string());
    daily << kDailyHeader << '\n';
    annual << kAnnualHeader << '\n';

    auto target_field = [](const ObservedSeries& s, std::size_t i) {
        return s.observed[i] ? format_decimal(s.values[i]) : std::string{};
    };
    for (const auto& site : sites) {
        site.validate();
        const std::string soc = format_decimal(site.soc);
        const std::string clay = format_decimal(site.clay);
        for (std::size_t y = 0; y < site.year_count(); ++y) {
            for (std::size_t d = 0; d < kDaysPerYear; ++d) {
                const std::size_t i = y * kDaysPerYear + d;
                daily << site.site_id << ',' << site.years[y] << ',' << (d + 1) << ',' << format_decimal(site.gpp[i])
                      << ',' << format_decimal(site.temp[i]) << ',' << format_decimal(site.precip[i]) << ','
                      << format_decimal(site.radiation[i]) << ',' << soc << ',' << clay << ','
                      << target_field(site.ra, i) << ',' << target_field(site.rh, i) << ','
                      << target_field(site.nee, i) << '\n';
            }
            annual << site.site_id << ',' << site.years[y] << ',' << target_field(site.yield, y) << '\n';
        }
    }
    if (!daily || !annual) throw CsvError("write failure while saving CSV tables");
}

std::vector<SiteDataset> read_csv(const std::filesystem::path& daily_path, const std::filesystem::path& annual_path,
                                  const std::string& region) {
    static constexpr std::array<std::string_view, 12> kDailyColumns{
        "site_id", "year", "doy", "gpp", "temp", "precip", "radiation", "soc", "clay", "ra", "rh", "nee"};
    static constexpr std::array<std::string_view, 3> kAnnualColumns{"site_id", "year", "yield"};

    const Table daily = load_table(daily_path, kDailyColumns);
    std::array<std::size_t, 12> col{};
    for (std::size_t k = 0; k < col.size(); ++k) col[k] = daily.column(kDailyColumns[k]);

    struct SiteAccum {
        double soc = 0.0;
        double clay = 0.0;
        std::map<int, std::vector<DayRow>> years;
    };
    std::vector<std::string> order;
    std::map<std::string, SiteAccum> accum;

    for (const auto& [line, f] : daily.rows) {
        const std::string& site = f[col[0]];
        if (site.empty()) throw CsvError(where(daily_path, line) + ": empty site_id");
        const int year = parse_int(f[col[1]], daily, line, "year");
        const int doy = parse_int(f[col[2]], daily, line, "doy");
        if (doy < 1 || doy > 366) throw CsvError(where(daily_path, line) + ": doy out of range");
        DayRow row{doy, line, {}, {}};
        for (std::size_t k = 0; k < 4; ++k) row.drivers[k] = parse_number(f[col[3 + k]], daily, line, kDailyColumns[3 + k]);
        const double soc = parse_number(f[col[7]], daily, line, "soc");
        const double clay = parse_number(f[col[8]], daily, line, "clay");
        for (std::size_t k = 0; k < 3; ++k) row.fluxes[k] = parse_optional(f[col[9 + k]], daily, line, kDailyColumns[9 + k]);

        auto [it, inserted] = accum.try_emplace(site);
        if (inserted) {
            order.push_back(site);
            it->second.soc = soc;
            it->second.clay = clay;
        }
        if (doy == 366) continue;
        it->second.years[year].push_back(row);
    }

    const Table annual = load_table(annual_path, kAnnualColumns);
    const std::size_t a_site = annual.column("site_id");
    const std::size_t a_year = annual.column("year");
    const std::size_t a_yield = annual.column("yield");
    std::map<std::pair<std::string, int>, std::optional<double>> yields;
    for (const auto& [line, f] : annual.rows) {
        const int year = parse_int(f[a_year], annual, line, "year");
        yields[{f[a_site], year}] = parse_optional(f[a_yield], annual, line, "yield");
    }

    std::vector<SiteDataset> out;
    for (const auto& site : order) {
        SiteAccum& acc = accum.at(site);
        SiteDataset ds;
        ds.site_id = site;
        ds.region = region;
        ds.soc = acc.soc;
        ds.clay = acc.clay;
        for (auto& [year, days] : acc.years) {
            std::stable_sort(days.begin(), days.end(), [](const DayRow& a, const DayRow& b) { return a.doy < b.doy; });
            for (std::size_t d = 0; d < days.size(); ++d) {
                if (days[d].doy != static_cast<int>(d + 1)) {
                    throw CsvError(where(daily_path, days[d].line) + ": site " + site + " year " + std::to_string(year) +
                                   " expected doy " + std::to_string(d + 1) + ", found " + std::to_string(days[d].doy));
                }
            }
            if (days.size() != kDaysPerYear) {
                throw CsvError(daily_path.string() + ": site " + site + " year " + std::to_string(year) + " has " +
                               std::to_string(days.size()) + " days, expected 365");
            }
            ds.years.push_back(year);
            for (const auto& row : days) {
                ds.gpp.push_back(row.drivers[0]);
                ds.temp.push_back(row.drivers[1]);
                ds.precip.push_back(row.drivers[2]);
                ds.radiation.push_back(row.drivers[3]);
                for (std::size_t k = 0; k < 3; ++k) {
                    ds.flux(kFluxTargets[k]).push(row.fluxes[k].value_or(0.0), row.fluxes[k].has_value());
                }
            }
            auto y = yields.find({site, year});
            const bool has = y != yields.end() && y->second.has_value();
            ds.yield.push(has ? *y->second : 0.0, has);
        }
        try {
            ds.validate();
        } catch (const std::invalid_argument& e) {
            throw CsvError(daily_path.string() + ": " + e.what());
        }
        out.push_back(std::move(ds));
    }
    return out;
}

}  // namespace ftbsc::eco
