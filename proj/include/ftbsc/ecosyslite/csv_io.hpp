#pragma once

#include <filesystem>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "ftbsc/ecosyslite/dataset.hpp"

namespace ftbsc::eco {

/// Malformed input file. The message carries the path and, where it applies,
/// the 1-based line number.
class CsvError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

inline constexpr const char* kDailyHeader = "site_id,year,doy,gpp,temp,precip,radiation,soc,clay,ra,rh,nee";
inline constexpr const char* kAnnualHeader = "site_id,year,yield";

/// Shortest decimal (non-exponent) text that parses back to the same double.
std::string format_decimal(double value);

/// Writes the daily and annual tables. Unobserved targets become empty fields.
void write_csv(std::span<const SiteDataset> sites, const std::filesystem::path& daily_path,
               const std::filesystem::path& annual_path);

/// Reads the tables written by write_csv (or supplied externally). Rows are
/// grouped by site in order of first appearance; doy 366 rows are dropped.
/// Every kept year must hold doy 1..365 in order. Site-years missing from the
/// annual table get an unobserved yield.
std::vector<SiteDataset> read_csv(const std::filesystem::path& daily_path, const std::filesystem::path& annual_path,
                                  const std::string& region);

}  // namespace ftbsc::eco
