#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace ftbsc::harness {

struct GradcheckEntry {
    std::uint64_t seed = 0;
    std::string term;  // pred, phys, prox, calib, total
    double max_relative_error = 0.0;
    std::string worst_parameter;
};

/// Finite-difference check of every loss term through the full model
/// (trunk, flux heads, yield attention and calibration head) on short
/// windows of simulated sites, one entry per (seed, term).
std::vector<GradcheckEntry> gradcheck_suite(const std::vector<std::uint64_t>& seeds, double step = 1e-5);

double max_error(const std::vector<GradcheckEntry>& entries);

}  // namespace ftbsc::harness
