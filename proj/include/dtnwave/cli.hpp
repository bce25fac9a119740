#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <string>
#include <string_view>
#include <vector>

#include "dtnwave/march.hpp"

namespace dtnwave {

inline constexpr const char* kVersion = "0.1.0";

enum ExitCode : int { kExitOk = 0, kExitNumerical = 1, kExitConfig = 2, kExitOracleCap = 3 };

inline constexpr const char* kSweepHeader =
    "lambda_um,flux_incident,flux_reflected,flux_transmitted,norm_left_outgoing,"
    "norm_right_outgoing,maps_built,cache_hits,status";

struct SweepSpec {
  double lambda_min = 1.0;
  double lambda_max = 1.8;
  int steps = 1;
};

/// Uniform samples including both ends; steps == 1 gives lambda_min only.
std::vector<double> sweep_wavelengths(const SweepSpec& sweep);

/// FNV-1a 64-bit, for tagging outputs with the configuration they came from.
std::uint64_t config_hash(std::string_view text);

/// Largest |u_a(z_j) - u_b(z_j)| over interfaces, relative to the largest
/// interface field norm of b. Zero when both are identically zero.
double max_relative_discrepancy(const SolveResult& a, const SolveResult& b);

/// Solves one wavelength of a problem; one sweep CSV row (no newline).
std::string sweep_row(const WaveguideProblem& problem, double lambda_um);

int run_solve(const std::string& config_path, const std::string& out_dir, bool dump_fields,
              std::ostream& log, std::ostream& err);

int run_sweep(const std::string& config_path, const SweepSpec& sweep, const std::string& out_path,
              int jobs, std::ostream& log, std::ostream& err);

struct VerifyOptions {
  double tolerance = 1e-8;
  std::size_t max_unknowns = 200000;
};

int run_verify(const std::string& config_path, const VerifyOptions& options, std::ostream& out,
               std::ostream& err);

}  // namespace dtnwave
