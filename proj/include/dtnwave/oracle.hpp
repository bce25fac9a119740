#pragma once

#include <cstddef>
#include <stdexcept>

#include "dtnwave/march.hpp"
#include "dtnwave/model.hpp"

namespace dtnwave {

/// The global system would exceed OracleOptions::max_unknowns.
class OracleCapExceeded : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct OracleOptions {
  std::size_t max_unknowns = 200000;
};

/// Solves the whole boundary-value problem as one sparse system on the union
/// of all segment z-grids, with the same compact interior rows and one-sided
/// derivative stencils the DtN maps are built from. Interface planes are shared
/// unknowns; the derivative from both sides is matched there.
SolveResult direct_solve(const WaveguideProblem& problem, const OracleOptions& options = {});

}  // namespace dtnwave
