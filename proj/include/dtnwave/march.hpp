#pragma once

#include <cstddef>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/LU>

#include "dtnwave/dtn.hpp"
#include "dtnwave/model.hpp"
#include "dtnwave/transverse.hpp"
#include "dtnwave/types.hpp"

namespace dtnwave {

/// Riccati data at interface z_j: u_z = Q u + g and Y u + h = u(z_m).
struct MarchState {
  int interface = 0;
  MatrixXc Q;
  MatrixXc Y;
  VectorXc g;
  VectorXc h;
};

/// What the forward pass needs from one backward step on segment (z_{j-1}, z_j):
/// u(z_j) = (Q(z_j) - M22)^-1 (M21 u(z_{j-1}) + s2 - g(z_j)).
struct InterfaceFactor {
  int interface = 0;
  Eigen::PartialPivLU<MatrixXc> lu;
  std::shared_ptr<const DtnBlocks> blocks;
  VectorXc s2;
  VectorXc g_right;
  double condition = 1.0;
};

struct SolveDiagnostics {
  std::size_t maps_built = 0;
  std::size_t cache_hits = 0;
  std::size_t sources_built = 0;
  std::size_t operators_built = 0;
  std::vector<double> step_conditions;  // per backward step, from z_m down to z_1
  double closure_condition = 1.0;
  double max_mode_condition = 1.0;
  /// |Y(z_0) u(z_0) + h(z_0) - u(z_m)| / max(|u(z_m)|, tiny).
  double recovery_residual = 0.0;
  /// Relative residual of the global system (oracle solves only).
  double system_residual = 0.0;
  std::size_t unknowns = 0;
  std::vector<std::string> warnings;
  std::vector<MarchState> states;  // filled when SolveOptions::keep_states
};

struct SolveResult {
  std::vector<double> z;
  std::vector<VectorXc> u_at_interfaces;
  VectorXc incident;     // u+ at z_0
  VectorXc reflected;    // u(z_0) - u+
  VectorXc transmitted;  // u(z_m)
  VectorXc reflected_coefficients;
  VectorXc transmitted_coefficients;
  std::optional<double> flux_incident;
  std::optional<double> flux_reflected;
  std::optional<double> flux_transmitted;
  double norm_reflected = 0.0;    // h_x-weighted L2 norm
  double norm_transmitted = 0.0;
  /// Power through each interface plane, h_x Im(u^H u_z) (march only).
  std::vector<double> interface_flux;
  double hx = 0.0;
  SolveDiagnostics diagnostics;
};

struct SolveOptions {
  /// Shared across solves when set; otherwise each solve uses a private cache.
  std::shared_ptr<DtnCache> cache;
  bool keep_states = false;
};

MarchState init_state(const TransverseOperator& right_lead, int interface);

struct StepResult {
  MarchState state;
  InterfaceFactor factor;
};

/// One backward Riccati step across the segment ending at state.interface.
StepResult step_back(const MarchState& state, const DtnMap& map);

/// u(z_0) from the left radiation condition with incident field u_plus.
VectorXc close_left(const MarchState& state, const TransverseOperator& left_lead,
                    const VectorXc& u_plus, double* condition = nullptr);

/// Forward pass: u(z_j), j = 0..m, from u(z_0) and the stored factors.
std::vector<VectorXc> recover_fields(const VectorXc& u0,
                                     const std::vector<InterfaceFactor>& factors);

/// u+ = amplitude * (mode-th lead eigenvector); zero without incidence.
VectorXc incident_field(const WaveguideProblem& problem, const LeadModes& left);

/// Incident/reflected/transmitted split, modal coefficients and fluxes.
void fill_lead_quantities(SolveResult& result, const LeadModes& left, const LeadModes& right,
                          const std::optional<IncidentSpec>& incident);

SolveResult solve(const WaveguideProblem& problem, const SolveOptions& options = {});

}  // namespace dtnwave
