#include "dtnwave/march.hpp"

#include <cmath>
#include <map>
#include <sstream>

namespace dtnwave {

namespace {

constexpr double kWarnCondition = 1e12;
constexpr double kSingularCondition = 1e15;

std::string fmt_cond(double c) {
  std::ostringstream s;
  s.precision(3);
  s << c;
  return s.str();
}

}  // namespace

MarchState init_state(const TransverseOperator& right_lead, int interface) {
  const Eigen::Index n = right_lead.size();
  MarchState s;
  s.interface = interface;
  s.Q = kI * operator_sqrt(right_lead);
  s.Y = MatrixXc::Identity(n, n);
  s.g = VectorXc::Zero(n);
  s.h = VectorXc::Zero(n);
  return s;
}

StepResult step_back(const MarchState& state, const DtnMap& map) {
  StepResult out;
  InterfaceFactor& f = out.factor;
  f.interface = state.interface;
  f.lu.compute(state.Q - map.M22());
  f.condition = 1.0 / f.lu.rcond();
  if (!(f.condition <= kSingularCondition)) {
    throw NumericalError("Q(z_" + std::to_string(state.interface) +
                         ") - M22 is singular to working precision (cond ~ " +
                         fmt_cond(f.condition) +
                         "): physical resonance or degenerate grid at this interface");
  }
  f.blocks = map.blocks;
  f.s2 = map.s2;
  f.g_right = state.g;

  const MatrixXc t_m21 = f.lu.solve(map.M21());
  const VectorXc t_src = f.lu.solve(VectorXc(map.s2 - state.g));

  MarchState& next = out.state;
  next.interface = state.interface - 1;
  next.Q = map.M11() + map.M12() * t_m21;
  next.Y = state.Y * t_m21;
  next.g = map.s1 + map.M12() * t_src;
  next.h = state.h + state.Y * t_src;
  if (!next.Q.allFinite() || !next.Y.allFinite() || !next.g.allFinite() || !next.h.allFinite())
    throw NumericalError("non-finite march state at interface " + std::to_string(next.interface));
  return out;
}

VectorXc close_left(const MarchState& state, const TransverseOperator& left_lead,
                    const VectorXc& u_plus, double* condition) {
  const MatrixXc ik_sqrt = kI * operator_sqrt(left_lead);
  Eigen::PartialPivLU<MatrixXc> lu(state.Q + ik_sqrt);
  const double cond = 1.0 / lu.rcond();
  if (condition) *condition = cond;
  if (!(cond <= kSingularCondition))
    throw NumericalError("left closure Q(z_0) + i sqrt(L(z_0-)) is singular (cond ~ " +
                         fmt_cond(cond) + ")");
  const VectorXc rhs = 2.0 * (ik_sqrt * u_plus) - state.g;
  return lu.solve(rhs);
}

std::vector<VectorXc> recover_fields(const VectorXc& u0,
                                     const std::vector<InterfaceFactor>& factors) {
  std::vector<VectorXc> u;
  u.reserve(factors.size() + 1);
  u.push_back(u0);
  for (const auto& f : factors) {
    const VectorXc rhs = f.blocks->M21 * u.back() + f.s2 - f.g_right;
    u.push_back(f.lu.solve(rhs));
  }
  return u;
}

VectorXc incident_field(const WaveguideProblem& problem, const LeadModes& left) {
  if (!problem.incident) return VectorXc::Zero(left.count());
  const auto& inc = *problem.incident;
  if (inc.mode >= left.count())
    throw ConfigError("incident.mode: lead has only " + std::to_string(left.count()) + " modes");
  return inc.amplitude * left.vectors.col(inc.mode);
}

void fill_lead_quantities(SolveResult& r, const LeadModes& left, const LeadModes& right,
                          const std::optional<IncidentSpec>& incident) {
  r.reflected = r.u_at_interfaces.front() - r.incident;
  r.transmitted = r.u_at_interfaces.back();
  r.reflected_coefficients = modal_coefficients(r.reflected, left);
  r.transmitted_coefficients = modal_coefficients(r.transmitted, right);
  r.norm_reflected = std::sqrt(r.hx) * r.reflected.norm();
  r.norm_transmitted = std::sqrt(r.hx) * r.transmitted.norm();
  if (left.lossless) {
    r.flux_incident = incident ? modal_flux(r.incident, left).flux : 0.0;
    r.flux_reflected = modal_flux(r.reflected, left).flux;
  }
  if (right.lossless) r.flux_transmitted = modal_flux(r.transmitted, right).flux;
}

SolveResult solve(const WaveguideProblem& problem, const SolveOptions& options) {
  const TransverseGrid grid = build_grid(problem);
  auto cache = options.cache ? options.cache : std::make_shared<DtnCache>();

  SolveResult result;
  SolveDiagnostics& diag = result.diagnostics;
  result.hx = grid.hx;
  result.z = problem.interfaces();
  const int m = static_cast<int>(problem.segments.size());

  std::map<std::string, std::shared_ptr<const TransverseOperator>> ops;
  auto op_for = [&](const std::string& id) {
    auto it = ops.find(id);
    if (it != ops.end()) return it->second;
    ++diag.operators_built;
    return ops.emplace(id, assemble_L(problem.profile(id), grid, problem.k0)).first->second;
  };

  std::vector<DtnMap> maps;
  maps.reserve(static_cast<std::size_t>(m));
  for (int j = 0; j < m; ++j) {
    const Segment& seg = problem.segments[static_cast<std::size_t>(j)];
    const double z_offset = result.z[static_cast<std::size_t>(j)];
    const auto op = op_for(seg.profile_id);
    std::string source_key;
    const SourceTerm* src = nullptr;
    if (seg.source_id) {
      src = &problem.source(*seg.source_id);
      std::ostringstream k;
      k.precision(17);
      k << src->id;
      if (src->z_origin() == ZOrigin::global) k << "@z=" << z_offset;
      source_key = k.str();
    }
    try {
      auto found = cache->lookup(structure_key(*op, seg), source_key, seg, op, [&] {
        return sample_source(src, seg, grid, z_offset);
      });
      diag.maps_built += found.map_built ? 1 : 0;
      diag.cache_hits += found.map_built ? 0 : 1;
      diag.sources_built += found.source_built ? 1 : 0;
      diag.max_mode_condition = std::max(diag.max_mode_condition, found.max_condition);
      maps.push_back(std::move(found.map));
    } catch (const NumericalError& e) {
      throw NumericalError("DtN map of segment " + std::to_string(j + 1) + ": " + e.what());
    }
  }

  const auto right_op = op_for(problem.right_profile);
  const auto left_op = op_for(problem.left_profile);

  MarchState state;
  try {
    state = init_state(*right_op, m);
  } catch (const NumericalError& e) {
    throw NumericalError(std::string("right lead: ") + e.what());
  }
  if (options.keep_states) diag.states.push_back(state);

  std::vector<InterfaceFactor> factors(static_cast<std::size_t>(m));
  for (int j = m; j >= 1; --j) {
    StepResult step;
    try {
      step = step_back(state, maps[static_cast<std::size_t>(j - 1)]);
    } catch (const NumericalError& e) {
      throw NumericalError("backward march at interface " + std::to_string(j) + ": " + e.what());
    }
    diag.step_conditions.push_back(step.factor.condition);
    if (step.factor.condition > kWarnCondition)
      diag.warnings.push_back("interface " + std::to_string(j) + ": cond(Q - M22) ~ " +
                              fmt_cond(step.factor.condition));
    factors[static_cast<std::size_t>(j - 1)] = std::move(step.factor);
    state = std::move(step.state);
    if (options.keep_states) diag.states.push_back(state);
  }

  LeadModes left_modes, right_modes;
  try {
    left_modes = lead_modes(*left_op);
    right_modes = lead_modes(*right_op);
    result.incident = incident_field(problem, left_modes);
    const VectorXc u0 = close_left(state, *left_op, result.incident, &diag.closure_condition);
    if (diag.closure_condition > kWarnCondition)
      diag.warnings.push_back("left closure: cond ~ " + fmt_cond(diag.closure_condition));
    result.u_at_interfaces = recover_fields(u0, factors);
  } catch (const NumericalError& e) {
    throw NumericalError(std::string("left closure: ") + e.what());
  }

  const VectorXc& um = result.u_at_interfaces.back();
  const VectorXc via_y = state.Y * result.u_at_interfaces.front() + state.h;
  diag.recovery_residual = (via_y - um).norm() / std::max(um.norm(), 1e-300);
  if (um.norm() == 0.0 && via_y.norm() == 0.0) diag.recovery_residual = 0.0;

  result.interface_flux.resize(static_cast<std::size_t>(m) + 1);
  for (int j = 0; j <= m; ++j) {
    const auto& u = result.u_at_interfaces;
    VectorXc dz;
    if (j < m) {
      const DtnMap& mp = maps[static_cast<std::size_t>(j)];
      dz = mp.M11() * u[static_cast<std::size_t>(j)] + mp.M12() * u[static_cast<std::size_t>(j) + 1] + mp.s1;
    } else {
      const DtnMap& mp = maps[static_cast<std::size_t>(m - 1)];
      dz = mp.M21() * u[static_cast<std::size_t>(m) - 1] + mp.M22() * u[static_cast<std::size_t>(m)] + mp.s2;
    }
    result.interface_flux[static_cast<std::size_t>(j)] =
        grid.hx * u[static_cast<std::size_t>(j)].dot(dz).imag();
  }

  fill_lead_quantities(result, left_modes, right_modes, problem.incident);
  return result;
}

}  // namespace dtnwave
