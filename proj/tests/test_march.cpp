#include <doctest.h>

#include <cmath>

#include "dtnwave/march.hpp"

using namespace dtnwave;

namespace {

std::string config_path(const std::string& name) { return std::string(DTNWAVE_CONFIG_DIR) + "/" + name; }

// Closed (sigma = 0) homogeneous guide, one segment, incident fundamental mode.
WaveguideProblem uniform_problem(int q, double length = 0.5) {
  WaveguideProblem p;
  p.half_width = 1.0;
  p.n_points = 15;
  p.k0 = 2.0 * kPi;
  p.profiles = {{"air", {{-1.0, 1.0, 1.0}}}};
  p.segments = {{"air", length, q, std::nullopt}};
  p.left_profile = p.right_profile = "air";
  p.incident = IncidentSpec{0, {1.0, 0.0}};
  validate(p);
  return p;
}

double max_rel(const SolveResult& a, const SolveResult& b) {
  double scale = 0.0, diff = 0.0;
  for (std::size_t j = 0; j < b.u_at_interfaces.size(); ++j) {
    scale = std::max(scale, b.u_at_interfaces[j].norm());
    diff = std::max(diff, (a.u_at_interfaces[j] - b.u_at_interfaces[j]).norm());
  }
  return diff / scale;
}

}  // namespace

TEST_CASE("initial state at the right lead") {
  const auto p = uniform_problem(8);
  const auto op = assemble_L(p.profile("air"), build_grid(p), p.k0);
  const auto s = init_state(*op, 3);
  CHECK(s.interface == 3);
  CHECK((s.Q - kI * operator_sqrt(*op)).norm() == 0.0);
  CHECK(s.Y.isIdentity(0.0));
  CHECK(s.g.isZero(0.0));
  CHECK(s.h.isZero(0.0));
}

TEST_CASE("step across a decoupled segment") {
  // M12 = 0: the left derivative no longer sees the right side, so Q' = M11
  // and g' = s1, while Y and h follow the explicit formulas.
  const int n = 3;
  MarchState s;
  s.interface = 2;
  s.Q = MatrixXc::Identity(n, n) * Complex(0.0, 2.0);
  s.Y = MatrixXc::Identity(n, n);
  s.g = VectorXc::Constant(n, Complex(0.5, 0.0));
  s.h = VectorXc::Zero(n);
  DtnBlocks b;
  b.M11 = MatrixXc::Random(n, n);
  b.M12 = MatrixXc::Zero(n, n);
  b.M21 = MatrixXc::Random(n, n);
  b.M22 = MatrixXc::Random(n, n);
  DtnMap map{std::make_shared<const DtnBlocks>(b), VectorXc::Constant(n, 1.0), VectorXc::Constant(n, 2.0), "k"};
  const auto r = step_back(s, map);
  const MatrixXc T = (s.Q - b.M22).inverse();
  CHECK(r.state.interface == 1);
  CHECK((r.state.Q - b.M11).norm() == 0.0);
  CHECK((r.state.g - map.s1).norm() == 0.0);
  CHECK((r.state.Y - T * b.M21).norm() <= 1e-12 * (T * b.M21).norm());
  CHECK((r.state.h - T * (map.s2 - s.g)).norm() <= 1e-12 * (T * (map.s2 - s.g)).norm());
}

TEST_CASE("outgoing impedance is a near fixed point of a lead-like segment") {
  const auto p0 = uniform_problem(8);
  const auto grid = build_grid(p0);
  const auto op = assemble_L(p0.profile("air"), grid, p0.k0);
  const MatrixXc Q = kI * operator_sqrt(*op);
  const auto s0 = init_state(*op, 1);
  double prev = 0.0;
  for (int q : {16, 32, 64}) {
    const Segment seg{"air", 0.5, q, std::nullopt};
    const auto map = compute_dtn_map(seg, op, MatrixXc::Zero(grid.n, q + 1));
    const auto r = step_back(s0, map);
    // Only the propagating part matters for the discrete dispersion error;
    // evanescent modes of the coarse transverse grid converge too.
    const double err = (r.state.Q - Q).norm() / Q.norm();
    if (prev > 0.0) CHECK(prev / err > 10.0);
    prev = err;
  }
  CHECK(prev < 1e-5);
}

TEST_CASE("uniform guide: no reflection, unit-modulus transmission") {
  const auto p = uniform_problem(100);
  const auto r = solve(p);
  CHECK(r.reflected.norm() <= 1e-8 * r.incident.norm());
  CHECK((r.u_at_interfaces.front() - r.incident).norm() <= 1e-8 * r.incident.norm());
  REQUIRE(r.flux_incident);
  CHECK(*r.flux_reflected / *r.flux_incident <= 1e-8);
  CHECK(std::abs(r.transmitted.norm() - r.incident.norm()) <= 1e-6 * r.incident.norm());
  // Phase: exp(i beta_0 L) for the fundamental.
  const auto modes = lead_modes(*assemble_L(p.profile("air"), build_grid(p), p.k0));
  const Complex expected = std::exp(kI * modes.beta(0) * 0.5);
  CHECK(std::abs(r.transmitted_coefficients(0) - expected) < 1e-6);
}

TEST_CASE("uniform guide example config") {
  const auto r = solve(load_problem(config_path("uniform.json")));
  REQUIRE(r.flux_incident);
  CHECK(*r.flux_reflected / *r.flux_incident <= 1e-8);
  CHECK(std::abs(r.transmitted.norm() - r.incident.norm()) <= 1e-6 * r.incident.norm());
}

TEST_CASE("doubling the incident amplitude doubles the field exactly") {
  auto p = load_problem(config_path("grating_small_incident.json"));
  const auto a = solve(p);
  p.incident->amplitude *= 2.0;
  const auto b = solve(p);
  for (std::size_t j = 0; j < a.u_at_interfaces.size(); ++j)
    CHECK(b.u_at_interfaces[j] == 2.0 * a.u_at_interfaces[j]);
}

TEST_CASE("zero excitation gives zero fields and states") {
  SolveOptions opt;
  opt.keep_states = true;
  const auto r = solve(load_problem(config_path("zero.json")), opt);
  for (const auto& u : r.u_at_interfaces) CHECK(u.isZero(0.0));
  for (const auto& s : r.diagnostics.states) {
    CHECK(s.g.isZero(0.0));
    CHECK(s.h.isZero(0.0));
  }
  CHECK(r.norm_reflected == 0.0);
  CHECK(r.norm_transmitted == 0.0);
}

TEST_CASE("sourceless march keeps g and h exactly zero") {
  SolveOptions opt;
  opt.keep_states = true;
  const auto p = load_problem(config_path("grating_small_incident.json"));
  const auto r = solve(p, opt);
  REQUIRE(r.diagnostics.states.size() == p.segments.size() + 1);
  for (const auto& s : r.diagnostics.states) {
    CHECK(s.g.isZero(0.0));
    CHECK(s.h.isZero(0.0));
  }
  CHECK_FALSE(r.u_at_interfaces.back().isZero(0.0));
}

TEST_CASE("forward recovery agrees with the fundamental solution operator") {
  for (const char* name : {"grating_small.json", "grating_small_incident.json"}) {
    CAPTURE(name);
    const auto r = solve(load_problem(config_path(name)));
    CHECK(r.diagnostics.recovery_residual <= 1e-10);
  }
  const auto r = solve(uniform_problem(12));
  CHECK(r.diagnostics.recovery_residual <= 1e-10);
}

TEST_CASE("superposition of incident and source responses") {
  const auto both = load_problem(config_path("grating_small.json"));
  auto with_incident = both;
  with_incident.incident = IncidentSpec{0, {0.7, -0.2}};
  auto incident_only = with_incident;
  for (auto& s : incident_only.segments) s.source_id.reset();
  const auto source_only = both;
  const auto a = solve(with_incident), b = solve(incident_only), c = solve(source_only);
  double diff = 0.0, scale = 0.0;
  for (std::size_t j = 0; j < a.u_at_interfaces.size(); ++j) {
    diff = std::max(diff, (a.u_at_interfaces[j] - b.u_at_interfaces[j] - c.u_at_interfaces[j]).norm());
    scale = std::max(scale, a.u_at_interfaces[j].norm());
  }
  CHECK(diff <= 1e-10 * scale);
}

TEST_CASE("repeated solves are bitwise identical") {
  const auto p = load_problem(config_path("grating_small.json"));
  const auto a = solve(p), b = solve(p);
  CHECK(max_rel(a, b) == 0.0);
}

TEST_CASE("grating builds one map per distinct profile") {
  const auto p = load_problem(config_path("bragg_incident.json"));
  const auto r = solve(p);
  CHECK(r.diagnostics.maps_built == 2);
  CHECK(r.diagnostics.cache_hits == 39);
  CHECK(r.diagnostics.operators_built == 2);
  CHECK(r.diagnostics.step_conditions.size() == 41);
}

TEST_CASE("shared cache across solves") {
  auto cache = std::make_shared<DtnCache>();
  SolveOptions opt;
  opt.cache = cache;
  const auto p = load_problem(config_path("grating_small.json"));
  const auto a = solve(p, opt);
  const auto b = solve(p, opt);
  CHECK(a.diagnostics.maps_built == 2);
  CHECK(b.diagnostics.maps_built == 0);
  CHECK(b.diagnostics.sources_built == 0);
  CHECK(max_rel(a, b) == 0.0);
}

TEST_CASE("closed lossless grating conserves flux at every interface") {
  auto p = load_problem(config_path("bragg_closed.json"));
  p.segments.resize(9);
  validate(p);
  const auto r = solve(p);
  REQUIRE(r.flux_incident);
  const double pin = *r.flux_incident;
  CHECK(std::abs(pin - *r.flux_reflected - *r.flux_transmitted) <= 1e-6 * pin);
  for (double f : r.interface_flux) CHECK(f == doctest::Approx(r.interface_flux.back()).epsilon(1e-9));
  CHECK(r.interface_flux.back() == doctest::Approx(*r.flux_transmitted).epsilon(1e-9));
}

TEST_CASE("stretched leads report no flux") {
  const auto r = solve(load_problem(config_path("grating_small_incident.json")));
  CHECK_FALSE(r.flux_incident);
  CHECK_FALSE(r.flux_transmitted);
  CHECK(r.norm_reflected > 0.0);
  CHECK(r.reflected_coefficients.size() == 30);
}

TEST_CASE("incident mode beyond the lead basis is rejected") {
  WaveguideProblem p = uniform_problem(8);
  p.incident->mode = 15;
  CHECK_THROWS_AS(solve(p), ConfigError);
}
