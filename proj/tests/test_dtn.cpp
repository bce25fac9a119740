#include <doctest.h>

#include <cmath>
#include <random>
#include <thread>

#include "dtnwave/dtn.hpp"

using namespace dtnwave;

namespace {

std::shared_ptr<const TransverseOperator> scalar_op(Complex lambda) {
  MatrixXc L(1, 1);
  L(0, 0) = lambda;
  return std::make_shared<const TransverseOperator>(L, VectorXc::Ones(1), 1.0, "scalar");
}

// Exact DtN map of u'' + k^2 u = 0 on [0, d].
Eigen::Matrix2d analytic_map(double k, double d) {
  const double cot = std::cos(k * d) / std::sin(k * d), csc = 1.0 / std::sin(k * d);
  Eigen::Matrix2d m;
  m << -k * cot, k * csc, -k * csc, k * cot;
  return m;
}

double map_error(const DtnBlocks& b, const Eigen::Matrix2d& exact) {
  Eigen::Matrix2d err;
  err << std::abs(b.M11(0, 0) - exact(0, 0)), std::abs(b.M12(0, 0) - exact(0, 1)),
      std::abs(b.M21(0, 0) - exact(1, 0)), std::abs(b.M22(0, 0) - exact(1, 1));
  return err.maxCoeff();
}

Segment segment(double length, int q) { return {"p", length, q, std::nullopt}; }

ModeWorkspace workspace(const std::shared_ptr<const TransverseOperator>& op, double length, int q) {
  return ModeWorkspace(build_scheme(q, length / q), op);
}

TransverseGrid make_grid(int n, double D, PmlSpec pml = {}) {
  TransverseGrid g;
  g.n = n;
  g.half_width = D;
  g.hx = 2.0 * D / (n + 1);
  g.pml = pml;
  return g;
}

// The literal procedure: solve the segment for each unit column of the
// 2N-dimensional boundary data and read derivatives off the endpoint formulas.
DtnBlocks blocks_by_unit_columns(const ModeWorkspace& ws) {
  const Eigen::Index n = ws.L().rows();
  const MatrixXc zero_f = MatrixXc::Zero(n, ws.scheme().q + 1);
  MatrixXc full(2 * n, 2 * n);
  for (Eigen::Index c = 0; c < 2 * n; ++c) {
    VectorXc left = VectorXc::Zero(n), right = VectorXc::Zero(n);
    (c < n ? left(c) : right(c - n)) = 1.0;
    const MatrixXc interior = solve_segment_modes(ws, left, right, zero_f);
    const auto d = endpoint_derivatives(ws.scheme(), ws.L(), interior, left, right, zero_f);
    full.col(c) << d.left, d.right;
  }
  return {full.topLeftCorner(n, n), full.topRightCorner(n, n), full.bottomLeftCorner(n, n),
          full.bottomRightCorner(n, n)};
}

double rel(const MatrixXc& a, const MatrixXc& b) { return (a - b).norm() / b.norm(); }

}  // namespace

TEST_CASE("single-mode map converges to the analytic cot/csc map at fourth order") {
  for (double k : {1.0, kPi / 2.0, 2.3}) {
    CAPTURE(k);
    const auto op = scalar_op(k * k);
    double prev = 0.0;
    for (int q : {8, 16, 32, 64}) {
      const double err = map_error(compute_dtn_blocks(workspace(op, 1.0, q)), analytic_map(k, 1.0));
      if (prev > 0.0) {
        const double ratio = prev / err;
        CAPTURE(q);
        CHECK(ratio >= 12.0);
        CHECK(ratio <= 20.0);
      }
      prev = err;
    }
  }
}

TEST_CASE("quarter-wave segment map") {
  const double k = kPi / 2.0;
  const auto b = compute_dtn_blocks(workspace(scalar_op(k * k), 1.0, 64));
  CHECK(std::abs(b.M11(0, 0)) < 1e-6);
  CHECK(std::abs(b.M12(0, 0) - k) < 1e-6);
  CHECK(std::abs(b.M21(0, 0) + k) < 1e-6);
  CHECK(std::abs(b.M22(0, 0)) < 1e-6);
}

TEST_CASE("segment solve: zero data gives zero") {
  const auto op = assemble_L({"p", {{-1.0, 1.0, 1.5}}}, make_grid(9, 1.0), 4.0);
  const auto ws = workspace(op, 0.4, 6);
  const MatrixXc u = solve_segment_modes(ws, VectorXc::Zero(9), VectorXc::Zero(9), MatrixXc::Zero(9, 7));
  CHECK(u.norm() == 0.0);
}

TEST_CASE("segment solve matches the two-point boundary value solution") {
  const double k = 2.0, d = 1.0;
  const auto op = scalar_op(k * k);
  double prev = 0.0;
  for (int q : {8, 16, 32}) {
    const auto ws = workspace(op, d, q);
    const MatrixXc u = solve_segment_modes(ws, VectorXc::Ones(1), VectorXc::Zero(1), MatrixXc::Zero(1, q + 1));
    double err = 0.0;
    for (int j = 1; j < q; ++j) {
      const double xi = j * d / q;
      err = std::max(err, std::abs(u(0, j - 1) - std::sin(k * (d - xi)) / std::sin(k * d)));
    }
    if (prev > 0.0) CHECK(prev / err == doctest::Approx(16.0).epsilon(0.2));
    prev = err;
  }
  CHECK(prev < 1e-5);
}

TEST_CASE("manufactured solution: interior values and endpoint derivatives converge at fourth order") {
  // u = s(x) e^{iz} with s the discrete half-sine, an exact eigenvector of L
  // for n = 1 and no PML; f = u_zz + L u = (lambda_1 - 1) u.
  const double D = 1.0, k0 = 3.0, z0 = 0.3, len = 0.8;
  const int n = 15;
  const auto grid = make_grid(n, D);
  const auto op = assemble_L({"p", {{-D, D, 1.0}}}, grid, k0);
  const double s1 = std::sin(kPi / (2.0 * (n + 1)));
  const double lambda1 = k0 * k0 - 4.0 / (grid.hx * grid.hx) * s1 * s1;
  VectorXc shape(n);
  for (int i = 0; i < n; ++i) shape(i) = std::sin(kPi * (grid.x(i) + D) / (2.0 * D));
  auto exact = [&](double z) -> VectorXc { return shape * std::exp(kI * z); };

  SourceTerm src{"m", CustomSource{[&](double x, double z, double) {
                                     return (lambda1 - 1.0) * std::sin(kPi * (x + D) / (2.0 * D)) *
                                            std::exp(kI * z);
                                   },
                                   ZOrigin::global}};
  double prev_u = 0.0, prev_d = 0.0;
  for (int q : {4, 8, 16, 32}) {
    const Segment seg = segment(len, q);
    const auto ws = workspace(op, len, q);
    const MatrixXc f = sample_source(&src, seg, grid, z0);
    const MatrixXc u = solve_segment_modes(ws, exact(z0), exact(z0 + len), f);
    double err_u = 0.0;
    for (int j = 1; j < q; ++j) err_u = std::max(err_u, (u.col(j - 1) - exact(z0 + j * len / q)).norm());
    const auto d = endpoint_derivatives(ws.scheme(), ws.L(), u, exact(z0), exact(z0 + len), f);
    const double err_d = std::max((d.left - kI * exact(z0)).norm(), (d.right - kI * exact(z0 + len)).norm());
    if (prev_u > 0.0) {
      CAPTURE(q);
      CHECK(prev_u / err_u == doctest::Approx(16.0).epsilon(0.2));
      CHECK(prev_d / err_d == doctest::Approx(16.0).epsilon(0.2));
    }
    prev_u = err_u;
    prev_d = err_d;
  }
}

TEST_CASE("endpoint derivative of a travelling single mode") {
  const double k = 1.7, len = 0.9;
  const auto op = scalar_op(k * k);
  double prev = 0.0;
  for (int q : {8, 16, 32}) {
    const auto ws = workspace(op, len, q);
    const MatrixXc f = MatrixXc::Zero(1, q + 1);
    const VectorXc ul = VectorXc::Constant(1, 1.0), ur = VectorXc::Constant(1, std::exp(kI * k * len));
    const MatrixXc u = solve_segment_modes(ws, ul, ur, f);
    const auto d = endpoint_derivatives(ws.scheme(), ws.L(), u, ul, ur, f);
    const double err = std::abs(d.left(0) - kI * k);
    if (prev > 0.0) CHECK(prev / err == doctest::Approx(16.0).epsilon(0.2));
    prev = err;
  }
}

TEST_CASE("constant field with matching source has zero derivative") {
  // u = c, u'' = 0 => f = L c.
  const double lambda = 3.0;
  const auto op = scalar_op(lambda);
  const int q = 6;
  const auto ws = workspace(op, 0.5, q);
  const MatrixXc f = MatrixXc::Constant(1, q + 1, lambda * 2.0);
  const VectorXc c = VectorXc::Constant(1, 2.0);
  const MatrixXc u = solve_segment_modes(ws, c, c, f);
  CHECK((u.array() - 2.0).abs().maxCoeff() < 1e-12);
  const auto d = endpoint_derivatives(ws.scheme(), ws.L(), u, c, c, f);
  CHECK(std::abs(d.left(0)) < 1e-11);
  CHECK(std::abs(d.right(0)) < 1e-11);
}

TEST_CASE("endpoint derivatives need q >= 3") {
  const auto s = build_scheme(2, 0.1);
  CHECK_THROWS_AS(endpoint_derivatives(s, MatrixXc::Identity(1, 1), MatrixXc::Zero(1, 1),
                                       VectorXc::Zero(1), VectorXc::Zero(1), MatrixXc::Zero(1, 3)),
                  std::invalid_argument);
}

TEST_CASE("source vectors") {
  const auto grid = make_grid(11, 1.0, PmlSpec{0.25, 3.0, 2});
  const auto op = assemble_L({"p", {{-1.0, 0.0, 1.2}, {0.0, 1.0, 2.0}}}, grid, 5.0);
  const int q = 7;
  const auto ws = workspace(op, 0.35, q);

  SUBCASE("zero source gives exact zeros") {
    const auto s = compute_source_vector(ws, MatrixXc::Zero(11, q + 1));
    CHECK(s.s1.isZero(0.0));
    CHECK(s.s2.isZero(0.0));
  }

  std::mt19937 rng(5);
  std::normal_distribution<double> g;
  auto random_f = [&] {
    MatrixXc f(11, q + 1);
    for (Eigen::Index i = 0; i < f.size(); ++i) f(i) = Complex(g(rng), g(rng));
    return f;
  };
  const MatrixXc f1 = random_f(), f2 = random_f();
  const auto a = compute_source_vector(ws, f1);
  const auto b = compute_source_vector(ws, f2);

  SUBCASE("doubling f doubles s exactly") {
    const auto twice = compute_source_vector(ws, 2.0 * f1);
    CHECK(twice.s1 == 2.0 * a.s1);
    CHECK(twice.s2 == 2.0 * a.s2);
  }
  SUBCASE("linearity") {
    const auto sum = compute_source_vector(ws, f1 + f2);
    CHECK(rel(sum.s1, a.s1 + b.s1) <= 1e-12);
    CHECK(rel(sum.s2, a.s2 + b.s2) <= 1e-12);
  }
}

TEST_CASE("z-independent forcing matches the analytic particular solution") {
  // u'' + k^2 u = c, u(0) = u(d) = 0 => u'(0) = -(c/k) tan(kd/2), u'(d) = -u'(0).
  const double k = 2.1, d = 0.7, c = 1.3;
  const auto op = scalar_op(k * k);
  const double exact = -(c / k) * std::tan(k * d / 2.0);
  double prev = 0.0;
  for (int q : {8, 16, 32}) {
    const auto s = compute_source_vector(workspace(op, d, q), MatrixXc::Constant(1, q + 1, c));
    const double err = std::max(std::abs(s.s1(0) - exact), std::abs(s.s2(0) + exact));
    if (prev > 0.0) CHECK(prev / err == doctest::Approx(16.0).epsilon(0.2));
    prev = err;
  }
  CHECK(prev < 1e-6);
}

TEST_CASE("affine assembly equals the unit-column procedure") {
  std::mt19937 rng(21);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int trial = 0; trial < 8; ++trial) {
    const int n = 2 + trial % 5;
    const int q = 3 + trial % 6;
    const double D = 0.5 + u(rng);
    const PmlSpec pml = trial % 2 ? PmlSpec{0.3 * D, 2.0 * u(rng), 2} : PmlSpec{};
    IndexProfile prof{"p", {{-D, 0.1, 1.0 + u(rng)}, {0.1, D, 1.0 + 2.0 * u(rng)}}};
    const auto op = assemble_L(prof, make_grid(n, D, pml), 1.0 + 4.0 * u(rng));
    const auto ws = workspace(op, 0.2 + u(rng), q);
    const DtnBlocks fast = compute_dtn_blocks(ws);
    const DtnBlocks slow = blocks_by_unit_columns(ws);
    CAPTURE(trial);
    CHECK(rel(fast.M11, slow.M11) <= 1e-12);
    CHECK(rel(fast.M12, slow.M12) <= 1e-12);
    CHECK(rel(fast.M21, slow.M21) <= 1e-12);
    CHECK(rel(fast.M22, slow.M22) <= 1e-12);
  }
}

TEST_CASE("uniform segment map is antisymmetric under z-reversal") {
  const double D = 1.5;
  IndexProfile prof{"p", {{-D, -0.3, 1.45}, {-0.3, 0.3, 3.4}, {0.3, D, 1.0}}};
  const auto op = assemble_L(prof, make_grid(24, D, PmlSpec{0.4, 4.0, 2}), 2.0 * kPi / 1.3);
  const auto b = compute_dtn_blocks(workspace(op, 0.215, 9));
  CHECK(rel(b.M22, -b.M11) <= 1e-10);
  CHECK(rel(b.M21, -b.M12) <= 1e-10);
  CHECK(b.M11.allFinite());
}

TEST_CASE("resonant shift is reported, not regularized") {
  const int q = 5;
  const double h = 0.1;
  const double mu1 = build_scheme(q, h).mu(0);
  const auto op = scalar_op(-mu1 / (h * h));
  try {
    ModeWorkspace ws(build_scheme(q, h), op);
    FAIL("expected NumericalError");
  } catch (const NumericalError& e) {
    const std::string msg = e.what();
    CHECK(msg.find("k = 1") != std::string::npos);
  }
}

TEST_CASE("compute_dtn_map bundles blocks and source vectors") {
  const auto grid = make_grid(9, 1.0);
  const auto op = assemble_L({"p", {{-1.0, 1.0, 1.5}}}, grid, 4.0);
  const Segment seg = segment(0.4, 6);
  const auto map = compute_dtn_map(seg, op, MatrixXc::Zero(9, 7));
  CHECK(map.s1.isZero(0.0));
  CHECK(map.s2.isZero(0.0));
  CHECK(map.M11().rows() == 9);
  CHECK(map.key == structure_key(*op, seg));
}

TEST_CASE("cache builds each structure once and shares blocks") {
  const auto grid = make_grid(9, 1.0);
  const auto op = assemble_L({"p", {{-1.0, 1.0, 1.5}}}, grid, 4.0);
  const Segment seg = segment(0.4, 6);
  const std::string key = structure_key(*op, seg);
  DtnCache cache;
  auto sample = [] { return MatrixXc::Ones(9, 7); };
  const auto a = cache.lookup(key, "", seg, op, sample);
  const auto b = cache.lookup(key, "", seg, op, sample);
  const auto c = cache.lookup(key, "src", seg, op, sample);
  CHECK(a.map_built);
  CHECK_FALSE(b.map_built);
  CHECK_FALSE(c.map_built);
  CHECK(c.source_built);
  CHECK(a.map.blocks.get() == b.map.blocks.get());
  CHECK(a.map.blocks.get() == c.map.blocks.get());
  CHECK(cache.maps_built() == 1);
  CHECK(cache.map_hits() == 2);
  CHECK(b.map.s1.isZero(0.0));
  CHECK_FALSE(c.map.s1.isZero(0.0));
}

TEST_CASE("concurrent requests coalesce to one construction") {
  CoalescingCache<int> cache;
  std::atomic<int> calls{0};
  std::vector<std::thread> threads;
  std::vector<const int*> seen(8);
  for (int t = 0; t < 8; ++t)
    threads.emplace_back([&, t] {
      auto r = cache.get_or_build("k", [&] {
        ++calls;
        std::this_thread::sleep_for(std::chrono::milliseconds(20));
        return 42;
      });
      seen[static_cast<std::size_t>(t)] = r.value.get();
    });
  for (auto& th : threads) th.join();
  CHECK(calls == 1);
  CHECK(cache.builds() == 1);
  CHECK(cache.hits() == 7);
  for (const int* p : seen) CHECK(p == seen[0]);
}
