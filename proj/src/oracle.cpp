#include "dtnwave/oracle.hpp"

#include <map>
#include <memory>
#include <string>
#include <vector>

#include <Eigen/SparseCore>
#include <Eigen/SparseLU>

#include "dtnwave/transverse.hpp"

namespace dtnwave {

namespace {

using SparseMatrixXc = Eigen::SparseMatrix<Complex>;
using Triplet = Eigen::Triplet<Complex>;

struct SegmentGrid {
  int start = 0;  // global plane index of z_{j-1}
  int q = 0;
  double h = 0.0;
  std::shared_ptr<const TransverseOperator> op;
  MatrixXc f;  // N x (q+1)
};

class Assembler {
 public:
  Assembler(Eigen::Index n, Eigen::Index planes) : n_(n), rhs_(VectorXc::Zero(n * planes)) {}

  // rows of plane r += coeff * I * u(plane c) + lcoeff * M * u(plane c)
  void add(int r, int c, Complex coeff, Complex lcoeff = 0.0, const MatrixXc* m = nullptr) {
    for (Eigen::Index i = 0; i < n_; ++i) {
      if (coeff != Complex(0.0)) triplets_.emplace_back(r * n_ + i, c * n_ + i, coeff);
      if (m && lcoeff != Complex(0.0)) {
        for (Eigen::Index k = 0; k < n_; ++k) {
          const Complex v = (*m)(i, k);
          if (v != Complex(0.0)) triplets_.emplace_back(r * n_ + i, c * n_ + k, lcoeff * v);
        }
      }
    }
  }

  void add_rhs(int r, const VectorXc& v) { rhs_.segment(r * n_, n_) += v; }

  // d/dz at the start (left = true) or end of a segment, times sign, added to
  // rows of plane r; the source part goes to the right-hand side.
  void add_derivative(int r, const SegmentGrid& s, bool left, double sign) {
    const MatrixXc& L = s.op->matrix();
    const double h = s.h;
    if (left) {
      const int p = s.start;
      add(r, p, sign * (-1.0 / (2.0 * h)), sign * (h / 3.0), &L);
      add(r, p + 1, 0.0, sign * (2.0 * h / 3.0), &L);
      add(r, p + 2, sign * (1.0 / (2.0 * h)));
      add_rhs(r, sign * (h / 3.0) * (s.f.col(0) + 2.0 * s.f.col(1)));
    } else {
      const int p = s.start + s.q;
      add(r, p, sign * (1.0 / (2.0 * h)), sign * (-h / 3.0), &L);
      add(r, p - 1, 0.0, sign * (-2.0 * h / 3.0), &L);
      add(r, p - 2, sign * (-1.0 / (2.0 * h)));
      add_rhs(r, -sign * (h / 3.0) * (2.0 * s.f.col(s.q - 1) + s.f.col(s.q)));
    }
  }

  SparseMatrixXc matrix(Eigen::Index size) const {
    SparseMatrixXc a(size, size);
    a.setFromTriplets(triplets_.begin(), triplets_.end());
    a.makeCompressed();
    return a;
  }
  const VectorXc& rhs() const { return rhs_; }

 private:
  Eigen::Index n_;
  std::vector<Triplet> triplets_;
  VectorXc rhs_;
};

}  // namespace

SolveResult direct_solve(const WaveguideProblem& problem, const OracleOptions& options) {
  const TransverseGrid grid = build_grid(problem);
  const Eigen::Index n = grid.n;
  const auto z = problem.interfaces();

  std::map<std::string, std::shared_ptr<const TransverseOperator>> ops;
  auto op_for = [&](const std::string& id) {
    auto it = ops.find(id);
    if (it == ops.end())
      it = ops.emplace(id, assemble_L(problem.profile(id), grid, problem.k0)).first;
    return it->second;
  };

  int planes = 1;
  for (const auto& seg : problem.segments) planes += seg.q;
  const std::size_t unknowns = static_cast<std::size_t>(n) * static_cast<std::size_t>(planes);
  if (unknowns > options.max_unknowns)
    throw OracleCapExceeded("global system has " + std::to_string(unknowns) + " unknowns (N = " +
                            std::to_string(n) + " x " + std::to_string(planes) +
                            " z-planes), above the cap of " +
                            std::to_string(options.max_unknowns));

  std::vector<SegmentGrid> segs;
  int start = 0;
  for (std::size_t j = 0; j < problem.segments.size(); ++j) {
    const auto& seg = problem.segments[j];
    if (seg.q < 3) throw ConfigError("segments[" + std::to_string(j) + "].q: must be >= 3");
    segs.push_back({start, seg.q, seg.step(), op_for(seg.profile_id),
                    sample_source(problem, seg, grid, z[j])});
    start += seg.q;
  }

  const auto left_op = op_for(problem.left_profile);
  const auto right_op = op_for(problem.right_profile);
  const LeadModes left_modes = lead_modes(*left_op);
  const LeadModes right_modes = lead_modes(*right_op);

  SolveResult result;
  result.hx = grid.hx;
  result.z = z;
  result.incident = incident_field(problem, left_modes);

  Assembler as(n, planes);

  for (const auto& s : segs) {
    const MatrixXc& L = s.op->matrix();
    const double h2 = s.h * s.h;
    for (int k = 1; k < s.q; ++k) {
      const int p = s.start + k;
      as.add(p, p - 1, 1.0 / h2, 1.0 / 12.0, &L);
      as.add(p, p, -2.0 / h2, 10.0 / 12.0, &L);
      as.add(p, p + 1, 1.0 / h2, 1.0 / 12.0, &L);
      as.add_rhs(p, (s.f.col(k - 1) + 10.0 * s.f.col(k) + s.f.col(k + 1)) / 12.0);
    }
  }

  // (u_z + i sqrt(L-) u)(z_0) = 2 i sqrt(L-) u+
  const MatrixXc& left_sqrt = operator_sqrt(*left_op);
  as.add_derivative(0, segs.front(), true, 1.0);
  as.add(0, 0, 0.0, kI, &left_sqrt);
  as.add_rhs(0, 2.0 * kI * (left_sqrt * result.incident));

  for (std::size_t j = 0; j + 1 < segs.size(); ++j) {
    const int p = segs[j + 1].start;
    as.add_derivative(p, segs[j], false, 1.0);
    as.add_derivative(p, segs[j + 1], true, -1.0);
  }

  // (u_z - i sqrt(L+) u)(z_m) = 0
  const MatrixXc& right_sqrt = operator_sqrt(*right_op);
  as.add_derivative(planes - 1, segs.back(), false, 1.0);
  as.add(planes - 1, planes - 1, 0.0, -kI, &right_sqrt);

  const Eigen::Index size = static_cast<Eigen::Index>(unknowns);
  const SparseMatrixXc a = as.matrix(size);
  VectorXc x = VectorXc::Zero(size);
  if (!as.rhs().isZero(0.0)) {
    Eigen::SparseLU<SparseMatrixXc, Eigen::COLAMDOrdering<int>> lu;
    lu.compute(a);
    if (lu.info() != Eigen::Success)
      throw NumericalError("global oracle system is singular: " + lu.lastErrorMessage());
    x = lu.solve(as.rhs());
    if (lu.info() != Eigen::Success || !x.allFinite())
      throw NumericalError("global oracle solve failed");
    result.diagnostics.system_residual = (a * x - as.rhs()).norm() / as.rhs().norm();
  }
  result.diagnostics.unknowns = unknowns;

  result.u_at_interfaces.push_back(x.segment(0, n));
  for (const auto& s : segs) result.u_at_interfaces.push_back(x.segment((s.start + s.q) * n, n));
  fill_lead_quantities(result, left_modes, right_modes, problem.incident);
  return result;
}

}  // namespace dtnwave
