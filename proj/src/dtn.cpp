#include "dtnwave/dtn.hpp"

#include <algorithm>
#include <sstream>
#include <stdexcept>

namespace dtnwave {

namespace {

constexpr double kMaxShiftCondition = 1e12;

void require_finite(const MatrixXc& m, const char* what) {
  if (!m.allFinite()) throw NumericalError(std::string("non-finite entries in ") + what);
}

}  // namespace

ModeWorkspace::ModeWorkspace(CompactScheme<double> scheme,
                             std::shared_ptr<const TransverseOperator> op)
    : scheme_(std::move(scheme)), op_(std::move(op)) {
  const Eigen::Index n = op_->size();
  const double h2 = scheme_.h * scheme_.h;
  factors_.reserve(static_cast<std::size_t>(modes()));
  for (int k = 0; k < modes(); ++k) {
    const double shift = scheme_.mu(k) / h2;
    MatrixXc shifted = op_->matrix();
    shifted.diagonal().array() += shift;
    Eigen::PartialPivLU<MatrixXc> lu(shifted);
    const double cond = 1.0 / lu.rcond();
    if (!(cond <= kMaxShiftCondition)) {
      std::ostringstream msg;
      msg << "shifted transverse matrix L + mu_k/h^2 I is singular to working precision "
          << "(mode k = " << k + 1 << " of " << modes() << ", shift = " << shift
          << ", cond ~ " << cond << ", N = " << n
          << "): transverse resonance with this z-grid; change q or the segment length";
      throw NumericalError(msg.str());
    }
    conditions_.push_back(cond);
    factors_.push_back(std::move(lu));
  }
}

double ModeWorkspace::max_condition() const {
  return conditions_.empty() ? 1.0 : *std::max_element(conditions_.begin(), conditions_.end());
}

MatrixXc solve_segment_modes(const ModeWorkspace& ws, const VectorXc& u_left,
                             const VectorXc& u_right, const MatrixXc& f_samples) {
  const auto& s = ws.scheme();
  const MatrixXc& L = ws.L();
  const int q = s.q;
  const double h2 = s.h * s.h;

  // Boundary contributions of the reduced system, before diagonalization.
  const VectorXc p_left = -u_left / h2 - (L * u_left) / 12.0 + f_samples.col(0) / 12.0;
  const VectorXc p_right = -u_right / h2 - (L * u_right) / 12.0 + f_samples.col(q) / 12.0;

  const MatrixXd r_inv = s.r_inverse();
  const MatrixXc zeta = f_samples.middleCols(1, q - 1) * r_inv.cast<Complex>();
  const MatrixXc rhs = p_left * s.alpha.transpose().cast<Complex>() +
                       p_right * s.beta.transpose().cast<Complex>() + zeta;

  MatrixXc modes(L.rows(), q - 1);
  for (int k = 0; k < q - 1; ++k) modes.col(k) = ws.factor(k).solve(rhs.col(k));
  MatrixXc interior = modes * s.R.cast<Complex>();
  require_finite(interior, "segment solution");
  return interior;
}

EndpointDerivatives endpoint_derivatives(const CompactScheme<double>& s, const MatrixXc& L,
                                         const MatrixXc& interior, const VectorXc& u_left,
                                         const VectorXc& u_right, const MatrixXc& f_samples) {
  if (s.q < 3) throw std::invalid_argument("endpoint derivatives need q >= 3");
  const int q = s.q;
  const double h = s.h;
  // interior.col(k - 1) holds u(xi_k).
  const VectorXc upp_left = -L * u_left + f_samples.col(0);
  const VectorXc upp_1 = -L * interior.col(0) + f_samples.col(1);
  const VectorXc upp_qm1 = -L * interior.col(q - 2) + f_samples.col(q - 1);
  const VectorXc upp_right = -L * u_right + f_samples.col(q);

  EndpointDerivatives d;
  d.left = (interior.col(1) - u_left) / (2.0 * h) - (h / 3.0) * (upp_left + 2.0 * upp_1);
  d.right = (u_right - interior.col(q - 3)) / (2.0 * h) + (h / 3.0) * (2.0 * upp_qm1 + upp_right);
  return d;
}

SourceVectors compute_source_vector(const ModeWorkspace& ws, const MatrixXc& f_samples) {
  const Eigen::Index n = ws.L().rows();
  const VectorXc zero = VectorXc::Zero(n);
  SourceVectors out;
  if (f_samples.isZero(0.0)) {
    out.s1 = zero;
    out.s2 = zero;
    return out;
  }
  const MatrixXc interior = solve_segment_modes(ws, zero, zero, f_samples);
  auto d = endpoint_derivatives(ws.scheme(), ws.L(), interior, zero, zero, f_samples);
  out.s1 = std::move(d.left);
  out.s2 = std::move(d.right);
  return out;
}

DtnBlocks compute_dtn_blocks(const ModeWorkspace& ws) {
  const auto& s = ws.scheme();
  if (s.q < 3) throw std::invalid_argument("DtN map assembly needs q >= 3");
  const MatrixXc& L = ws.L();
  const Eigen::Index n = L.rows();
  const int q = s.q;
  const double h = s.h;
  const MatrixXc identity = MatrixXc::Identity(n, n);

  // Unit boundary data e enters mode k as (alpha_k or beta_k) * P e.
  const MatrixXc P = -identity / (h * h) - L / 12.0;

  // Maps from left/right boundary data to u at xi_1, xi_2, xi_{q-2}, xi_{q-1}.
  const int planes[4] = {0, 1, q - 3, q - 2};
  MatrixXc to_left[4], to_right[4];
  for (int p = 0; p < 4; ++p) {
    to_left[p] = MatrixXc::Zero(n, n);
    to_right[p] = MatrixXc::Zero(n, n);
  }
  for (int k = 0; k < q - 1; ++k) {
    const MatrixXc mode_response = ws.factor(k).solve(P);
    for (int p = 0; p < 4; ++p) {
      const double r = s.R(k, planes[p]);
      to_left[p] += (r * s.alpha(k)) * mode_response;
      to_right[p] += (r * s.beta(k)) * mode_response;
    }
  }

  DtnBlocks b;
  b.M11 = (to_left[1] - identity) / (2.0 * h) + (h / 3.0) * L + (2.0 * h / 3.0) * (L * to_left[0]);
  b.M12 = to_right[1] / (2.0 * h) + (2.0 * h / 3.0) * (L * to_right[0]);
  b.M21 = -to_left[2] / (2.0 * h) - (2.0 * h / 3.0) * (L * to_left[3]);
  b.M22 = (identity - to_right[2]) / (2.0 * h) - (h / 3.0) * L -
          (2.0 * h / 3.0) * (L * to_right[3]);
  require_finite(b.M11, "DtN block M11");
  require_finite(b.M12, "DtN block M12");
  require_finite(b.M21, "DtN block M21");
  require_finite(b.M22, "DtN block M22");
  return b;
}

DtnMap compute_dtn_map(const Segment& segment, std::shared_ptr<const TransverseOperator> op,
                       const MatrixXc& f_samples) {
  const std::string key = structure_key(*op, segment);
  ModeWorkspace ws(build_scheme(segment.q, segment.step()), std::move(op));
  DtnMap map;
  map.blocks = std::make_shared<const DtnBlocks>(compute_dtn_blocks(ws));
  auto src = compute_source_vector(ws, f_samples);
  map.s1 = std::move(src.s1);
  map.s2 = std::move(src.s2);
  map.key = key;
  return map;
}

std::string structure_key(const TransverseOperator& op, const Segment& segment) {
  std::ostringstream key;
  key.precision(17);
  key << op.key() << "|len=" << segment.length << "|q=" << segment.q;
  return key.str();
}

DtnCache::Result DtnCache::lookup(const std::string& skey, const std::string& source_key,
                                  const Segment& segment,
                                  const std::shared_ptr<const TransverseOperator>& op,
                                  const std::function<MatrixXc()>& sample) {
  auto structure = structures_.get_or_build(skey, [&] {
    SegmentStructure st;
    st.workspace = std::make_shared<const ModeWorkspace>(
        build_scheme(segment.q, segment.step()), op);
    st.blocks = std::make_shared<const DtnBlocks>(compute_dtn_blocks(*st.workspace));
    return st;
  });

  Result r;
  r.map_built = structure.built;
  r.max_condition = structure.value->workspace->max_condition();
  r.map.blocks = structure.value->blocks;
  r.map.key = skey;
  const Eigen::Index n = op->size();
  if (source_key.empty()) {
    r.map.s1 = VectorXc::Zero(n);
    r.map.s2 = VectorXc::Zero(n);
    return r;
  }
  const auto& ws = *structure.value->workspace;
  auto src = sources_.get_or_build(skey + "|src=" + source_key,
                                   [&] { return compute_source_vector(ws, sample()); });
  r.source_built = src.built;
  r.map.s1 = src.value->s1;
  r.map.s2 = src.value->s2;
  r.map.key = skey + "|src=" + source_key;
  return r;
}

}  // namespace dtnwave
