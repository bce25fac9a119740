#include "dtnwave/transverse.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#include <Eigen/Eigenvalues>

namespace dtnwave {

namespace {

constexpr double kMaxEigenCondition = 1e12;
constexpr double kPropagatingTol = 1e-8;

// Rotates each column so its largest entry is real and positive.
void fix_phases(MatrixXc& v) {
  for (Eigen::Index j = 0; j < v.cols(); ++j) {
    Eigen::Index imax = 0;
    v.col(j).cwiseAbs().maxCoeff(&imax);
    const Complex pivot = v(imax, j);
    if (std::abs(pivot) > 0.0) v.col(j) *= std::conj(pivot) / std::abs(pivot);
  }
}

}  // namespace

Complex pml_stretch(double x, const PmlSpec& pml, double half_width) {
  if (pml.thickness <= 0.0) return {1.0, 0.0};
  const double depth = std::abs(x) - (half_width - pml.thickness);
  if (depth <= 0.0) return {1.0, 0.0};
  const double ramp = std::min(depth, pml.thickness) / pml.thickness;
  return {1.0, pml.sigma_max * std::pow(ramp, pml.order)};
}

TransverseOperator::TransverseOperator(MatrixXc matrix, VectorXc stretch, double hx,
                                       std::string key)
    : matrix_(std::move(matrix)),
      stretch_(std::move(stretch)),
      hx_(hx),
      key_(std::move(key)),
      lossless_(matrix_.imag().isZero(0.0)) {}

const Eigendecomposition& TransverseOperator::eig() const {
  std::call_once(eig_once_, [this] {
    const Eigen::Index n = size();
    Eigendecomposition d;
    if (lossless_) {
      Eigen::SelfAdjointEigenSolver<MatrixXd> es(matrix_.real());
      if (es.info() != Eigen::Success)
        throw NumericalError("symmetric eigendecomposition of L failed");
      // Ascending from the solver; reverse for descending order.
      d.values = es.eigenvalues().reverse().cast<Complex>();
      d.vectors = es.eigenvectors().rowwise().reverse().cast<Complex>() / std::sqrt(hx_);
      fix_phases(d.vectors);
      d.inverse = hx_ * d.vectors.transpose();
      d.condition = 1.0;
    } else {
      Eigen::ComplexEigenSolver<MatrixXc> es(matrix_);
      if (es.info() != Eigen::Success)
        throw NumericalError("complex eigendecomposition of L failed");
      std::vector<Eigen::Index> order(static_cast<std::size_t>(n));
      std::iota(order.begin(), order.end(), 0);
      const VectorXc& ev = es.eigenvalues();
      // Modes living mostly inside the absorbing layer go last, so index 0
      // stays the fundamental guided mode.
      const Eigen::ArrayXd in_layer = (stretch_.imag().array() > 0.0).cast<double>();
      std::vector<bool> layer_mode(static_cast<std::size_t>(n));
      for (Eigen::Index j = 0; j < n; ++j) {
        const Eigen::ArrayXd w = es.eigenvectors().col(j).cwiseAbs2().array();
        layer_mode[static_cast<std::size_t>(j)] = (w * in_layer).sum() > 0.5 * w.sum();
      }
      std::stable_sort(order.begin(), order.end(), [&](Eigen::Index a, Eigen::Index b) {
        const bool la = layer_mode[static_cast<std::size_t>(a)];
        const bool lb = layer_mode[static_cast<std::size_t>(b)];
        if (la != lb) return lb;
        return ev(a).real() > ev(b).real();
      });
      d.values.resize(n);
      d.vectors.resize(n, n);
      for (Eigen::Index j = 0; j < n; ++j) {
        const auto src = order[static_cast<std::size_t>(j)];
        d.values(j) = ev(src);
        d.vectors.col(j) = es.eigenvectors().col(src).normalized() / std::sqrt(hx_);
      }
      fix_phases(d.vectors);
      Eigen::PartialPivLU<MatrixXc> lu(d.vectors);
      d.condition = 1.0 / lu.rcond();
      if (!(d.condition <= kMaxEigenCondition)) {
        std::ostringstream msg;
        msg << "eigenvector matrix of L (" << key_ << ") is ill-conditioned: cond ~ "
            << d.condition << " > " << kMaxEigenCondition
            << " (operator close to defective)";
        throw NumericalError(msg.str());
      }
      d.inverse = lu.inverse();
    }
    eig_ = std::move(d);
  });
  return eig_;
}

const MatrixXc& TransverseOperator::sqrt() const {
  std::call_once(sqrt_once_, [this] {
    const auto& d = eig();
    VectorXc roots = d.values.unaryExpr([](Complex v) { return principal_sqrt(v); });
    sqrt_ = d.vectors * roots.asDiagonal() * d.inverse;
  });
  return sqrt_;
}

std::shared_ptr<const TransverseOperator> assemble_L(const IndexProfile& profile,
                                                     const TransverseGrid& grid, double k0) {
  const int n = grid.n;
  const double hx = grid.hx;
  auto s_at = [&](double x) { return pml_stretch(x, grid.pml, grid.half_width); };

  MatrixXc L = MatrixXc::Zero(n, n);
  VectorXc s_nodes(n);
  for (int i = 0; i < n; ++i) {
    const double x = grid.x(i);
    const Complex s = s_at(x);
    const Complex inv_left = 1.0 / s_at(x - 0.5 * hx);
    const Complex inv_right = 1.0 / s_at(x + 0.5 * hx);
    const Complex scale = 1.0 / (s * hx * hx);
    const double nx = profile.index_at(x);
    s_nodes(i) = s;
    L(i, i) = -scale * (inv_left + inv_right) + k0 * k0 * nx * nx;
    if (i > 0) L(i, i - 1) = scale * inv_left;
    if (i + 1 < n) L(i, i + 1) = scale * inv_right;
  }
  std::ostringstream key;
  key.precision(17);
  key << profile.id << "[";
  for (const auto& iv : profile.intervals) key << iv.x_lo << ":" << iv.x_hi << ":" << iv.n << ";";
  key << "]|k0=" << k0 << "|N=" << n << "|D=" << grid.half_width
      << "|pml=" << grid.pml.thickness << "," << grid.pml.sigma_max << "," << grid.pml.order;
  return std::make_shared<const TransverseOperator>(std::move(L), std::move(s_nodes), hx,
                                                    key.str());
}

const MatrixXc& operator_sqrt(const TransverseOperator& op) { return op.sqrt(); }

int LeadModes::propagating_count() const {
  return static_cast<int>(std::count(propagating.begin(), propagating.end(), true));
}

LeadModes lead_modes(const TransverseOperator& op) {
  const auto& d = op.eig();
  LeadModes m;
  m.lambda = d.values;
  m.beta = d.values.unaryExpr([](Complex v) { return principal_sqrt(v); });
  m.vectors = d.vectors;
  m.inverse = d.inverse;
  m.hx = op.hx();
  m.lossless = op.lossless();
  m.propagating.resize(static_cast<std::size_t>(m.lambda.size()));
  for (Eigen::Index j = 0; j < m.beta.size(); ++j) {
    const Complex b = m.beta(j);
    m.propagating[static_cast<std::size_t>(j)] =
        b.real() > 0.0 && std::abs(b.imag()) < kPropagatingTol * std::abs(b);
  }
  return m;
}

VectorXc modal_coefficients(const VectorXc& field, const LeadModes& modes) {
  return modes.inverse * field;
}

ModalFlux modal_flux(const VectorXc& field, const LeadModes& modes) {
  if (!modes.lossless)
    throw UnavailableError(
        "modal flux is undefined on a PML-stretched lead: modes are not power-orthogonal "
        "and the stretched region absorbs energy; use modal coefficients instead");
  ModalFlux out;
  out.coefficients = modal_coefficients(field, modes);
  for (Eigen::Index j = 0; j < out.coefficients.size(); ++j)
    if (modes.propagating[static_cast<std::size_t>(j)])
      out.flux += modes.beta(j).real() * std::norm(out.coefficients(j));
  return out;
}

}  // namespace dtnwave
