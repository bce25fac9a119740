#pragma once

#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/LU>

#include "dtnwave/model.hpp"
#include "dtnwave/types.hpp"

namespace dtnwave {

/// s(x) = 1 + i sigma(x) for |x| <= D.
Complex pml_stretch(double x, const PmlSpec& pml, double half_width);

/// Principal branch: Re >= 0, and a non-positive real argument maps to the
/// non-negative imaginary axis regardless of the sign of its zero imaginary part.
template <typename Real>
std::complex<Real> principal_sqrt(std::complex<Real> z) {
  if (z.imag() == Real(0)) z = std::complex<Real>(z.real(), Real(0));
  return std::sqrt(z);
}

/// Applies principal_sqrt to a diagonalizable matrix through an explicit
/// eigendecomposition, A = V diag(lambda) V^-1.
template <typename DerivedV, typename DerivedL>
auto sqrt_from_eigen(const Eigen::MatrixBase<DerivedV>& vectors,
                     const Eigen::MatrixBase<DerivedL>& values)
    -> Matrix<typename DerivedV::Scalar> {
  using Scalar = typename DerivedV::Scalar;
  Vector<Scalar> roots = values.unaryExpr([](Scalar v) { return principal_sqrt(v); });
  Matrix<Scalar> vinv = vectors.partialPivLu().inverse();
  return vectors * roots.asDiagonal() * vinv;
}

struct Eigendecomposition {
  VectorXc values;     // descending real part; on stretched operators, modes held mostly inside
                       // the absorbing layer come after all others
  MatrixXc vectors;    // columns with unit h_x-weighted 2-norm
  MatrixXc inverse;    // vectors^-1
  double condition = 1.0;
};

/// Discrete L = (1/s) d/dx((1/s) d/dx) + k0^2 n^2 on the interior nodes of a
/// TransverseGrid, with homogeneous Dirichlet ends. The decomposition and
/// square root are computed on first use and then immutable.
class TransverseOperator {
 public:
  TransverseOperator(MatrixXc matrix, VectorXc stretch, double hx, std::string key);
  TransverseOperator(const TransverseOperator&) = delete;
  TransverseOperator& operator=(const TransverseOperator&) = delete;

  const MatrixXc& matrix() const { return matrix_; }
  /// s(x_i) at the nodes; diag(s) * L is complex symmetric.
  const VectorXc& stretch() const { return stretch_; }
  double hx() const { return hx_; }
  const std::string& key() const { return key_; }
  Eigen::Index size() const { return matrix_.rows(); }
  /// No PML stretching: L is real symmetric.
  bool lossless() const { return lossless_; }

  /// Throws NumericalError if the eigenvector matrix has condition > 1e12.
  const Eigendecomposition& eig() const;
  const MatrixXc& sqrt() const;

 private:
  MatrixXc matrix_;
  VectorXc stretch_;
  double hx_;
  std::string key_;
  bool lossless_;

  mutable std::once_flag eig_once_;
  mutable std::once_flag sqrt_once_;
  mutable Eigendecomposition eig_;
  mutable MatrixXc sqrt_;
};

std::shared_ptr<const TransverseOperator> assemble_L(const IndexProfile& profile,
                                                     const TransverseGrid& grid, double k0);

/// Cached principal square root of the operator.
const MatrixXc& operator_sqrt(const TransverseOperator& op);

struct LeadModes {
  VectorXc lambda;
  VectorXc beta;
  MatrixXc vectors;
  MatrixXc inverse;
  std::vector<bool> propagating;
  double hx = 0.0;
  bool lossless = true;

  Eigen::Index count() const { return lambda.size(); }
  int propagating_count() const;
};

LeadModes lead_modes(const TransverseOperator& op);

struct ModalFlux {
  VectorXc coefficients;
  double flux = 0.0;
};

/// Expansion coefficients of a field in the lead's eigenbasis.
VectorXc modal_coefficients(const VectorXc& field, const LeadModes& modes);
/// Coefficients plus the power carried by the propagating modes. Throws
/// UnavailableError on a PML-stretched lead, where the modal power is not a flux.
ModalFlux modal_flux(const VectorXc& field, const LeadModes& modes);

}  // namespace dtnwave
