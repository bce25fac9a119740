#pragma once

#include <cmath>
#include <stdexcept>

#include <Eigen/Cholesky>

#include "dtnwave/types.hpp"

namespace dtnwave {

/// Fourth-order three-point (Numerov-type) discretization of d^2/dz^2 on a
/// uniform segment grid xi_k = xi_0 + k h, k = 0..q:
///
///   A u'' = (1/h^2) (a0 u_0 + B u + aq u_q) - (1/12) (a0 u''_0 + aq u''_q)
///
/// for the interior values u = [u_1 .. u_{q-1}]. D = A^-1 B is diagonalized by
/// the sine matrix R, D R = R diag(mu), with R^-1 = (2/q) R.
template <typename Real>
struct CompactScheme {
  using Mat = Matrix<Real>;
  using Vec = Vector<Real>;

  int q = 0;
  Real h = 0;
  Mat A;        // (1/12) tridiag(1, 10, 1)
  Mat B;        // tridiag(1, -2, 1)
  Mat D;        // A^-1 B
  Vec a0_hat;   // A^-1 e_1
  Vec aq_hat;   // A^-1 e_{q-1}
  Vec mu;       // 12 (cos(k pi/q) - 1) / (5 + cos(k pi/q)), k = 1..q-1
  Mat R;        // sin(j k pi / q)
  Vec alpha;    // R^-1 a0_hat: weight of the left boundary data on mode k
  Vec beta;     // R^-1 aq_hat

  int interior() const { return q - 1; }
  /// R^-1 applied as a dense multiply.
  Mat r_inverse() const { return (Real(2) / Real(q)) * R; }
};

template <typename Real>
Real compact_eigenvalue(int k, int q) {
  const Real c = std::cos(Real(k) * Real(kPi) / Real(q));
  return Real(12) * (c - Real(1)) / (Real(5) + c);
}

template <typename Real>
CompactScheme<Real> build_scheme(int q, Real h) {
  if (q < 2) throw std::invalid_argument("compact scheme needs q >= 2");
  if (!(h > Real(0))) throw std::invalid_argument("compact scheme needs h > 0");
  using Mat = typename CompactScheme<Real>::Mat;
  using Vec = typename CompactScheme<Real>::Vec;

  CompactScheme<Real> s;
  s.q = q;
  s.h = h;
  const int n = q - 1;
  s.A = Mat::Zero(n, n);
  s.B = Mat::Zero(n, n);
  for (int i = 0; i < n; ++i) {
    s.A(i, i) = Real(10) / Real(12);
    s.B(i, i) = Real(-2);
    if (i + 1 < n) {
      s.A(i, i + 1) = s.A(i + 1, i) = Real(1) / Real(12);
      s.B(i, i + 1) = s.B(i + 1, i) = Real(1);
    }
  }
  const Eigen::LDLT<Mat> a_fact(s.A);
  s.D = a_fact.solve(s.B);
  s.a0_hat = a_fact.solve(Vec::Unit(n, 0));
  s.aq_hat = a_fact.solve(Vec::Unit(n, n - 1));

  s.mu.resize(n);
  s.R.resize(n, n);
  for (int k = 1; k <= n; ++k) {
    s.mu(k - 1) = compact_eigenvalue<Real>(k, q);
    for (int j = 1; j <= n; ++j)
      s.R(j - 1, k - 1) = std::sin(Real(j) * Real(k) * Real(kPi) / Real(q));
  }
  const Mat r_inv = s.r_inverse();
  s.alpha = r_inv * s.a0_hat;
  s.beta = r_inv * s.aq_hat;
  return s;
}

}  // namespace dtnwave
