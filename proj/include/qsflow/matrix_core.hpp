#pragma once

#include <complex>
#include <cstddef>

#include <Eigen/Dense>

namespace qsf {

using Complex = std::complex<double>;
using ComplexMatrix = Eigen::MatrixXcd;
using ComplexVector = Eigen::VectorXcd;

inline constexpr Complex kI{0.0, 1.0};

/// Linear map on d x d matrices, stored as the d^2 x d^2 matrix acting on
/// column-stacked vectorizations: vec(M(X)) = matrix * vec(X).
struct SuperOperator {
  Eigen::Index dim = 0;
  ComplexMatrix matrix;

  SuperOperator() = default;
  SuperOperator(Eigen::Index d, ComplexMatrix m);

  static SuperOperator identity(Eigen::Index d);
  static SuperOperator zero(Eigen::Index d);

  ComplexMatrix apply(const ComplexMatrix& x) const;

  /// Composition (*this) o other, i.e. other acts first.
  SuperOperator compose(const SuperOperator& other) const;
};

SuperOperator operator+(const SuperOperator& a, const SuperOperator& b);
SuperOperator operator-(const SuperOperator& a, const SuperOperator& b);
SuperOperator operator*(Complex s, const SuperOperator& a);

ComplexMatrix adjoint(const ComplexMatrix& a);

/// Smallest eigenvalue of (A + A^*)/2. Throws NotHermitian when A is not
/// Hermitian within herm_tol * max(1, |A|_F).
double min_eig_hermitian(const ComplexMatrix& a, double herm_tol = 1e-10);

/// Eigenvalues (ascending) of the Hermitian part.
Eigen::VectorXd eig_hermitian(const ComplexMatrix& a, double herm_tol = 1e-10);

ComplexMatrix expm(const ComplexMatrix& a);

ComplexMatrix vec(const ComplexMatrix& a);
ComplexMatrix unvec(const ComplexMatrix& v, Eigen::Index d);

SuperOperator superop_left(const ComplexMatrix& a, Eigen::Index d);
SuperOperator superop_right(const ComplexMatrix& a, Eigen::Index d);
/// X -> left^* X right
SuperOperator superop_sandwich(const ComplexMatrix& left, const ComplexMatrix& right);

/// Dual under the trace pairing: tr[M(B) rho] = tr[B M'(rho)].
SuperOperator trace_dual(const SuperOperator& map);

ComplexMatrix kron(const ComplexMatrix& a, const ComplexMatrix& b);

/// Trace distance 1/2 |A - B|_1 for Hermitian arguments.
double trace_distance(const ComplexMatrix& a, const ComplexMatrix& b);

bool all_finite(const ComplexMatrix& a);

void require_square(const ComplexMatrix& a, const char* what);

}  // namespace qsf
