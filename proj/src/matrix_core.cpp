#include "qsflow/matrix_core.hpp"

#include <string>
#include <unsupported/Eigen/KroneckerProduct>
#include <unsupported/Eigen/MatrixFunctions>

#include "qsflow/error.hpp"

namespace qsf {

const char* to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::kInvalidArgument: return "InvalidArgument";
    case ErrorCode::kDimensionMismatch: return "DimensionMismatch";
    case ErrorCode::kMultiplicityMismatch: return "MultiplicityMismatch";
    case ErrorCode::kNotHermitian: return "NotHermitian";
    case ErrorCode::kNotPSD: return "NotPSD";
    case ErrorCode::kBasisNotSpanning: return "BasisNotSpanning";
    case ErrorCode::kStepTooLarge: return "StepTooLarge";
    case ErrorCode::kInsufficientData: return "InsufficientData";
    case ErrorCode::kConfig: return "ConfigError";
  }
  return "Unknown";
}

SuperOperator::SuperOperator(Eigen::Index d, ComplexMatrix m)
    : dim(d), matrix(std::move(m)) {
  if (matrix.rows() != d * d || matrix.cols() != d * d) {
    fail(ErrorCode::kDimensionMismatch,
         "superoperator matrix must have side d^2 = " + std::to_string(d * d));
  }
}

SuperOperator SuperOperator::identity(Eigen::Index d) {
  return {d, ComplexMatrix::Identity(d * d, d * d)};
}

SuperOperator SuperOperator::zero(Eigen::Index d) {
  return {d, ComplexMatrix::Zero(d * d, d * d)};
}

ComplexMatrix SuperOperator::apply(const ComplexMatrix& x) const {
  if (x.rows() != dim || x.cols() != dim) {
    fail(ErrorCode::kDimensionMismatch, "superoperator applied to wrong shape");
  }
  return unvec(matrix * vec(x), dim);
}

SuperOperator SuperOperator::compose(const SuperOperator& other) const {
  if (other.dim != dim) {
    fail(ErrorCode::kDimensionMismatch, "superoperator composition dims differ");
  }
  return {dim, matrix * other.matrix};
}

SuperOperator operator+(const SuperOperator& a, const SuperOperator& b) {
  if (a.dim != b.dim) fail(ErrorCode::kDimensionMismatch, "superoperator sum dims differ");
  return {a.dim, a.matrix + b.matrix};
}

SuperOperator operator-(const SuperOperator& a, const SuperOperator& b) {
  if (a.dim != b.dim) fail(ErrorCode::kDimensionMismatch, "superoperator difference dims differ");
  return {a.dim, a.matrix - b.matrix};
}

SuperOperator operator*(Complex s, const SuperOperator& a) {
  return {a.dim, s * a.matrix};
}

ComplexMatrix adjoint(const ComplexMatrix& a) { return a.adjoint(); }

namespace {

ComplexMatrix checked_hermitian_part(const ComplexMatrix& a, double herm_tol) {
  require_square(a, "min_eig_hermitian");
  const double asym = (a - a.adjoint()).norm();
  if (asym > herm_tol * std::max(1.0, a.norm())) {
    fail(ErrorCode::kNotHermitian,
         "matrix is not Hermitian (|A - A^*|_F = " + std::to_string(asym) + ")");
  }
  return 0.5 * (a + a.adjoint());
}

}  // namespace

Eigen::VectorXd eig_hermitian(const ComplexMatrix& a, double herm_tol) {
  const ComplexMatrix h = checked_hermitian_part(a, herm_tol);
  if (h.size() == 0) return {};
  Eigen::SelfAdjointEigenSolver<ComplexMatrix> solver(h, Eigen::EigenvaluesOnly);
  return solver.eigenvalues();
}

double min_eig_hermitian(const ComplexMatrix& a, double herm_tol) {
  const Eigen::VectorXd ev = eig_hermitian(a, herm_tol);
  if (ev.size() == 0) return 0.0;
  return ev.minCoeff();
}

ComplexMatrix expm(const ComplexMatrix& a) {
  require_square(a, "expm");
  if (a.size() == 0) return a;
  return a.exp();
}

ComplexMatrix vec(const ComplexMatrix& a) {
  // Eigen storage is column-major, so a reshaped copy is column stacking.
  return a.reshaped(a.size(), 1);
}

ComplexMatrix unvec(const ComplexMatrix& v, Eigen::Index d) {
  if (v.cols() != 1 || v.rows() != d * d) {
    fail(ErrorCode::kDimensionMismatch, "unvec expects a d^2 x 1 column");
  }
  return v.reshaped(d, d);
}

ComplexMatrix kron(const ComplexMatrix& a, const ComplexMatrix& b) {
  return Eigen::kroneckerProduct(a, b).eval();
}

SuperOperator superop_left(const ComplexMatrix& a, Eigen::Index d) {
  if (a.rows() != d || a.cols() != d) {
    fail(ErrorCode::kDimensionMismatch, "superop_left expects a d x d operand");
  }
  return {d, kron(ComplexMatrix::Identity(d, d), a)};
}

SuperOperator superop_right(const ComplexMatrix& a, Eigen::Index d) {
  if (a.rows() != d || a.cols() != d) {
    fail(ErrorCode::kDimensionMismatch, "superop_right expects a d x d operand");
  }
  return {d, kron(a.transpose(), ComplexMatrix::Identity(d, d))};
}

SuperOperator superop_sandwich(const ComplexMatrix& left, const ComplexMatrix& right) {
  require_square(left, "superop_sandwich");
  require_square(right, "superop_sandwich");
  if (left.rows() != right.rows()) {
    fail(ErrorCode::kDimensionMismatch, "superop_sandwich operands differ in size");
  }
  // vec(L^* X R) = (R^T kron L^*) vec(X)
  return {left.rows(), kron(right.transpose(), left.adjoint())};
}

SuperOperator trace_dual(const SuperOperator& map) {
  const Eigen::Index d = map.dim;
  // With P the transpose permutation on vec, M' = P M^T P.
  auto perm = [d](Eigen::Index k) { return (k % d) * d + k / d; };
  ComplexMatrix out(d * d, d * d);
  for (Eigen::Index a = 0; a < d * d; ++a) {
    for (Eigen::Index b = 0; b < d * d; ++b) out(a, b) = map.matrix(perm(b), perm(a));
  }
  return {d, out};
}

double trace_distance(const ComplexMatrix& a, const ComplexMatrix& b) {
  const Eigen::VectorXd ev = eig_hermitian(a - b, 1e-8);
  return 0.5 * ev.cwiseAbs().sum();
}

bool all_finite(const ComplexMatrix& a) {
  for (Eigen::Index i = 0; i < a.size(); ++i) {
    const Complex z = a.data()[i];
    if (!std::isfinite(z.real()) || !std::isfinite(z.imag())) return false;
  }
  return true;
}

void require_square(const ComplexMatrix& a, const char* what) {
  if (a.rows() != a.cols()) {
    fail(ErrorCode::kDimensionMismatch, std::string(what) + ": matrix is not square");
  }
}

}  // namespace qsf
