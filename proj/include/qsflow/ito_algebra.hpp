#pragma once

#include <vector>

#include "qsflow/matrix_core.hpp"

namespace qsf {

/// Element of the Hudson-Parthasarathy quadruple algebra at noise
/// multiplicity m. Block indices follow (mu = -, .) x (nu = +, .):
///   exchange     a^._.  (m x m)
///   creation     a^._+  (m x 1)
///   annihilation a^-_.  (1 x m)
///   time         a^-_+  (scalar)
class ItoQuadruple {
 public:
  ItoQuadruple() : ItoQuadruple(0) {}
  explicit ItoQuadruple(Eigen::Index m);
  ItoQuadruple(ComplexMatrix exchange, ComplexMatrix creation,
               ComplexMatrix annihilation, Complex time);

  Eigen::Index multiplicity() const { return exchange_.rows(); }
  const ComplexMatrix& exchange() const { return exchange_; }
  const ComplexMatrix& creation() const { return creation_; }
  const ComplexMatrix& annihilation() const { return annihilation_; }
  Complex time() const { return time_; }

  bool is_zero() const;

  /// Largest blockwise absolute difference.
  double distance(const ItoQuadruple& other) const;

  /// Embeds into multiplicity m >= multiplicity(), padding with zeros.
  ItoQuadruple padded(Eigen::Index m) const;

  friend ItoQuadruple operator+(const ItoQuadruple& a, const ItoQuadruple& b);
  friend ItoQuadruple operator-(const ItoQuadruple& a, const ItoQuadruple& b);
  friend ItoQuadruple operator*(Complex s, const ItoQuadruple& a);

 private:
  ComplexMatrix exchange_;
  ComplexMatrix creation_;
  ComplexMatrix annihilation_;
  Complex time_{0.0, 0.0};
};

/// Blockwise equality within 1e-13.
bool approx_equal(const ItoQuadruple& a, const ItoQuadruple& b, double tol = 1e-13);

ItoQuadruple hp_product(const ItoQuadruple& a, const ItoQuadruple& b);
ItoQuadruple star(const ItoQuadruple& a);
/// b + star(a) b + star(a)
ItoQuadruple star_product(const ItoQuadruple& a, const ItoQuadruple& b);
ItoQuadruple hp_commutator(const ItoQuadruple& a, const ItoQuadruple& b);

// Canonical one-dimensional elements (m = 1).
ItoQuadruple newton(Complex alpha);
ItoQuadruple wiener(Complex alpha, Complex xi);

/// Poisson element with the time entry set to the drift alpha. With
/// `literal_time_zeta` the time entry is zeta instead (the alternative
/// listing of the embedding); p*p = p + newton(1) then no longer holds.
ItoQuadruple poisson(Complex alpha, Complex zeta, bool literal_time_zeta = false);

/// Triangular (m+2) x (m+2) matrix in block order (-, ., +) with zero first
/// column and zero last row.
class ExtendedMatrix {
 public:
  ExtendedMatrix(Eigen::Index m, ComplexMatrix matrix);

  Eigen::Index multiplicity() const { return m_; }
  const ComplexMatrix& matrix() const { return matrix_; }

  ExtendedMatrix operator*(const ExtendedMatrix& other) const;

 private:
  Eigen::Index m_;
  ComplexMatrix matrix_;
};

ExtendedMatrix extend(const ItoQuadruple& a);
ItoQuadruple restrict_to_quadruple(const ExtendedMatrix& e);
/// g M^* g with the Minkowski metric g = [delta^mu_{-nu}].
ExtendedMatrix pseudo_adjoint(const ExtendedMatrix& e);
ComplexMatrix minkowski_metric(Eigen::Index m);

/// Quadruple-valued step function on [0, T), zero from T on.
class StepFunction {
 public:
  StepFunction() = default;
  /// breakpoints t_0 = 0 < ... < t_K = T, values[k] on [t_k, t_{k+1}).
  /// K = 0 (breakpoints = {0}) is the zero function.
  StepFunction(Eigen::Index m, std::vector<double> breakpoints,
               std::vector<ItoQuadruple> values);

  static StepFunction zero(Eigen::Index m);
  static StepFunction constant(double horizon, const ItoQuadruple& value);

  Eigen::Index multiplicity() const { return m_; }
  double horizon() const { return breakpoints_.empty() ? 0.0 : breakpoints_.back(); }
  const std::vector<double>& breakpoints() const { return breakpoints_; }
  const std::vector<ItoQuadruple>& values() const { return values_; }

  ItoQuadruple at(double s) const;

 private:
  Eigen::Index m_ = 0;
  std::vector<double> breakpoints_;
  std::vector<ItoQuadruple> values_;

  friend StepFunction step_star(const StepFunction& g, const StepFunction& h);
};

StepFunction step_star(const StepFunction& g, const StepFunction& h);

/// Sorted union of two breakpoint grids, both starting at 0.
std::vector<double> merge_grids(const std::vector<double>& a, const std::vector<double>& b);

}  // namespace qsf
