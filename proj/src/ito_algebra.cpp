#include "qsflow/ito_algebra.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "qsflow/error.hpp"

namespace qsf {

namespace {

void require_same_multiplicity(const ItoQuadruple& a, const ItoQuadruple& b) {
  if (a.multiplicity() != b.multiplicity()) {
    fail(ErrorCode::kMultiplicityMismatch,
         "quadruple multiplicities differ: " + std::to_string(a.multiplicity()) +
             " vs " + std::to_string(b.multiplicity()));
  }
}

double block_distance(const ComplexMatrix& a, const ComplexMatrix& b) {
  if (a.size() == 0) return 0.0;
  return (a - b).cwiseAbs().maxCoeff();
}

}  // namespace

ItoQuadruple::ItoQuadruple(Eigen::Index m)
    : exchange_(ComplexMatrix::Zero(m, m)),
      creation_(ComplexMatrix::Zero(m, 1)),
      annihilation_(ComplexMatrix::Zero(1, m)) {}

ItoQuadruple::ItoQuadruple(ComplexMatrix exchange, ComplexMatrix creation,
                           ComplexMatrix annihilation, Complex time)
    : exchange_(std::move(exchange)),
      creation_(std::move(creation)),
      annihilation_(std::move(annihilation)),
      time_(time) {
  const Eigen::Index m = exchange_.rows();
  if (exchange_.cols() != m || creation_.rows() != m || creation_.cols() != 1 ||
      annihilation_.rows() != 1 || annihilation_.cols() != m) {
    fail(ErrorCode::kDimensionMismatch,
         "quadruple blocks must be m x m, m x 1, 1 x m for one m");
  }
}

bool ItoQuadruple::is_zero() const {
  return exchange_.isZero(0.0) && creation_.isZero(0.0) && annihilation_.isZero(0.0) &&
         time_ == Complex{};
}

double ItoQuadruple::distance(const ItoQuadruple& other) const {
  require_same_multiplicity(*this, other);
  return std::max({block_distance(exchange_, other.exchange_),
                   block_distance(creation_, other.creation_),
                   block_distance(annihilation_, other.annihilation_),
                   std::abs(time_ - other.time_)});
}

ItoQuadruple ItoQuadruple::padded(Eigen::Index m) const {
  const Eigen::Index k = multiplicity();
  if (m < k) fail(ErrorCode::kMultiplicityMismatch, "cannot pad to a smaller multiplicity");
  ItoQuadruple out(m);
  out.exchange_.topLeftCorner(k, k) = exchange_;
  out.creation_.topRows(k) = creation_;
  out.annihilation_.leftCols(k) = annihilation_;
  out.time_ = time_;
  return out;
}

ItoQuadruple operator+(const ItoQuadruple& a, const ItoQuadruple& b) {
  require_same_multiplicity(a, b);
  return {a.exchange_ + b.exchange_, a.creation_ + b.creation_,
          a.annihilation_ + b.annihilation_, a.time_ + b.time_};
}

ItoQuadruple operator-(const ItoQuadruple& a, const ItoQuadruple& b) {
  require_same_multiplicity(a, b);
  return {a.exchange_ - b.exchange_, a.creation_ - b.creation_,
          a.annihilation_ - b.annihilation_, a.time_ - b.time_};
}

ItoQuadruple operator*(Complex s, const ItoQuadruple& a) {
  return {s * a.exchange_, s * a.creation_, s * a.annihilation_, s * a.time_};
}

bool approx_equal(const ItoQuadruple& a, const ItoQuadruple& b, double tol) {
  return a.multiplicity() == b.multiplicity() && a.distance(b) <= tol;
}

ItoQuadruple hp_product(const ItoQuadruple& a, const ItoQuadruple& b) {
  require_same_multiplicity(a, b);
  const Complex time = (a.annihilation() * b.creation())(0, 0);
  return {a.exchange() * b.exchange(), a.exchange() * b.creation(),
          a.annihilation() * b.exchange(), time};
}

ItoQuadruple star(const ItoQuadruple& a) {
  return {a.exchange().adjoint(), a.annihilation().adjoint(), a.creation().adjoint(),
          std::conj(a.time())};
}

ItoQuadruple star_product(const ItoQuadruple& a, const ItoQuadruple& b) {
  require_same_multiplicity(a, b);
  const ItoQuadruple as = star(a);
  return b + hp_product(as, b) + as;
}

ItoQuadruple hp_commutator(const ItoQuadruple& a, const ItoQuadruple& b) {
  return hp_product(a, b) - hp_product(b, a);
}

ItoQuadruple newton(Complex alpha) {
  ItoQuadruple q(ComplexMatrix::Zero(1, 1), ComplexMatrix::Zero(1, 1),
                 ComplexMatrix::Zero(1, 1), alpha);
  return q;
}

ItoQuadruple wiener(Complex alpha, Complex xi) {
  return {ComplexMatrix::Zero(1, 1), ComplexMatrix::Constant(1, 1, xi),
          ComplexMatrix::Constant(1, 1, xi), alpha};
}

ItoQuadruple poisson(Complex alpha, Complex zeta, bool literal_time_zeta) {
  return {ComplexMatrix::Constant(1, 1, zeta), ComplexMatrix::Constant(1, 1, kI * zeta),
          ComplexMatrix::Constant(1, 1, -kI * zeta), literal_time_zeta ? zeta : alpha};
}

// ---------------------------------------------------------------------------

ExtendedMatrix::ExtendedMatrix(Eigen::Index m, ComplexMatrix matrix)
    : m_(m), matrix_(std::move(matrix)) {
  if (matrix_.rows() != m + 2 || matrix_.cols() != m + 2) {
    fail(ErrorCode::kDimensionMismatch, "extended matrix must have side m + 2");
  }
  if (!matrix_.col(0).isZero(0.0) || !matrix_.row(m + 1).isZero(0.0)) {
    fail(ErrorCode::kInvalidArgument, "extended matrix: first column and last row must vanish");
  }
}

ExtendedMatrix ExtendedMatrix::operator*(const ExtendedMatrix& other) const {
  if (other.m_ != m_) fail(ErrorCode::kMultiplicityMismatch, "extended matrices differ in m");
  return {m_, matrix_ * other.matrix_};
}

ExtendedMatrix extend(const ItoQuadruple& a) {
  const Eigen::Index m = a.multiplicity();
  ComplexMatrix e = ComplexMatrix::Zero(m + 2, m + 2);
  // rows mu = (-, 1..m, +), columns nu = (-, 1..m, +)
  e.block(0, 1, 1, m) = a.annihilation();
  e(0, m + 1) = a.time();
  e.block(1, 1, m, m) = a.exchange();
  e.block(1, m + 1, m, 1) = a.creation();
  return {m, e};
}

ItoQuadruple restrict_to_quadruple(const ExtendedMatrix& e) {
  const Eigen::Index m = e.multiplicity();
  const ComplexMatrix& x = e.matrix();
  return {x.block(1, 1, m, m), x.block(1, m + 1, m, 1), x.block(0, 1, 1, m), x(0, m + 1)};
}

ComplexMatrix minkowski_metric(Eigen::Index m) {
  ComplexMatrix g = ComplexMatrix::Zero(m + 2, m + 2);
  g(0, m + 1) = 1.0;
  g(m + 1, 0) = 1.0;
  g.block(1, 1, m, m).setIdentity();
  return g;
}

ExtendedMatrix pseudo_adjoint(const ExtendedMatrix& e) {
  const ComplexMatrix g = minkowski_metric(e.multiplicity());
  return {e.multiplicity(), g * e.matrix().adjoint() * g};
}

// ---------------------------------------------------------------------------

StepFunction::StepFunction(Eigen::Index m, std::vector<double> breakpoints,
                           std::vector<ItoQuadruple> values)
    : m_(m), breakpoints_(std::move(breakpoints)), values_(std::move(values)) {
  if (breakpoints_.empty() || breakpoints_.front() != 0.0) {
    fail(ErrorCode::kInvalidArgument, "step function breakpoints must start at 0");
  }
  if (breakpoints_.size() != values_.size() + 1) {
    fail(ErrorCode::kInvalidArgument, "step function needs one value per interval");
  }
  for (std::size_t k = 1; k < breakpoints_.size(); ++k) {
    if (!(breakpoints_[k] > breakpoints_[k - 1]) || !std::isfinite(breakpoints_[k])) {
      fail(ErrorCode::kInvalidArgument, "step function breakpoints must increase");
    }
  }
  for (const auto& v : values_) {
    if (v.multiplicity() != m_) {
      fail(ErrorCode::kMultiplicityMismatch, "step function values differ in multiplicity");
    }
  }
}

StepFunction StepFunction::zero(Eigen::Index m) { return {m, {0.0}, {}}; }

StepFunction StepFunction::constant(double horizon, const ItoQuadruple& value) {
  return {value.multiplicity(), {0.0, horizon}, {value}};
}

ItoQuadruple StepFunction::at(double s) const {
  if (s < 0.0 || s >= horizon()) return ItoQuadruple(m_);
  const auto it = std::upper_bound(breakpoints_.begin(), breakpoints_.end(), s);
  const auto k = static_cast<std::size_t>(it - breakpoints_.begin()) - 1;
  return values_[k];
}

std::vector<double> merge_grids(const std::vector<double>& a, const std::vector<double>& b) {
  std::vector<double> out;
  out.reserve(a.size() + b.size());
  std::merge(a.begin(), a.end(), b.begin(), b.end(), std::back_inserter(out));
  out.erase(std::unique(out.begin(), out.end()), out.end());
  return out;
}

StepFunction step_star(const StepFunction& g, const StepFunction& h) {
  if (g.multiplicity() != h.multiplicity()) {
    fail(ErrorCode::kMultiplicityMismatch, "step_star: multiplicities differ");
  }
  std::vector<double> grid = merge_grids(g.breakpoints(), h.breakpoints());
  std::vector<ItoQuadruple> values;
  values.reserve(grid.size() - 1);
  for (std::size_t k = 0; k + 1 < grid.size(); ++k) {
    values.push_back(star_product(g.at(grid[k]), h.at(grid[k])));
  }
  return {g.multiplicity(), std::move(grid), std::move(values)};
}

}  // namespace qsf
