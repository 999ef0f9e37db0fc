#include "qsflow/weyl_fock.hpp"

#include <algorithm>
#include <cmath>

#include "qsflow/error.hpp"

namespace qsf {

namespace {

void require_same_multiplicity(Eigen::Index a, Eigen::Index b) {
  if (a != b) fail(ErrorCode::kMultiplicityMismatch, "coherent vectors differ in multiplicity");
}

}  // namespace

PiecewiseCoherent::PiecewiseCoherent(Eigen::Index m, std::vector<double> breakpoints,
                                     std::vector<ComplexVector> amplitudes, Complex prefactor)
    : m_(m),
      breakpoints_(std::move(breakpoints)),
      amplitudes_(std::move(amplitudes)),
      prefactor_(prefactor) {
  if (breakpoints_.empty() || breakpoints_.front() != 0.0) {
    fail(ErrorCode::kInvalidArgument, "coherent vector breakpoints must start at 0");
  }
  if (breakpoints_.size() != amplitudes_.size() + 1) {
    fail(ErrorCode::kInvalidArgument, "coherent vector needs one amplitude per interval");
  }
  for (std::size_t k = 1; k < breakpoints_.size(); ++k) {
    if (!(breakpoints_[k] > breakpoints_[k - 1]) || !std::isfinite(breakpoints_[k])) {
      fail(ErrorCode::kInvalidArgument, "coherent vector breakpoints must increase");
    }
  }
  for (const auto& v : amplitudes_) {
    if (v.size() != m_) fail(ErrorCode::kMultiplicityMismatch, "amplitude has wrong length");
    if (!v.allFinite()) fail(ErrorCode::kInvalidArgument, "amplitude is not finite");
  }
  if (!std::isfinite(prefactor_.real()) || !std::isfinite(prefactor_.imag())) {
    fail(ErrorCode::kInvalidArgument, "prefactor is not finite");
  }
}

PiecewiseCoherent PiecewiseCoherent::vacuum(Eigen::Index m) { return {m, {0.0}, {}, 1.0}; }

PiecewiseCoherent PiecewiseCoherent::constant(double horizon, const ComplexVector& amplitude,
                                              Complex prefactor) {
  return {amplitude.size(), {0.0, horizon}, {amplitude}, prefactor};
}

ComplexVector PiecewiseCoherent::at(double s) const {
  if (s < 0.0 || s >= horizon()) return ComplexVector::Zero(m_);
  const auto it = std::upper_bound(breakpoints_.begin(), breakpoints_.end(), s);
  return amplitudes_[static_cast<std::size_t>(it - breakpoints_.begin()) - 1];
}

PiecewiseCoherent PiecewiseCoherent::unit() const {
  PiecewiseCoherent out = *this;
  out.prefactor_ = 1.0;
  return out;
}

PiecewiseCoherent PiecewiseCoherent::shifted(double s) const {
  if (s <= 0.0) return *this;
  std::vector<double> grid{0.0};
  std::vector<ComplexVector> amps;
  for (std::size_t k = 0; k < amplitudes_.size(); ++k) {
    if (breakpoints_[k + 1] <= s) continue;
    grid.push_back(breakpoints_[k + 1] - s);
    amps.push_back(amplitudes_[k]);
  }
  return {m_, std::move(grid), std::move(amps), prefactor_};
}

PiecewiseCoherent PiecewiseCoherent::truncated(double t) const {
  if (t >= horizon()) return *this;
  std::vector<double> grid{0.0};
  std::vector<ComplexVector> amps;
  for (std::size_t k = 0; k < amplitudes_.size() && breakpoints_[k] < t; ++k) {
    grid.push_back(std::min(breakpoints_[k + 1], t));
    amps.push_back(amplitudes_[k]);
  }
  return {m_, std::move(grid), std::move(amps), prefactor_};
}

Complex overlap_exponent(const PiecewiseCoherent& u, const PiecewiseCoherent& v, double from,
                         double to) {
  require_same_multiplicity(u.multiplicity(), v.multiplicity());
  std::vector<double> grid = merge_grids(u.breakpoints(), v.breakpoints());
  Complex sum{};
  for (std::size_t k = 0; k + 1 < grid.size(); ++k) {
    const double lo = std::max(grid[k], from);
    const double hi = std::min(grid[k + 1], to);
    if (hi <= lo) continue;
    sum += u.at(grid[k]).dot(v.at(grid[k])) * (hi - lo);
  }
  return sum;
}

Complex overlap_exponent(const PiecewiseCoherent& u, const PiecewiseCoherent& v) {
  return overlap_exponent(u, v, 0.0, std::max(u.horizon(), v.horizon()));
}

Complex coherent_inner(const PiecewiseCoherent& u, const PiecewiseCoherent& v) {
  return std::conj(u.prefactor()) * v.prefactor() * std::exp(overlap_exponent(u, v));
}

PiecewiseCoherent weyl_apply(double t, const StepFunction& g, const PiecewiseCoherent& f) {
  require_same_multiplicity(g.multiplicity(), f.multiplicity());
  if (t < 0.0) fail(ErrorCode::kInvalidArgument, "weyl_apply: negative time");
  std::vector<double> grid = merge_grids(f.breakpoints(), g.breakpoints());
  if (t > 0.0) grid = merge_grids(grid, {0.0, t});
  const Eigen::Index m = f.multiplicity();

  std::vector<ComplexVector> amps;
  amps.reserve(grid.size() - 1);
  Complex exponent{};
  for (std::size_t k = 0; k + 1 < grid.size(); ++k) {
    const double s = grid[k];
    ComplexVector fs = f.at(s);
    if (s < t) {
      const ItoQuadruple a = g.at(s);
      const double dt = grid[k + 1] - s;
      exponent += ((a.annihilation() * fs)(0, 0) + a.time()) * dt;
      fs = fs + a.exchange() * fs + a.creation().col(0);
    }
    amps.push_back(std::move(fs));
  }
  // Trim trailing zero amplitudes so the horizon stays tight.
  while (!amps.empty() && amps.back().isZero(0.0)) {
    amps.pop_back();
    grid.pop_back();
  }
  return {m, std::move(grid), std::move(amps), f.prefactor() * std::exp(exponent)};
}

PiecewiseCoherent weyl_apply(double t, const ItoQuadruple& a, const PiecewiseCoherent& f) {
  if (t <= 0.0) {
    if (t < 0.0) fail(ErrorCode::kInvalidArgument, "weyl_apply: negative time");
    return f;
  }
  return weyl_apply(t, StepFunction::constant(t, a), f);
}

double weyl_semigroup_check(double t, const ItoQuadruple& a, const ItoQuadruple& b,
                            const PiecewiseCoherent& f, const PiecewiseCoherent& h) {
  const Complex lhs = coherent_inner(weyl_apply(t, a, f), weyl_apply(t, b, h));
  const Complex rhs = coherent_inner(f, weyl_apply(t, star_product(a, b), h));
  return std::abs(lhs - rhs) / std::max(1.0, std::abs(lhs));
}

ComplexMatrix coherent_gram(const std::vector<PiecewiseCoherent>& family) {
  const auto n = static_cast<Eigen::Index>(family.size());
  ComplexMatrix g(n, n);
  for (Eigen::Index k = 0; k < n; ++k) {
    for (Eigen::Index l = 0; l < n; ++l) {
      g(k, l) = coherent_inner(family[static_cast<std::size_t>(k)],
                               family[static_cast<std::size_t>(l)]);
    }
  }
  return g;
}

}  // namespace qsf
