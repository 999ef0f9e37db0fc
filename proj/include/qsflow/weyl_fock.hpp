#pragma once

#include <vector>

#include "qsflow/ito_algebra.hpp"
#include "qsflow/matrix_core.hpp"

namespace qsf {

/// prefactor * f^(x), where f is a piecewise-constant C^m amplitude on
/// [0, T) and zero afterwards.
class PiecewiseCoherent {
 public:
  PiecewiseCoherent() = default;
  PiecewiseCoherent(Eigen::Index m, std::vector<double> breakpoints,
                    std::vector<ComplexVector> amplitudes, Complex prefactor = 1.0);

  static PiecewiseCoherent vacuum(Eigen::Index m);
  static PiecewiseCoherent constant(double horizon, const ComplexVector& amplitude,
                                    Complex prefactor = 1.0);

  Eigen::Index multiplicity() const { return m_; }
  double horizon() const { return breakpoints_.empty() ? 0.0 : breakpoints_.back(); }
  const std::vector<double>& breakpoints() const { return breakpoints_; }
  const std::vector<ComplexVector>& amplitudes() const { return amplitudes_; }
  Complex prefactor() const { return prefactor_; }

  /// Amplitude at time s (zero outside [0, T)).
  ComplexVector at(double s) const;

  /// Same vector with prefactor 1.
  PiecewiseCoherent unit() const;

  /// Time shift r -> f(r + s).
  PiecewiseCoherent shifted(double s) const;

  /// Restriction of the amplitude to [0, t).
  PiecewiseCoherent truncated(double t) const;

 private:
  Eigen::Index m_ = 0;
  std::vector<double> breakpoints_{0.0};
  std::vector<ComplexVector> amplitudes_;
  Complex prefactor_{1.0, 0.0};
};

/// Integral of <u(r), v(r)> over [0, inf), without prefactors.
Complex overlap_exponent(const PiecewiseCoherent& u, const PiecewiseCoherent& v);

/// Same integral restricted to [from, to).
Complex overlap_exponent(const PiecewiseCoherent& u, const PiecewiseCoherent& v,
                         double from, double to);

Complex coherent_inner(const PiecewiseCoherent& u, const PiecewiseCoherent& v);

/// Image of f under the Weyl operator W(t, a).
PiecewiseCoherent weyl_apply(double t, const ItoQuadruple& a, const PiecewiseCoherent& f);

/// Image of f under W(t, g) for a step function g, i.e. the time-ordered
/// product of the constant pieces.
PiecewiseCoherent weyl_apply(double t, const StepFunction& g, const PiecewiseCoherent& f);

/// |<W(t,a) f, W(t,b) h> - <f, W(t, a * b) h>| divided by max(1, |lhs|).
double weyl_semigroup_check(double t, const ItoQuadruple& a, const ItoQuadruple& b,
                            const PiecewiseCoherent& f, const PiecewiseCoherent& h);

inline double weyl_semigroup_check(double t, const ItoQuadruple& a,
                                   const PiecewiseCoherent& f, const PiecewiseCoherent& h) {
  return weyl_semigroup_check(t, a, a, f, h);
}

/// Gram matrix G_kl = <u_k, u_l>.
ComplexMatrix coherent_gram(const std::vector<PiecewiseCoherent>& family);

}  // namespace qsf
