#pragma once

#include <cstddef>
#include <vector>

#include "qsflow/generators.hpp"
#include "qsflow/ito_algebra.hpp"
#include "qsflow/weyl_fock.hpp"

namespace qsf {

enum class Integrator { kRk4, kExpm };

struct FlowOptions {
  Integrator integrator = Integrator::kRk4;
  /// Total RK4 steps over [0, t]; 0 selects ceil(1000 t).
  std::size_t steps = 0;
};

/// Number of RK4 steps used for horizon t under `opts`.
std::size_t resolve_steps(double t, const FlowOptions& opts);

/// Solution of dS/dt = -(K + sum_n K_n f^n(t)) S, S_0 = I.
ComplexMatrix s_cocycle(const GermModel& model, const PiecewiseCoherent& f, double t);

/// Heisenberg semigroup Theta_t = exp(t lambda), as a superoperator.
SuperOperator evolve_semigroup(const GermModel& model, double t, const FlowOptions& opts = {});

/// Coherent matrix element Upsilon_t^{f,g}, normalized by <f^x|g^x>.
struct ReducedPropagator {
  double t = 0.0;
  SuperOperator map;
  PiecewiseCoherent f;
  PiecewiseCoherent g;

  ComplexMatrix apply(const ComplexMatrix& b) const { return map.apply(b); }
};

/// Generator lambda(conj f(s), ., g(s)) with the amplitudes frozen at
/// the given values.
SuperOperator coherent_generator(const GermMatrix& structural, const ComplexVector& f_value,
                                 const ComplexVector& g_value);

ReducedPropagator coherent_propagator(const GermModel& model, const PiecewiseCoherent& f,
                                      const PiecewiseCoherent& g, double t,
                                      const FlowOptions& opts = {});

struct PicardOptions {
  std::size_t depth = 12;
  std::size_t quad_steps = 256;
  double convergence_tol = 1e-10;
};

struct PicardResult {
  ReducedPropagator propagator;
  std::size_t iterations = 0;
  double last_increment = 0.0;
  bool converged = false;
};

/// Picard iteration of the Duhamel integral equation for Upsilon on a
/// uniform grid with composite Simpson quadrature.
PicardResult picard_oracle(const GermModel& model, const PiecewiseCoherent& f,
                           const PiecewiseCoherent& g, double t, const PicardOptions& opts = {});

/// Creation amplitude r -> g(r)^._+ restricted to [0, t).
PiecewiseCoherent creation_amplitude(const StepFunction& g, double t);

/// theta_t(g) = Upsilon_t^{0,k}(I) exp(int_0^t g^-_+), k the creation amplitude.
ComplexMatrix gen_function(const GermModel& model, const StepFunction& g, double t,
                           const FlowOptions& opts = {});

struct MonotonicityEntry {
  double s = 0.0;
  double min_eig = 0.0;
  bool pass = false;
};

struct KernelReport {
  double t = 0.0;
  ComplexMatrix kernel;
  double min_eig = 0.0;
  bool pass = false;
  std::vector<MonotonicityEntry> monotonicity;
};

/// Kernel M_kl = <eta_k|theta_t(g_k * g_l) eta_l>. With no vectors the
/// block kernel [theta_t(g_k * g_l)] is used. Each s in `later` adds a
/// PSD test of M(t) - M(s).
ComplexMatrix gen_kernel(const GermModel& model, const std::vector<StepFunction>& gs,
                         const std::vector<ComplexVector>& etas, double t,
                         const FlowOptions& opts = {});

KernelReport kernel_psd_check(const GermModel& model, const std::vector<StepFunction>& gs,
                              const std::vector<ComplexVector>& etas, double t,
                              const std::vector<double>& later = {}, double tol = 1e-8,
                              const FlowOptions& opts = {});

struct CoherentElement {
  PiecewiseCoherent f;
  ComplexMatrix b;
};

struct CpReport {
  ComplexMatrix kernel;
  double min_eig = 0.0;
  bool pass = false;
};

/// Block kernel N_kl = Upsilon_t^{f_k,f_l}(B_k^* B_l) <f_k^x|f_l^x>.
CpReport cp_coherent_check(const GermModel& model, double t,
                           const std::vector<CoherentElement>& family, double tol = 1e-8,
                           const FlowOptions& opts = {});

}  // namespace qsf
