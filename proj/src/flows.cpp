#include "qsflow/flows.hpp"

#include <algorithm>
#include <cmath>

#include "qsflow/error.hpp"

namespace qsf {

namespace {

void require_time(double t) {
  if (!(t >= 0.0) || !std::isfinite(t)) fail(ErrorCode::kInvalidArgument, "time must be >= 0");
}

void require_multiplicity(const GermModel& model, const PiecewiseCoherent& f) {
  if (f.multiplicity() != model.multiplicity()) {
    fail(ErrorCode::kMultiplicityMismatch, "coherent amplitude multiplicity differs from model");
  }
}

/// Sorted grid of [0, t] containing every breakpoint of f and g below t.
std::vector<double> segment_grid(const PiecewiseCoherent& f, const PiecewiseCoherent& g,
                                 double t) {
  std::vector<double> grid = merge_grids(merge_grids(f.breakpoints(), g.breakpoints()), {0.0, t});
  grid.erase(std::remove_if(grid.begin(), grid.end(), [t](double x) { return x > t; }),
             grid.end());
  return grid;
}

/// I + X + X^2/2 + X^3/6 + X^4/24: one RK4 step of U' = U A with X = h A.
ComplexMatrix rk4_step_matrix(const ComplexMatrix& a, double h) {
  const ComplexMatrix x = h * a;
  const auto n = x.rows();
  ComplexMatrix term = ComplexMatrix::Identity(n, n);
  ComplexMatrix sum = term;
  for (int k = 1; k <= 4; ++k) {
    term = (term * x / static_cast<double>(k)).eval();
    sum += term;
  }
  return sum;
}

/// Advances U by U * exp(A dt) using the requested integrator; RK4 uses
/// `n` equal steps.
void advance(ComplexMatrix& u, const ComplexMatrix& a, double dt, std::size_t n,
             Integrator integrator) {
  if (dt <= 0.0) return;
  if (integrator == Integrator::kExpm) {
    u = (u * expm(dt * a)).eval();
    return;
  }
  const ComplexMatrix p = rk4_step_matrix(a, dt / static_cast<double>(n));
  for (std::size_t i = 0; i < n; ++i) u = (u * p).eval();
}

std::size_t segment_steps(double dt, double t, std::size_t total) {
  if (t <= 0.0) return 1;
  const double share = static_cast<double>(total) * dt / t;
  return std::max<std::size_t>(1, static_cast<std::size_t>(std::ceil(share - 1e-9)));
}

/// Hermitian residual |M - M^*|_F and smallest eigenvalue of (M + M^*)/2.
double symmetric_min_eig(const ComplexMatrix& m, double* residual) {
  if (residual != nullptr) *residual = (m - m.adjoint()).norm();
  if (m.size() == 0) return 0.0;
  const ComplexMatrix h = 0.5 * (m + m.adjoint());
  Eigen::SelfAdjointEigenSolver<ComplexMatrix> es(h, Eigen::EigenvaluesOnly);
  return es.eigenvalues()(0);
}

SuperOperator phi_superop(const GermModel& model, Eigen::Index mu, Eigen::Index nu) {
  SuperOperator out = SuperOperator::zero(model.dim());
  for (std::size_t k = 0; k < model.kraus().size(); ++k) {
    out = out + superop_sandwich(model.kraus_op(k, mu), model.kraus_op(k, nu));
  }
  return out;
}

}  // namespace

std::size_t resolve_steps(double t, const FlowOptions& opts) {
  if (opts.steps > 0) return opts.steps;
  return std::max<std::size_t>(1, static_cast<std::size_t>(std::ceil(1000.0 * t)));
}

ComplexMatrix s_cocycle(const GermModel& model, const PiecewiseCoherent& f, double t) {
  require_time(t);
  require_multiplicity(model, f);
  const Eigen::Index d = model.dim();
  std::vector<double> grid = segment_grid(f, f, t);
  ComplexMatrix s = ComplexMatrix::Identity(d, d);
  for (std::size_t k = 0; k + 1 < grid.size(); ++k) {
    const double dt = grid[k + 1] - grid[k];
    const ComplexVector fv = f.at(grid[k]);
    ComplexMatrix a = model.K();
    for (Eigen::Index n = 0; n < fv.size(); ++n) {
      a += fv(n) * model.K_list()[static_cast<std::size_t>(n)];
    }
    s = (expm(-dt * a) * s).eval();
  }
  return s;
}

SuperOperator evolve_semigroup(const GermModel& model, double t, const FlowOptions& opts) {
  require_time(t);
  const Eigen::Index d = model.dim();
  ComplexMatrix u = ComplexMatrix::Identity(d * d, d * d);
  advance(u, lindblad_superop(model).matrix, t, resolve_steps(t, opts), opts.integrator);
  return {d, u};
}

SuperOperator coherent_generator(const GermMatrix& structural, const ComplexVector& f_value,
                                 const ComplexVector& g_value) {
  const Eigen::Index m = structural.multiplicity;
  ComplexMatrix lam = structural.at(0, 0).matrix;
  for (Eigen::Index n = 1; n <= m; ++n) {
    const Complex fb = std::conj(f_value(n - 1));
    const Complex gn = g_value(n - 1);
    if (fb != Complex{}) lam += fb * structural.at(n, 0).matrix;
    if (gn != Complex{}) lam += gn * structural.at(0, n).matrix;
  }
  for (Eigen::Index mu = 1; mu <= m; ++mu) {
    for (Eigen::Index nu = 1; nu <= m; ++nu) {
      const Complex w = std::conj(f_value(mu - 1)) * g_value(nu - 1);
      if (w != Complex{}) lam += w * structural.at(mu, nu).matrix;
    }
  }
  return {structural.dim, lam};
}

ReducedPropagator coherent_propagator(const GermModel& model, const PiecewiseCoherent& f,
                                      const PiecewiseCoherent& g, double t,
                                      const FlowOptions& opts) {
  require_time(t);
  require_multiplicity(model, f);
  require_multiplicity(model, g);
  const Eigen::Index d = model.dim();
  const GermMatrix structural = structural_maps(model);
  const std::size_t total = resolve_steps(t, opts);
  const std::vector<double> grid = segment_grid(f, g, t);

  ComplexMatrix u = ComplexMatrix::Identity(d * d, d * d);
  for (std::size_t k = 0; k + 1 < grid.size(); ++k) {
    const double dt = grid[k + 1] - grid[k];
    const SuperOperator lam = coherent_generator(structural, f.at(grid[k]), g.at(grid[k]));
    advance(u, lam.matrix, dt, segment_steps(dt, t, total), opts.integrator);
  }
  return {t, SuperOperator(d, u), f.unit(), g.unit()};
}

namespace {

/// Quadrature weights on points 0..j of a uniform grid with spacing h.
std::vector<double> quadrature_weights(std::size_t j, double h) {
  std::vector<double> w(j + 1, 0.0);
  if (j == 0) return w;
  if (j == 1) {
    w[0] = w[1] = 0.5 * h;
    return w;
  }
  const std::size_t simpson_end = (j % 2 == 0) ? j : j - 3;
  for (std::size_t i = 0; i + 2 <= simpson_end; i += 2) {
    w[i] += h / 3.0;
    w[i + 1] += 4.0 * h / 3.0;
    w[i + 2] += h / 3.0;
  }
  if (j % 2 == 1) {
    const std::size_t s = j - 3;
    w[s] += 3.0 * h / 8.0;
    w[s + 1] += 9.0 * h / 8.0;
    w[s + 2] += 9.0 * h / 8.0;
    w[s + 3] += 3.0 * h / 8.0;
  }
  return w;
}

}  // namespace

PicardResult picard_oracle(const GermModel& model, const PiecewiseCoherent& f,
                           const PiecewiseCoherent& g, double t, const PicardOptions& opts) {
  require_time(t);
  require_multiplicity(model, f);
  require_multiplicity(model, g);
  if (opts.quad_steps < 8) fail(ErrorCode::kInvalidArgument, "picard_oracle: quad_steps < 8");
  const Eigen::Index d = model.dim();
  const Eigen::Index m = model.multiplicity();
  if (t == 0.0) {
    PicardResult trivial;
    trivial.converged = true;
    trivial.propagator = {0.0, SuperOperator(d, ComplexMatrix::Identity(d * d, d * d)), f.unit(),
                          g.unit()};
    return trivial;
  }

  // Nodes are aligned with the amplitude breakpoints so the integrand is
  // smooth on every segment; each segment gets a share of quad_steps.
  std::vector<double> cuts{0.0};
  for (double b : merge_grids(f.breakpoints(), g.breakpoints())) {
    if (b > 0.0 && b < t) cuts.push_back(b);
  }
  cuts.push_back(t);
  std::vector<double> nodes{0.0};
  std::vector<std::size_t> seg_start;
  std::vector<double> seg_h;
  for (std::size_t s = 0; s + 1 < cuts.size(); ++s) {
    const double len = cuts[s + 1] - cuts[s];
    const auto k = std::max<std::size_t>(
        2, static_cast<std::size_t>(
               std::lround(static_cast<double>(opts.quad_steps) * len / t)));
    seg_start.push_back(nodes.size() - 1);
    seg_h.push_back(len / static_cast<double>(k));
    for (std::size_t i = 1; i < k; ++i) nodes.push_back(cuts[s] + seg_h.back() * static_cast<double>(i));
    nodes.push_back(cuts[s + 1]);
  }
  seg_start.push_back(nodes.size() - 1);
  const std::size_t n = nodes.size() - 1;

  // Per-cell drift propagators and overlap factors; cell j is [r_{j-1}, r_j].
  std::vector<ComplexMatrix> cell_f(n + 1), cell_g(n + 1);
  std::vector<Complex> cell_e(n + 1);
  for (std::size_t j = 1; j <= n; ++j) {
    const double len = nodes[j] - nodes[j - 1];
    cell_f[j] = s_cocycle(model, f.shifted(nodes[j - 1]), len);
    cell_g[j] = s_cocycle(model, g.shifted(nodes[j - 1]), len);
    cell_e[j] = std::exp(-overlap_exponent(f, g, nodes[j - 1], nodes[j]));
  }

  std::vector<std::vector<SuperOperator>> phi_blocks(static_cast<std::size_t>(m + 1));
  for (Eigen::Index mu = 0; mu <= m; ++mu) {
    for (Eigen::Index nu = 0; nu <= m; ++nu) {
      phi_blocks[static_cast<std::size_t>(mu)].push_back(phi_superop(model, mu, nu));
    }
  }
  auto weighted_phi = [&](double s) {
    const ComplexVector fv = f.at(s);
    const ComplexVector gv = g.at(s);
    ComplexMatrix out = phi_blocks[0][0].matrix;
    for (Eigen::Index mu = 0; mu <= m; ++mu) {
      for (Eigen::Index nu = 0; nu <= m; ++nu) {
        if (mu == 0 && nu == 0) continue;
        const Complex wf = mu == 0 ? Complex{1.0} : std::conj(fv(mu - 1));
        const Complex wg = nu == 0 ? Complex{1.0} : gv(nu - 1);
        const Complex w = wf * wg;
        if (w != Complex{}) {
          out += w * phi_blocks[static_cast<std::size_t>(mu)][static_cast<std::size_t>(nu)].matrix;
        }
      }
    }
    return out;
  };
  // Amplitudes are constant on cells, so sample at midpoints. Node i sees
  // the cell to its right as a lower end and the cell to its left as an
  // upper end; the two differ only at segment boundaries.
  std::vector<ComplexMatrix> cell_phi(n + 1);
  for (std::size_t j = 1; j <= n; ++j) cell_phi[j] = weighted_phi(0.5 * (nodes[j - 1] + nodes[j]));
  auto phi_right = [&](std::size_t i) -> const ComplexMatrix& { return cell_phi[i < n ? i + 1 : n]; };
  auto phi_left = [&](std::size_t i) -> const ComplexMatrix& { return cell_phi[i > 0 ? i : 1]; };

  // drift[i][j - i] = H_{r_i, r_j}.
  std::vector<std::vector<ComplexMatrix>> drift(n + 1);
  for (std::size_t i = 0; i <= n; ++i) {
    ComplexMatrix x = ComplexMatrix::Identity(d, d);
    ComplexMatrix y = ComplexMatrix::Identity(d, d);
    Complex e{1.0};
    drift[i].reserve(n + 1 - i);
    for (std::size_t j = i; j <= n; ++j) {
      if (j > i) {
        x = (cell_f[j] * x).eval();
        y = (cell_g[j] * y).eval();
        e *= cell_e[j];
      }
      drift[i].push_back(e * superop_sandwich(x, y).matrix);
    }
  }

  // Integral up to node j: full segments, then the partial one holding j.
  struct Term {
    std::size_t node;
    bool upper_end;
    double weight;
  };
  std::vector<std::vector<Term>> terms(n + 1);
  for (std::size_t j = 1; j <= n; ++j) {
    for (std::size_t s = 0; s + 1 < seg_start.size() && seg_start[s] < j; ++s) {
      const std::size_t lo = seg_start[s];
      const std::size_t hi = std::min(seg_start[s + 1], j);
      const std::vector<double> w = quadrature_weights(hi - lo, seg_h[s]);
      for (std::size_t k = 0; k < w.size(); ++k) {
        terms[j].push_back({lo + k, lo + k == hi && k > 0, w[k]});
      }
    }
  }

  std::vector<ComplexMatrix> current(n + 1);
  for (std::size_t j = 0; j <= n; ++j) current[j] = drift[0][j];

  PicardResult result;
  for (std::size_t it = 0; it < opts.depth; ++it) {
    std::vector<ComplexMatrix> lower(n + 1), upper(n + 1);
    for (std::size_t i = 0; i <= n; ++i) {
      lower[i] = current[i] * phi_right(i);
      upper[i] = current[i] * phi_left(i);
    }
    std::vector<ComplexMatrix> next(n + 1);
    double increment = 0.0;
    for (std::size_t j = 0; j <= n; ++j) {
      ComplexMatrix acc = drift[0][j];
      for (const Term& term : terms[j]) {
        const ComplexMatrix& left = term.upper_end ? upper[term.node] : lower[term.node];
        acc.noalias() += term.weight * (left * drift[term.node][j - term.node]);
      }
      increment = std::max(increment, (acc - current[j]).cwiseAbs().maxCoeff());
      next[j] = std::move(acc);
    }
    current = std::move(next);
    result.iterations = it + 1;
    result.last_increment = increment;
    if (increment < opts.convergence_tol) {
      result.converged = true;
      break;
    }
  }
  result.propagator = {t, SuperOperator(d, current[n]), f.unit(), g.unit()};
  return result;
}

PiecewiseCoherent creation_amplitude(const StepFunction& g, double t) {
  std::vector<ComplexVector> amps;
  amps.reserve(g.values().size());
  for (const auto& v : g.values()) amps.push_back(v.creation().col(0));
  return PiecewiseCoherent(g.multiplicity(), g.breakpoints(), std::move(amps)).truncated(t);
}

ComplexMatrix gen_function(const GermModel& model, const StepFunction& g, double t,
                           const FlowOptions& opts) {
  require_time(t);
  if (g.multiplicity() != model.multiplicity()) {
    fail(ErrorCode::kMultiplicityMismatch, "step function multiplicity differs from model");
  }
  const PiecewiseCoherent k = creation_amplitude(g, t);
  const ReducedPropagator ups =
      coherent_propagator(model, PiecewiseCoherent::vacuum(model.multiplicity()), k, t, opts);
  Complex exponent{};
  const auto& bp = g.breakpoints();
  for (std::size_t i = 0; i < g.values().size() && bp[i] < t; ++i) {
    exponent += g.values()[i].time() * (std::min(bp[i + 1], t) - bp[i]);
  }
  const Eigen::Index d = model.dim();
  return ups.apply(ComplexMatrix::Identity(d, d)) * std::exp(exponent);
}

ComplexMatrix gen_kernel(const GermModel& model, const std::vector<StepFunction>& gs,
                         const std::vector<ComplexVector>& etas, double t,
                         const FlowOptions& opts) {
  const auto count = static_cast<Eigen::Index>(gs.size());
  const Eigen::Index d = model.dim();
  if (!etas.empty() && etas.size() != gs.size()) {
    fail(ErrorCode::kInvalidArgument, "kernel needs one vector per step function");
  }
  for (const auto& eta : etas) {
    if (eta.size() != d) fail(ErrorCode::kDimensionMismatch, "kernel vector has wrong length");
  }
  const Eigen::Index side = etas.empty() ? d : 1;
  ComplexMatrix out(count * side, count * side);
  for (Eigen::Index k = 0; k < count; ++k) {
    for (Eigen::Index l = 0; l < count; ++l) {
      const auto sk = static_cast<std::size_t>(k);
      const auto sl = static_cast<std::size_t>(l);
      const ComplexMatrix theta = gen_function(model, step_star(gs[sk], gs[sl]), t, opts);
      if (etas.empty()) {
        out.block(k * d, l * d, d, d) = theta;
      } else {
        out(k, l) = etas[sk].dot(theta * etas[sl]);
      }
    }
  }
  return out;
}

KernelReport kernel_psd_check(const GermModel& model, const std::vector<StepFunction>& gs,
                              const std::vector<ComplexVector>& etas, double t,
                              const std::vector<double>& later, double tol,
                              const FlowOptions& opts) {
  KernelReport report;
  report.t = t;
  report.kernel = gen_kernel(model, gs, etas, t, opts);
  double residual = 0.0;
  report.min_eig = symmetric_min_eig(report.kernel, &residual);
  const double herm_ok = residual <= tol * std::max(1.0, report.kernel.norm());
  report.pass = herm_ok && report.min_eig >= -tol;
  for (double s : later) {
    if (!(s > t)) fail(ErrorCode::kInvalidArgument, "monotonicity times must exceed t");
    const ComplexMatrix diff = report.kernel - gen_kernel(model, gs, etas, s, opts);
    MonotonicityEntry entry;
    entry.s = s;
    entry.min_eig = symmetric_min_eig(diff, nullptr);
    entry.pass = entry.min_eig >= -tol;
    report.pass = report.pass && entry.pass;
    report.monotonicity.push_back(entry);
  }
  return report;
}

CpReport cp_coherent_check(const GermModel& model, double t,
                           const std::vector<CoherentElement>& family, double tol,
                           const FlowOptions& opts) {
  const Eigen::Index d = model.dim();
  const auto count = static_cast<Eigen::Index>(family.size());
  CpReport report;
  report.kernel = ComplexMatrix(count * d, count * d);
  for (Eigen::Index k = 0; k < count; ++k) {
    const CoherentElement& ek = family[static_cast<std::size_t>(k)];
    if (ek.b.rows() != d || ek.b.cols() != d) {
      fail(ErrorCode::kDimensionMismatch, "family operator has wrong size");
    }
    for (Eigen::Index l = 0; l < count; ++l) {
      const CoherentElement& el = family[static_cast<std::size_t>(l)];
      const ReducedPropagator ups = coherent_propagator(model, ek.f, el.f, t, opts);
      report.kernel.block(k * d, l * d, d, d) =
          ups.apply(ek.b.adjoint() * el.b) * coherent_inner(ek.f.unit(), el.f.unit());
    }
  }
  double residual = 0.0;
  report.min_eig = symmetric_min_eig(report.kernel, &residual);
  report.pass = report.min_eig >= -tol && residual <= tol * std::max(1.0, report.kernel.norm());
  return report;
}

}  // namespace qsf
