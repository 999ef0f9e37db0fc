// Acceptance suite: one PASS/FAIL line per criterion; exits non-zero if
// any criterion fails.
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "qsflow/commands.hpp"
#include "qsflow/flows.hpp"
#include "qsflow/generators.hpp"
#include "qsflow/ito_algebra.hpp"
#include "qsflow/trajectories.hpp"
#include "qsflow/weyl_fock.hpp"
#include "test_support.hpp"

namespace {

using namespace qsf;
using testing::max_abs;
using testing::random_coherent;
using testing::random_filtering_model;
using testing::random_matrix;
using testing::random_model;
using testing::random_quadruple;

struct Outcome {
  bool pass = true;
  std::string detail;
};

struct Criterion {
  int id;
  const char* name;
  double time_limit;  // seconds
  std::function<Outcome()> run;
};

std::string fmt(const char* f, double x) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, x);
  return buf;
}

// Pinned tolerances.
constexpr double kAlgebraTol = 1e-13;
constexpr double kWeylTol = 1e-10;
constexpr double kCcpFloor = 1e-8;
constexpr double kChoiTol = 1e-10;
constexpr double kGaugeTol = 1e-12;
constexpr double kUnitarityTol = 1e-12;
constexpr double kSemigroupTol = 1e-10;
constexpr double kMonotoneTol = 1e-9;
constexpr double kPicardTol = 1e-6;
constexpr double kMartingaleSigmas = 4.0;
constexpr double kTrajFloor = 0.02;
constexpr double kKernelTol = 1e-8;

Outcome algebra() {
  std::mt19937_64 rng(101);
  double assoc = 0.0, anti = 0.0, hom = 0.0, inv = 0.0;
  for (int i = 0; i < 1000; ++i) {
    const Eigen::Index m = 1 + i % 3;
    const ItoQuadruple a = random_quadruple(rng, m);
    const ItoQuadruple b = random_quadruple(rng, m);
    const ItoQuadruple c = random_quadruple(rng, m);
    assoc = std::max(assoc, hp_product(hp_product(a, b), c).distance(hp_product(a, hp_product(b, c))));
    anti = std::max(anti, star(hp_product(a, b)).distance(hp_product(star(b), star(a))));
    hom = std::max(hom, max_abs((extend(a) * extend(b)).matrix() - extend(hp_product(a, b)).matrix()));
    inv = std::max(inv, max_abs(pseudo_adjoint(extend(a)).matrix() - extend(star(a)).matrix()));
  }
  const ItoQuadruple w = wiener(0.0, 1.0);
  const ItoQuadruple p = poisson(0.0, 1.0);
  const bool dq = approx_equal(hp_product(w, w), newton(1.0), 0.0);
  const bool dp = approx_equal(hp_product(p, p), p + newton(1.0), 0.0);
  const bool dt = hp_product(newton(1.0), newton(1.0)).is_zero();
  Outcome o;
  o.pass = assoc <= kAlgebraTol && anti <= kAlgebraTol && hom <= kAlgebraTol &&
           inv <= kAlgebraTol && dq && dp && dt;
  o.detail = "assoc " + fmt("%.2e", assoc) + ", anti " + fmt("%.2e", anti) + ", extend " +
             fmt("%.2e", std::max(hom, inv)) + ", tables " + (dq && dp && dt ? "exact" : "WRONG");
  return o;
}

Outcome weyl() {
  std::mt19937_64 rng(102);
  std::uniform_real_distribution<double> ut(0.0, 2.0);
  double worst = 0.0;
  for (int i = 0; i < 200; ++i) {
    const Eigen::Index m = 1 + i % 2;
    const double s = 1.0 / static_cast<double>(m);
    const ItoQuadruple a = s * random_quadruple(rng, m);
    const PiecewiseCoherent f = random_coherent(rng, m);
    const PiecewiseCoherent h = random_coherent(rng, m);
    worst = std::max(worst, weyl_semigroup_check(ut(rng), a, f, h));
  }
  return {worst <= kWeylTol, "max discrepancy " + fmt("%.2e", worst) + " over 200 draws"};
}

Outcome ccp() {
  std::mt19937_64 rng(103);
  std::uniform_int_distribution<int> dd(1, 3), mm(0, 2), pp(1, 3);
  double worst = 1e300;
  int failures = 0;
  for (int i = 0; i < 100; ++i) {
    const GermModel model = random_model(rng, dd(rng), mm(rng), static_cast<std::size_t>(pp(rng)));
    const CcpReport r = ccp_check(build_germ(model), {}, kCcpFloor);
    worst = std::min(worst, r.min_eig);
    if (!r.pass) ++failures;
  }
  const CcpReport t = ccp_check(transpose_perturbed_germ(testing::amplitude_damping_germ()), {},
                                kCcpFloor);
  const bool witness = !t.pass && t.witness.size() > 0;
  Outcome o;
  o.pass = failures == 0 && witness;
  o.detail = "100 models, min eig " + fmt("%.2e", worst) + "; transpose " +
             (witness ? "rejected with witness (min eig " + fmt("%.3f", t.min_eig) + ")"
                      : std::string("NOT rejected"));
  return o;
}

Outcome dilation() {
  std::mt19937_64 rng(104);
  double choi = 0.0, vac = 0.0, lam = 0.0;
  for (int i = 0; i < 50; ++i) {
    const Eigen::Index d = 1 + i % 3;
    const Eigen::Index m = i % 3;
    const GermModel model = random_model(rng, d, m, 1 + static_cast<std::size_t>(i % 3));
    const auto kraus = kraus_extract(block_choi(model), d, m);
    const ComplexMatrix a = block_phi_matrix(model.kraus(), d, m);
    choi = std::max(choi, (a - block_phi_matrix(kraus, d, m)).norm() / std::max(1.0, a.norm()));
    ComplexVector eta = random_matrix(rng, d, 1).col(0);
    eta.normalize();
    const GermModel fixed = gauge_fix(model, eta);
    for (const KrausTerm& t : fixed.kraus()) vac = std::max(vac, std::abs(eta.dot(t.plus * eta)));
    lam = std::max(lam, (lindblad_superop(model).matrix - lindblad_superop(fixed).matrix).norm());
  }
  Outcome o;
  o.pass = choi <= kChoiTol && vac <= kGaugeTol && lam <= kGaugeTol;
  o.detail = "rebuild " + fmt("%.2e", choi) + ", <eta|L'eta> " + fmt("%.2e", vac) +
             ", lambda change " + fmt("%.2e", lam);
  return o;
}

Outcome unitarity() {
  std::mt19937_64 rng(105);
  double worst = 0.0;
  for (int i = 0; i < 50; ++i) {
    const Eigen::Index d = 1 + i % 3;
    const GermModel model =
        random_filtering_model(rng, d, i % 3, 1 + static_cast<std::size_t>(i % 3));
    const UnitarityReport r = unitarity_check(canonical_completion(model), d, kUnitarityTol);
    for (double x : r.residuals) worst = std::max(worst, x);
  }
  UnitarityCoefficients c;
  c.K = ComplexMatrix::Constant(1, 1, 0.1);
  c.L_plus = ComplexMatrix::Zero(1, 1);
  c.J_bullet = ComplexMatrix::Identity(1, 1);
  c.J_circ = ComplexMatrix::Zero(1, 1);
  c.K_bullet = ComplexMatrix::Zero(1, 1);
  c.K_circ = ComplexMatrix::Zero(1, 1);
  const UnitarityReport bad = unitarity_check(c, 1, kUnitarityTol);
  const bool detected = !bad.pass && std::abs(bad.residuals[0] - 0.2) < 1e-15 &&
                        bad.residuals[1] == 0.0 && bad.residuals[2] == 0.0 &&
                        bad.residuals[3] == 0.0 && bad.residuals[4] == 0.0;
  Outcome o;
  o.pass = worst <= kUnitarityTol && detected;
  o.detail = "max residual " + fmt("%.2e", worst) + "; K+0.1 perturbation " +
             (detected ? "flagged on condition 1 (0.2)" : "NOT flagged");
  return o;
}

Outcome semigroup() {
  std::mt19937_64 rng(106);
  double law = 0.0, cons = 0.0, mono = 0.0;
  for (int i = 0; i < 5; ++i) {
    const GermModel model = random_model(rng, 2, 1, 2, 0.4);
    const double r = 0.3 + 0.4 * i, s = 2.0 - 0.35 * i;
    const SuperOperator a = evolve_semigroup(model, r).compose(evolve_semigroup(model, s));
    law = std::max(law, (a.matrix - evolve_semigroup(model, r + s).matrix).norm());

    const GermModel filt = random_filtering_model(rng, 3, 1, 2, 0.5);
    const ComplexMatrix id3 = ComplexMatrix::Identity(3, 3);
    for (double t : {0.5, 1.0, 2.0}) {
      cons = std::max(cons, max_abs(evolve_semigroup(filt, t).apply(id3) - id3));
    }

    const ComplexMatrix extra = random_matrix(rng, 3, 3, 0.5);
    const GermModel sub(3, 1, filt.K() + extra.adjoint() * extra, filt.K_list(), filt.kraus());
    double prev = 1.0;
    for (int k = 1; k <= 20; ++k) {
      const double now = min_eig_hermitian(evolve_semigroup(sub, 0.1 * k).apply(id3));
      mono = std::max(mono, now - prev);
      prev = now;
    }
  }
  Outcome o;
  o.pass = law <= kSemigroupTol && cons <= kSemigroupTol && mono <= kMonotoneTol;
  o.detail = "law " + fmt("%.2e", law) + ", Theta(I)-I " + fmt("%.2e", cons) +
             ", max min-eig increase " + fmt("%.2e", mono);
  return o;
}

double op_norm(const ComplexMatrix& a) {
  return Eigen::JacobiSVD<ComplexMatrix>(a).singularValues()(0);
}

Outcome oracle_triangle() {
  std::mt19937_64 rng(107);
  double vac = 0.0, pic = 0.0, lam_max = 0.0;
  ComplexVector amp(1);
  amp(0) = 0.5;
  const PiecewiseCoherent vac1 = PiecewiseCoherent::vacuum(1);
  std::vector<GermModel> models{testing::amplitude_damping_germ()};
  while (models.size() < 4) {
    GermModel m = random_model(rng, 2, 1, 2, 0.4);
    if (op_norm(lindblad_superop(m).matrix) <= 1.0) models.push_back(m);
  }
  for (const GermModel& model : models) {
    lam_max = std::max(lam_max, op_norm(lindblad_superop(model).matrix));
    for (double t : {0.3, 0.5}) {
      const ReducedPropagator u = coherent_propagator(model, vac1, vac1, t);
      vac = std::max(vac, (u.map.matrix - evolve_semigroup(model, t).matrix).norm());
      const PiecewiseCoherent f = PiecewiseCoherent::constant(t, amp);
      const PicardResult p = picard_oracle(model, f, f, t);
      const ReducedPropagator c = coherent_propagator(model, f, f, t);
      pic = std::max(pic, (p.propagator.map.matrix - c.map.matrix).norm());
      const PicardResult pv = picard_oracle(model, vac1, vac1, t);
      pic = std::max(pic, (pv.propagator.map.matrix - u.map.matrix).norm());
    }
  }
  Outcome o;
  o.pass = vac <= kSemigroupTol && pic <= kPicardTol;
  o.detail = "vacuum " + fmt("%.2e", vac) + ", Picard " + fmt("%.2e", pic) + " over " +
             std::to_string(models.size()) + " models, max |lambda| " + fmt("%.2f", lam_max);
  return o;
}

TrajectoryConfig scalar_cfg(NoiseKind kind, double k, double l_or_j, std::uint64_t seed) {
  TrajectoryConfig cfg;
  cfg.kind = kind;
  cfg.K = ComplexMatrix::Constant(1, 1, k);
  cfg.L_or_J = ComplexMatrix::Constant(1, 1, l_or_j);
  cfg.n_traj = 10000;
  cfg.seed = seed;
  cfg.record_times = {0.5, 1.0};
  return cfg;
}

Outcome martingale() {
  const ComplexVector psi = ComplexVector::Ones(1);
  const EnsembleStats d = simulate(scalar_cfg(NoiseKind::kDiffusive, 0.5, 1.0, 2024), psi);
  const EnsembleStats j = simulate(scalar_cfg(NoiseKind::kJump, 0.5, 0.0, 2024), psi);
  const RecordStats& rd = d.records.back();
  const RecordStats& rj = j.records.back();
  const double zd = std::abs(rd.mean_norm2 - 1.0) / rd.stderr_norm2;
  const double zj = std::abs(rj.mean_norm2 - 1.0) / rj.stderr_norm2;
  const double zs = std::abs(rj.survival_frac - std::exp(-1.0)) / rj.stderr_survival;
  Outcome o;
  o.pass = zd <= kMartingaleSigmas && zj <= kMartingaleSigmas && zs <= kMartingaleSigmas &&
           d.aborted == 0 && j.aborted == 0;
  o.detail = "diffusive " + fmt("%.2f", zd) + " sigma, jump " + fmt("%.2f", zj) +
             " sigma, survival " + fmt("%.4f", rj.survival_frac) + " (" + fmt("%.2f", zs) +
             " sigma)";
  return o;
}

Outcome unraveling() {
  TrajectoryConfig cfg;
  const ComplexMatrix l = testing::sigma_minus();
  cfg.kind = NoiseKind::kDiffusive;
  cfg.K = 0.5 * l.adjoint() * l;
  cfg.L_or_J = l;
  cfg.n_traj = 10000;
  cfg.h = 1e-3;
  cfg.seed = 5;
  cfg.record_times = {0.5, 1.0};
  ComplexVector psi = ComplexVector::Zero(2);
  psi(1) = 1.0;
  const EnsembleStats st = simulate(cfg, psi);
  const SuperOperator dual = lindblad_dual(averaged_model(cfg));
  Outcome o;
  for (const RecordStats& r : st.records) {
    const ComplexMatrix oracle = unvec(expm(r.t * dual.matrix) * vec(psi * psi.adjoint()), 2);
    const double td = trace_distance(r.rho_mean, oracle);
    const double bound = std::max(3.0 * r.trace_sigma(), kTrajFloor);
    o.pass = o.pass && td <= bound;
    o.detail += (o.detail.empty() ? "" : ", ") + std::string("t=") + fmt("%.1f", r.t) + " " +
                fmt("%.4f", td) + " <= " + fmt("%.4f", bound);
  }
  return o;
}

Outcome kernels() {
  std::mt19937_64 rng(110);
  std::uniform_real_distribution<double> u(-0.5, 0.5);
  double worst = 1e300, worst_mono = 1e300;
  auto wiener_step = [&](double horizon) {
    return StepFunction(1, {0.0, 0.4 * horizon, horizon},
                        {wiener(Complex(u(rng), u(rng)), Complex(u(rng), u(rng))),
                         wiener(Complex(u(rng), u(rng)), Complex(u(rng), u(rng)))});
  };
  auto poisson_step = [&](double horizon) {
    return StepFunction::constant(horizon, poisson(Complex(u(rng), u(rng)), u(rng)));
  };
  for (int i = 0; i < 4; ++i) {
    const ComplexMatrix l = random_matrix(rng, 2, 2, 0.7);
    const ComplexMatrix h = testing::random_hermitian(rng, 2, 0.5);
    const ComplexMatrix extra = 0.3 * ComplexMatrix::Identity(2, 2);
    const ComplexMatrix k_filt = 0.5 * l.adjoint() * l + kI * h;
    for (bool sub : {false, true}) {
      const ComplexMatrix k = sub ? ComplexMatrix(k_filt + extra) : k_filt;
      const GermModel diff = to_germ_model(unified_coefficients(NoiseKind::kDiffusive, k, l));
      const std::vector<StepFunction> gs{StepFunction::zero(1), wiener_step(0.5),
                                         wiener_step(1.0), wiener_step(0.8)};
      const std::vector<double> later = sub ? std::vector<double>{1.3, 2.0} : std::vector<double>{};
      const KernelReport r = kernel_psd_check(diff, gs, {}, 1.0, later, kKernelTol);
      worst = std::min(worst, r.min_eig);
      for (const auto& e : r.monotonicity) worst_mono = std::min(worst_mono, e.min_eig);

      const ComplexMatrix j = l + ComplexMatrix::Identity(2, 2);
      const ComplexMatrix kj = 0.5 * l.adjoint() * l + kI * h + (sub ? extra : ComplexMatrix::Zero(2, 2));
      const GermModel jump = to_germ_model(unified_coefficients(NoiseKind::kJump, kj, j));
      const std::vector<StepFunction> ps{StepFunction::zero(1), poisson_step(0.6),
                                         poisson_step(1.0)};
      const KernelReport rj = kernel_psd_check(jump, ps, {}, 1.0, later, kKernelTol);
      worst = std::min(worst, rj.min_eig);
      for (const auto& e : rj.monotonicity) worst_mono = std::min(worst_mono, e.min_eig);
    }
  }
  Outcome o;
  o.pass = worst >= -kKernelTol && worst_mono >= -kKernelTol;
  o.detail = "kernel min eig " + fmt("%.2e", worst) + ", monotonicity min eig " +
             fmt("%.2e", worst_mono);
  return o;
}

std::string config(const std::string& body) { return "{\"schema_version\": 1, " + body + "}"; }

Outcome reproducibility() {
  const std::vector<std::pair<std::string, std::string>> runs{
      {"verify-algebra", config("\"samples\": 300, \"seed\": 3")},
      {"weyl-check", config("\"t\": 1.0, \"a\": {\"m\": 1, \"exchange\": [[0.5]], \"creation\": "
                            "[[1]], \"annihilation\": [[0.2]], \"time\": 0.1}, \"f\": {\"m\": 1}, "
                            "\"h\": {\"m\": 1}")},
      {"germ", config("\"model\": {\"dim\": 1, \"multiplicity\": 0, \"K\": [[0.5]], \"kraus\": "
                      "[{\"plus\": [[1]]}]}")},
      {"dilate", config("\"model\": {\"dim\": 1, \"multiplicity\": 0, \"K\": [[0.5]], \"kraus\": "
                        "[{\"plus\": [[1]]}]}")},
      {"semigroup", config("\"model\": {\"dim\": 1, \"multiplicity\": 0, \"K\": [[0.5]], "
                           "\"kraus\": [{\"plus\": [[1]]}]}, \"times\": [0, 1]")},
      {"genfun", config("\"model\": {\"dim\": 1, \"multiplicity\": 0, \"K\": [[0.5]], \"kraus\": "
                        "[{\"plus\": [[1]]}]}, \"t\": 1")},
      {"simulate", config("\"kind\": \"diffusive\", \"K\": [[0, 0], [0, 0.5]], \"L\": [[0, 1], "
                          "[0, 0]], \"psi0\": [0, 1], \"n_traj\": 3000, \"seed\": 17")},
      {"simulate", config("\"kind\": \"jump\", \"K\": [[0.5]], \"J\": [[0]], \"n_traj\": 3000, "
                          "\"seed\": 17")},
      {"crosscheck", config("\"trajectory\": {\"kind\": \"diffusive\", \"K\": [[0, 0], [0, 0.5]], "
                            "\"L\": [[0, 1], [0, 0]], \"psi0\": [0, 1], \"n_traj\": 2000, "
                            "\"seed\": 9}")},
  };
  int mismatches = 0;
  for (const auto& [cmd, text] : runs) {
    std::vector<commands::RunResult> results;
    for (unsigned threads : {1u, 1u, 2u, 4u}) {
      commands::RunOptions opts;
      opts.threads = threads;
      for (const char* format : {"json", "csv"}) {
        if (std::string(format) == "csv" && cmd != "simulate" && cmd != "semigroup") continue;
        opts.format = format;
        results.push_back(commands::run(cmd, text, opts));
      }
    }
    const std::size_t per = results.size() / 4;
    for (std::size_t i = per; i < results.size(); ++i) {
      const auto& a = results[i % per];
      const auto& b = results[i];
      if (a.document != b.document || a.manifest != b.manifest || a.exit_code != b.exit_code) {
        ++mismatches;
      }
    }
    if (results.front().exit_code == commands::kExitConfigError) ++mismatches;
  }
  Outcome o;
  o.pass = mismatches == 0;
  o.detail = std::to_string(runs.size()) + " commands x 2 runs x threads {1,2,4}: " +
             std::to_string(mismatches) + " mismatches";
  return o;
}

}  // namespace

int main() {
  const std::vector<Criterion> criteria{
      {1, "Ito star-algebra axioms and tables", 5.0, algebra},
      {2, "Weyl star-semigroup law", 5.0, weyl},
      {3, "CCP structure", 60.0, ccp},
      {4, "Canonical dilation round trip and gauge fix", 60.0, dilation},
      {5, "Unitarity conditions", 60.0, unitarity},
      {6, "Semigroup law and conservativity", 60.0, semigroup},
      {7, "Oracle triangle", 60.0, oracle_triangle},
      {8, "Martingale property", 60.0, martingale},
      {9, "Unraveling consistency", 300.0, unraveling},
      {10, "Generating-function kernels", 60.0, kernels},
      {11, "Reproducibility", 300.0, reproducibility},
  };
  int failed = 0;
  for (const Criterion& c : criteria) {
    const auto start = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = c.run();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    const double secs =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    const bool in_time = secs <= c.time_limit;
    const bool pass = o.pass && in_time;
    if (!pass) ++failed;
    std::printf("%s %2d %s: %s [%.2f s / %.0f s]\n", pass ? "PASS" : "FAIL", c.id, c.name,
                o.detail.c_str(), secs, c.time_limit);
    std::fflush(stdout);
  }
  std::printf("%d of %zu criteria passed\n", static_cast<int>(criteria.size()) - failed,
              criteria.size());
  return failed == 0 ? 0 : 1;
}
