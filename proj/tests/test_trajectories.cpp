#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "qsflow/error.hpp"
#include "qsflow/flows.hpp"
#include "qsflow/trajectories.hpp"
#include "test_support.hpp"

namespace qsf {
namespace {

using testing::max_abs;
using testing::random_matrix;
using testing::sigma_minus;

ComplexMatrix scalar(Complex z) {
  ComplexMatrix a(1, 1);
  a(0, 0) = z;
  return a;
}

ComplexVector unit(Eigen::Index d, Eigen::Index i) {
  ComplexVector v = ComplexVector::Zero(d);
  v(i) = 1.0;
  return v;
}

TrajectoryConfig scalar_config(NoiseKind kind, Complex k, Complex l_or_j, std::size_t n) {
  TrajectoryConfig cfg;
  cfg.kind = kind;
  cfg.K = scalar(k);
  cfg.L_or_J = scalar(l_or_j);
  cfg.t_max = 1.0;
  cfg.h = 1e-3;
  cfg.n_traj = n;
  cfg.seed = 7;
  cfg.record_times = {0.5, 1.0};
  return cfg;
}

TrajectoryConfig damping_config(std::size_t n) {
  TrajectoryConfig cfg;
  cfg.kind = NoiseKind::kDiffusive;
  const ComplexMatrix l = sigma_minus();
  cfg.K = 0.5 * l.adjoint() * l;
  cfg.L_or_J = l;
  cfg.n_traj = n;
  cfg.seed = 11;
  cfg.record_times = {0.5, 1.0};
  return cfg;
}

bool same_bits(const EnsembleStats& a, const EnsembleStats& b) {
  if (a.records.size() != b.records.size() || a.aborted != b.aborted) return false;
  for (std::size_t i = 0; i < a.records.size(); ++i) {
    const RecordStats& x = a.records[i];
    const RecordStats& y = b.records[i];
    if (x.mean_norm2 != y.mean_norm2 || x.stderr_norm2 != y.stderr_norm2) return false;
    if (x.rho_mean != y.rho_mean || x.rho_stderr_re != y.rho_stderr_re) return false;
    if (!(x.survival_frac == y.survival_frac ||
          (std::isnan(x.survival_frac) && std::isnan(y.survival_frac)))) {
      return false;
    }
  }
  return true;
}

TEST(Diffusive, NoiseFreeMatchesEulerProduct) {
  std::mt19937_64 rng(71);
  TrajectoryConfig cfg;
  cfg.kind = NoiseKind::kDiffusive;
  cfg.K = testing::random_hermitian(rng, 2, 0.8) + 0.5 * ComplexMatrix::Identity(2, 2);
  cfg.L_or_J = ComplexMatrix::Zero(2, 2);
  cfg.n_traj = 5;
  cfg.record_times = {0.25, 1.0};
  ComplexVector psi = random_matrix(rng, 2, 1).col(0);
  psi.normalize();
  const EnsembleStats st = simulate_diffusive(cfg, psi);
  const ComplexMatrix step = ComplexMatrix::Identity(2, 2) - cfg.h * cfg.K;
  ComplexVector x = psi;
  for (int n = 0; n < 1000; ++n) x = step * x;
  EXPECT_NEAR(st.records[1].mean_norm2, x.squaredNorm(), 1e-12);
  EXPECT_EQ(st.records[1].stderr_norm2, 0.0);
  EXPECT_NEAR(st.records[1].mean_norm2, (expm(-cfg.K) * psi).squaredNorm(), 2e-3);
  EXPECT_TRUE(std::isnan(st.records[1].survival_frac));
}

TEST(Diffusive, ScalarFilteringMartingale) {
  const TrajectoryConfig cfg = scalar_config(NoiseKind::kDiffusive, 0.5, 1.0, 10000);
  const EnsembleStats st = simulate(cfg, unit(1, 0));
  for (const RecordStats& r : st.records) {
    EXPECT_LE(std::abs(r.mean_norm2 - 1.0), 4.0 * r.stderr_norm2) << r.t;
  }
  const MartingaleReport rep = martingale_stats(st, classify(averaged_model(cfg)));
  EXPECT_EQ(rep.mode, "martingale");
  EXPECT_TRUE(rep.pass);
}

TEST(Diffusive, AmplitudeDampingMatchesMasterEquation) {
  const TrajectoryConfig cfg = damping_config(10000);
  const ComplexVector psi = unit(2, 1);
  const EnsembleStats st = simulate(cfg, psi);
  const SuperOperator gen = lindblad_dual(averaged_model(cfg));
  for (const RecordStats& r : st.records) {
    const ComplexMatrix oracle = unvec(expm(r.t * gen.matrix) * vec(psi * psi.adjoint()), 2);
    EXPECT_LE(trace_distance(r.rho_mean, oracle), std::max(3.0 * r.trace_sigma(), 0.02)) << r.t;
  }
}

TEST(Diffusive, StepTooLarge) {
  TrajectoryConfig cfg = scalar_config(NoiseKind::kDiffusive, 10.0, 0.0, 10);
  cfg.h = 0.1;
  try {
    simulate(cfg, unit(1, 0));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kStepTooLarge);
  }
  cfg.h = 0.02;
  const EnsembleStats st = simulate(cfg, unit(1, 0));
  ASSERT_FALSE(st.warnings.empty());
  EXPECT_NE(st.warnings[0].find("StepTooLarge"), std::string::npos);
}

TEST(Diffusive, BlowupIsAbortedAndReported) {
  TrajectoryConfig cfg = scalar_config(NoiseKind::kDiffusive, -20.0, 0.0, 8);
  const EnsembleStats st = simulate(cfg, unit(1, 0));
  EXPECT_EQ(st.aborted, 8u);
  EXPECT_EQ(st.records[0].count, 8u);
  EXPECT_EQ(st.records[1].count, 0u);
  EXPECT_FALSE(st.warnings.empty());
}

TEST(Diffusive, SnappingRule) {
  TrajectoryConfig cfg = scalar_config(NoiseKind::kDiffusive, 0.5, 1.0, 1);
  cfg.record_times = {0.0, 0.0015, 0.0016, 1.0};
  const auto steps = snapped_steps(cfg);
  EXPECT_EQ(steps, (std::vector<std::size_t>{0, 1, 2, 1000}));
}

TEST(Diffusive, WeakOrderOne) {
  // K = 1, L = 1: each Euler step multiplies E|psi|^2 by (1 - h)^2 + h,
  // so the bias at t = 1 is about e^{-1} h / 2.
  const double exact = std::exp(-1.0);
  double bias[2];
  for (int i = 0; i < 2; ++i) {
    const double h = i == 0 ? 0.02 : 0.01;
    const double mean = std::pow((1.0 - h) * (1.0 - h) + h, 1.0 / h);
    bias[i] = mean - exact;
  }
  EXPECT_NEAR(bias[0] / bias[1], 2.0, 0.05);
  TrajectoryConfig cfg = scalar_config(NoiseKind::kDiffusive, 1.0, 1.0, 100000);
  cfg.h = 0.02;
  cfg.record_times = {1.0};
  const EnsembleStats st = simulate(cfg, unit(1, 0));
  EXPECT_LE(std::abs(st.records[0].mean_norm2 - (exact + bias[0])),
            4.0 * st.records[0].stderr_norm2);
}

TEST(Jump, IdentityJumpIsDeterministic) {
  std::mt19937_64 rng(72);
  TrajectoryConfig cfg;
  cfg.kind = NoiseKind::kJump;
  cfg.K = testing::random_hermitian(rng, 2, 0.8) + ComplexMatrix::Identity(2, 2);
  cfg.L_or_J = ComplexMatrix::Identity(2, 2);
  cfg.n_traj = 20;
  cfg.record_times = {0.3, 1.0};
  const ComplexVector psi = unit(2, 0);
  const EnsembleStats st = simulate_jump(cfg, psi);
  for (const RecordStats& r : st.records) {
    EXPECT_NEAR(r.mean_norm2, (expm(-r.t * cfg.K) * psi).squaredNorm(), 1e-12);
  }
}

TEST(Jump, AbsorbingScalar) {
  const TrajectoryConfig cfg = scalar_config(NoiseKind::kJump, 0.5, 0.0, 10000);
  const EnsembleStats st = simulate(cfg, unit(1, 0));
  const RecordStats& r = st.records[1];
  EXPECT_LE(std::abs(r.mean_norm2 - 1.0), 4.0 * r.stderr_norm2);
  EXPECT_LE(std::abs(r.survival_frac - std::exp(-1.0)), 4.0 * r.stderr_survival);
  // Surviving paths carry norm^2 e^t exactly.
  EXPECT_NEAR(r.mean_norm2, r.survival_frac * std::exp(1.0), 1e-12);
}

TEST(Jump, IsometricJumpsMartingale) {
  TrajectoryConfig cfg;
  cfg.kind = NoiseKind::kJump;
  ComplexMatrix j(2, 2);
  j << 0.0, 1.0, 1.0, 0.0;
  const ComplexMatrix l = j - ComplexMatrix::Identity(2, 2);
  cfg.K = 0.5 * l.adjoint() * l;
  cfg.L_or_J = j;
  cfg.n_traj = 10000;
  cfg.record_times = {0.5, 1.0};
  cfg.seed = 3;
  ComplexVector psi(2);
  psi << 0.6, Complex(0.0, 0.8);
  const EnsembleStats st = simulate(cfg, psi);
  EXPECT_TRUE(martingale_stats(st, classify(averaged_model(cfg))).pass);
}

TEST(Jump, PoissonCountsChiSquare) {
  // Counts over [0,1] of rate-1 events from the trajectory clocks.
  std::vector<int> hist(6, 0);
  const int n = 20000;
  for (int i = 0; i < n; ++i) {
    TrajectoryRng rng(5, static_cast<std::uint64_t>(i));
    double t = rng.exponential();
    int c = 0;
    while (t < 1.0) {
      ++c;
      t += rng.exponential();
    }
    ++hist[static_cast<std::size_t>(std::min(c, 5))];
  }
  double chi2 = 0.0;
  double tail = 1.0;
  double fact = 1.0;
  for (int k = 0; k < 6; ++k) {
    double p;
    if (k < 5) {
      if (k > 0) fact *= k;
      p = std::exp(-1.0) / fact;
      tail -= p;
    } else {
      p = tail;
    }
    const double e = n * p;
    chi2 += (hist[static_cast<std::size_t>(k)] - e) * (hist[static_cast<std::size_t>(k)] - e) / e;
  }
  // chi-square with 5 degrees of freedom, p = 0.001 critical value.
  EXPECT_LT(chi2, 20.515);
}

TEST(Noise, GaussianMoments) {
  const int n = 200000;
  const double h = 1e-3;
  double s1 = 0.0, s2 = 0.0;
  TrajectoryRng rng(9, 0);
  for (int i = 0; i < n; ++i) {
    const double x = rng.gaussian(h);
    s1 += x;
    s2 += x * x;
  }
  EXPECT_LE(std::abs(s1 / n), 4.0 * std::sqrt(h / n));
  EXPECT_LE(std::abs(s2 / n - h), 4.0 * h * std::sqrt(2.0 / n));
}

TEST(Density, PureStateMatchesWave) {
  const TrajectoryConfig cfg = damping_config(200);
  ComplexVector psi(2);
  psi << std::sqrt(0.3), Complex(0.0, std::sqrt(0.7));
  const ComplexMatrix rho0 = psi * psi.adjoint();
  const EnsembleStats a = simulate(cfg, psi);
  const EnsembleStats b = evolve_density(cfg, rho0);
  for (std::size_t i = 0; i < a.records.size(); ++i) {
    EXPECT_LE(max_abs(a.records[i].rho_mean - b.records[i].rho_mean), 1e-12);
    EXPECT_NEAR(a.records[i].mean_norm2, b.records[i].mean_norm2, 1e-12);
    EXPECT_NEAR(b.records[i].mean_norm2, b.records[i].rho_mean.trace().real(), 1e-12);
  }
  for (std::uint64_t idx = 0; idx < 5; ++idx) {
    const PathResult pw = simulate_path(cfg, idx, psi);
    const PathResult pv = simulate_path(cfg, idx, ComplexMatrix::Identity(2, 2));
    ASSERT_EQ(pw.states.size(), pv.states.size());
    for (std::size_t i = 0; i < pw.states.size(); ++i) {
      const ComplexMatrix& x = pw.states[i];
      const ComplexMatrix& v = pv.states[i];
      EXPECT_LE(max_abs(x * x.adjoint() - v * rho0 * v.adjoint()), 1e-12);
    }
  }
}

TEST(Density, MixedStateMatchesMasterEquation) {
  const TrajectoryConfig cfg = damping_config(10000);
  const ComplexMatrix rho0 = 0.5 * ComplexMatrix::Identity(2, 2);
  const EnsembleStats st = evolve_density(cfg, rho0);
  const SuperOperator gen = lindblad_dual(averaged_model(cfg));
  for (const RecordStats& r : st.records) {
    const ComplexMatrix oracle = unvec(expm(r.t * gen.matrix) * vec(rho0), 2);
    EXPECT_LE(trace_distance(r.rho_mean, oracle), std::max(3.0 * r.trace_sigma(), 0.02));
  }
}

TEST(Density, RejectsNonState) {
  const TrajectoryConfig cfg = damping_config(10);
  EXPECT_THROW(evolve_density(cfg, ComplexMatrix::Identity(2, 2)), Error);
  ComplexMatrix bad = ComplexMatrix::Zero(2, 2);
  bad(0, 0) = 1.5;
  bad(1, 1) = -0.5;
  EXPECT_THROW(evolve_density(cfg, bad), Error);
}

TEST(Reproducibility, SeedsAndThreads) {
  TrajectoryConfig cfg = damping_config(1000);
  cfg.threads = 1;
  const EnsembleStats a = simulate(cfg, unit(2, 1));
  const EnsembleStats b = simulate(cfg, unit(2, 1));
  cfg.threads = 4;
  const EnsembleStats c = simulate(cfg, unit(2, 1));
  EXPECT_TRUE(same_bits(a, b));
  EXPECT_TRUE(same_bits(a, c));
  cfg.seed += 1;
  EXPECT_FALSE(same_bits(a, simulate(cfg, unit(2, 1))));

  TrajectoryConfig jc = scalar_config(NoiseKind::kJump, 0.5, 0.0, 700);
  jc.threads = 1;
  const EnsembleStats ja = simulate(jc, unit(1, 0));
  jc.threads = 3;
  EXPECT_TRUE(same_bits(ja, simulate(jc, unit(1, 0))));
}

TEST(Config, Validation) {
  TrajectoryConfig cfg = damping_config(10);
  cfg.record_times = {1.5};
  EXPECT_THROW(cfg.validate(), Error);
  cfg = damping_config(10);
  cfg.h = 0.0;
  EXPECT_THROW(cfg.validate(), Error);
  cfg = damping_config(0);
  EXPECT_THROW(cfg.validate(), Error);
  cfg = damping_config(10);
  cfg.L_or_J = ComplexMatrix::Zero(3, 3);
  EXPECT_THROW(cfg.validate(), Error);
}

TEST(Unified, Coefficients) {
  std::mt19937_64 rng(73);
  const ComplexMatrix k = random_matrix(rng, 2, 2);
  const ComplexMatrix l = random_matrix(rng, 2, 2);
  const ComplexMatrix id = ComplexMatrix::Identity(2, 2);

  const UnifiedCoefficients z = unified_coefficients(NoiseKind::kDiffusive, k, ComplexMatrix::Zero(2, 2));
  EXPECT_EQ(z.J, id);
  EXPECT_EQ(max_abs(z.L_plus), 0.0);
  EXPECT_EQ(max_abs(z.K_minus), 0.0);

  const UnifiedCoefficients d = unified_coefficients(NoiseKind::kDiffusive, k, l);
  EXPECT_EQ(d.J, id);
  EXPECT_EQ(d.L_plus, l);
  EXPECT_EQ(d.K_minus, -l);
  EXPECT_EQ(d.K, k);

  const UnifiedCoefficients j = unified_coefficients(NoiseKind::kJump, k, l);
  EXPECT_EQ(j.J, l);
  EXPECT_LE(max_abs(j.L_plus - kI * (l - id)), 0.0);
  EXPECT_LE(max_abs(j.K_minus - kI * (l - id)), 0.0);
}

TEST(Unified, GermReproducesLindblad) {
  std::mt19937_64 rng(74);
  for (NoiseKind kind : {NoiseKind::kDiffusive, NoiseKind::kJump}) {
    TrajectoryConfig cfg;
    cfg.kind = kind;
    cfg.K = random_matrix(rng, 3, 3);
    cfg.L_or_J = random_matrix(rng, 3, 3);
    const GermModel germ = to_germ_model(unified_coefficients(kind, cfg.K, cfg.L_or_J));
    EXPECT_EQ(germ.multiplicity(), 1);
    EXPECT_LE((lindblad_superop(germ).matrix - lindblad_superop(averaged_model(cfg)).matrix).norm(),
              1e-12);
  }
}

TEST(Martingale, Modes) {
  TrajectoryConfig det = scalar_config(NoiseKind::kDiffusive, 0.4, 0.0, 10);
  det.record_times = {0.25, 0.5, 1.0};
  const EnsembleStats sd = simulate(det, unit(1, 0));
  const MartingaleReport r = martingale_stats(sd, classify(averaged_model(det)));
  EXPECT_EQ(r.mode, "nonincreasing");
  EXPECT_TRUE(r.pass);
  EXPECT_GT(sd.records[0].mean_norm2, sd.records[2].mean_norm2);

  const TrajectoryConfig grow = scalar_config(NoiseKind::kDiffusive, 0.0, 1.0, 1000);
  const EnsembleStats sg = simulate(grow, unit(1, 0));
  const MartingaleReport rg = martingale_stats(sg, classify(averaged_model(grow)));
  EXPECT_FALSE(rg.pass);

  TrajectoryConfig one = det;
  one.record_times = {1.0};
  try {
    martingale_stats(simulate(one, unit(1, 0)), classify(averaged_model(one)));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kInsufficientData);
  }
}

}  // namespace
}  // namespace qsf
