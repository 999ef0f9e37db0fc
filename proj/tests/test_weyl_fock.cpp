#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "qsflow/error.hpp"
#include "qsflow/weyl_fock.hpp"
#include "test_support.hpp"

namespace qsf {
namespace {

using testing::random_coherent;
using testing::random_quadruple;

ComplexVector v1(Complex z) {
  ComplexVector v(1);
  v(0) = z;
  return v;
}

TEST(CoherentInner, Examples) {
  const PiecewiseCoherent vac = PiecewiseCoherent::vacuum(1);
  const PiecewiseCoherent f = PiecewiseCoherent::constant(1.0, v1(1.0));
  EXPECT_EQ(coherent_inner(vac, vac), Complex(1.0));
  EXPECT_EQ(coherent_inner(f, vac), Complex(1.0));
  EXPECT_NEAR(std::abs(coherent_inner(f, f) - std::exp(1.0)), 0.0, 1e-15);
}

TEST(CoherentInner, PiecewiseIntegral) {
  // u = 1 on [0,1), 2i on [1,3); v = 0.5 on [0,2)
  const PiecewiseCoherent u(1, {0.0, 1.0, 3.0}, {v1(1.0), v1(2.0 * kI)}, Complex(0.0, 2.0));
  const PiecewiseCoherent v = PiecewiseCoherent::constant(2.0, v1(0.5), 3.0);
  // integral conj(u) v = 0.5 + (-2i)(0.5)(1) = 0.5 - i
  const Complex want = std::conj(Complex(0.0, 2.0)) * 3.0 * std::exp(Complex(0.5, -1.0));
  EXPECT_NEAR(std::abs(coherent_inner(u, v) - want), 0.0, 1e-14);
  EXPECT_NEAR(std::abs(overlap_exponent(u, v, 0.5, 1.5) - Complex(0.25, -0.5)), 0.0,
              1e-15);
}

TEST(CoherentInner, Hermitian) {
  std::mt19937_64 rng(21);
  for (int i = 0; i < 50; ++i) {
    const PiecewiseCoherent u = random_coherent(rng, 2);
    const PiecewiseCoherent v = random_coherent(rng, 2);
    EXPECT_EQ(coherent_inner(u, v), std::conj(coherent_inner(v, u)));
  }
}

TEST(CoherentInner, GramIsPsd) {
  std::mt19937_64 rng(22);
  for (int trial = 0; trial < 20; ++trial) {
    std::vector<PiecewiseCoherent> family;
    for (int k = 0; k < 6; ++k) family.push_back(random_coherent(rng, 2, 3, 0.7).unit());
    EXPECT_GE(min_eig_hermitian(coherent_gram(family)), -1e-10);
  }
}

TEST(CoherentInner, MultiplicityMismatch) {
  EXPECT_THROW(coherent_inner(PiecewiseCoherent::vacuum(1), PiecewiseCoherent::vacuum(2)), Error);
}

TEST(PiecewiseCoherent, ShiftAndTruncate) {
  const PiecewiseCoherent u(1, {0.0, 1.0, 3.0}, {v1(1.0), v1(2.0)});
  const PiecewiseCoherent s = u.shifted(0.5);
  EXPECT_EQ(s.at(0.2)(0), Complex(1.0));
  EXPECT_EQ(s.at(0.6)(0), Complex(2.0));
  EXPECT_EQ(s.at(2.6)(0), Complex(0.0));
  const PiecewiseCoherent tr = u.truncated(2.0);
  EXPECT_DOUBLE_EQ(tr.horizon(), 2.0);
  EXPECT_EQ(tr.at(1.5)(0), Complex(2.0));
  EXPECT_EQ(tr.at(2.5)(0), Complex(0.0));
}

TEST(WeylApply, Examples) {
  std::mt19937_64 rng(23);
  const PiecewiseCoherent f = random_coherent(rng, 1);
  const PiecewiseCoherent w0 = weyl_apply(0.7, ItoQuadruple(1), f);
  for (double s : {0.1, 0.5, 0.8, 1.5, 3.0}) EXPECT_EQ(w0.at(s), f.at(s));
  EXPECT_EQ(w0.prefactor(), f.prefactor());

  const double t = 0.9;
  const PiecewiseCoherent vac = PiecewiseCoherent::vacuum(1);
  const PiecewiseCoherent wd = weyl_apply(t, newton(1.0), vac);
  EXPECT_NEAR(std::abs(wd.prefactor() - std::exp(t)), 0.0, 1e-15);
  EXPECT_EQ(wd.at(0.5)(0), Complex(0.0));

  const PiecewiseCoherent ww = weyl_apply(1.0, wiener(0.0, 1.0), vac);
  EXPECT_EQ(ww.prefactor(), Complex(1.0));
  EXPECT_EQ(ww.at(0.5)(0), Complex(1.0));
  EXPECT_EQ(ww.at(1.0)(0), Complex(0.0));
}

TEST(WeylApply, AmplitudeAndPrefactor) {
  // f = 2 on [0, 2); a = (e, c, n, tau) applied up to t = 1.5
  const Complex e = 0.5, c = Complex(0.0, 1.0), n = 0.25, tau = Complex(0.1, 0.2);
  ComplexMatrix ex(1, 1), cr(1, 1), an(1, 1);
  ex << e;
  cr << c;
  an << n;
  const ItoQuadruple a(ex, cr, an, tau);
  const PiecewiseCoherent f = PiecewiseCoherent::constant(2.0, v1(2.0));
  const PiecewiseCoherent w = weyl_apply(1.5, a, f);
  EXPECT_NEAR(std::abs(w.at(1.0)(0) - ((1.0 + e) * 2.0 + c)), 0.0, 1e-15);
  EXPECT_EQ(w.at(1.7)(0), Complex(2.0));
  EXPECT_NEAR(std::abs(w.prefactor() - std::exp(1.5 * (n * 2.0 + tau))), 0.0, 1e-14);
}

TEST(WeylApply, Adapted) {
  std::mt19937_64 rng(24);
  for (int i = 0; i < 20; ++i) {
    const PiecewiseCoherent f = random_coherent(rng, 2);
    const PiecewiseCoherent w = weyl_apply(0.6, random_quadruple(rng, 2), f);
    for (double s : {0.6, 0.9, 1.3, 2.0}) EXPECT_EQ(w.at(s), f.at(s));
  }
}

TEST(WeylApply, StepFunctionIsOrderedProduct) {
  std::mt19937_64 rng(25);
  const ItoQuadruple a = random_quadruple(rng, 1, 0.5);
  const ItoQuadruple b = random_quadruple(rng, 1, 0.5);
  const StepFunction g(1, {0.0, 0.4, 1.0}, {a, b});
  const PiecewiseCoherent f = random_coherent(rng, 1);
  const PiecewiseCoherent lhs = weyl_apply(1.0, g, f);
  EXPECT_NEAR(std::abs(lhs.at(0.2)(0) - ((1.0 + a.exchange()(0, 0)) * f.at(0.2)(0) +
                                         a.creation()(0, 0))),
              0.0, 1e-14);
  EXPECT_NEAR(std::abs(lhs.at(0.7)(0) - ((1.0 + b.exchange()(0, 0)) * f.at(0.7)(0) +
                                         b.creation()(0, 0))),
              0.0, 1e-14);
}

TEST(WeylSemigroup, Examples) {
  std::mt19937_64 rng(26);
  const PiecewiseCoherent f = random_coherent(rng, 1);
  const PiecewiseCoherent h = random_coherent(rng, 1);
  EXPECT_EQ(weyl_semigroup_check(1.0, ItoQuadruple(1), f, h), 0.0);
  EXPECT_LE(weyl_semigroup_check(1.3, newton(Complex(0.2, 0.7)), f, h), 1e-13);
  const PiecewiseCoherent vac = PiecewiseCoherent::vacuum(1);
  EXPECT_LE(weyl_semigroup_check(1.0, poisson(0.0, 1.0), vac, vac), 1e-10);
}

TEST(WeylSemigroup, PoissonVacuumClosedForm) {
  // W(1,p) vac has amplitude i on [0,1) and prefactor 1, so its squared
  // norm is e. p * p = 3p + newton(1) gives the same through the vacuum.
  const PiecewiseCoherent vac = PiecewiseCoherent::vacuum(1);
  const PiecewiseCoherent w = weyl_apply(1.0, poisson(0.0, 1.0), vac);
  EXPECT_NEAR(std::abs(coherent_inner(w, w) - std::exp(1.0)), 0.0, 1e-14);
  const PiecewiseCoherent ws = weyl_apply(1.0, star_product(poisson(0.0, 1.0), poisson(0.0, 1.0)),
                                          vac);
  EXPECT_NEAR(std::abs(coherent_inner(vac, ws) - std::exp(1.0)), 0.0, 1e-14);
}

TEST(WeylSemigroup, RandomDraws) {
  std::mt19937_64 rng(27);
  std::uniform_real_distribution<double> ut(0.0, 2.0);
  for (int i = 0; i < 200; ++i) {
    const Eigen::Index m = 1 + i % 2;
    const ItoQuadruple a = (1.0 / static_cast<double>(m)) * random_quadruple(rng, m);
    const ItoQuadruple b = (1.0 / static_cast<double>(m)) * random_quadruple(rng, m);
    const PiecewiseCoherent f = random_coherent(rng, m);
    const PiecewiseCoherent h = random_coherent(rng, m);
    const double t = ut(rng);
    EXPECT_LE(weyl_semigroup_check(t, a, f, h), 1e-10);
    EXPECT_LE(weyl_semigroup_check(t, a, b, f, h), 1e-10);
  }
}

}  // namespace
}  // namespace qsf
