#include "qsflow/trajectories.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <limits>
#include <thread>

#include "qsflow/error.hpp"

namespace qsf {

namespace {

constexpr std::size_t kBlockSize = 256;

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

/// Running mean and sum of squared deviations for a fixed-length vector.
struct Moments {
  double n = 0.0;
  Eigen::VectorXd mean;
  Eigen::VectorXd m2;

  explicit Moments(Eigen::Index size = 0)
      : mean(Eigen::VectorXd::Zero(size)), m2(Eigen::VectorXd::Zero(size)) {}

  void add(const Eigen::VectorXd& x) {
    n += 1.0;
    const Eigen::VectorXd delta = x - mean;
    mean += delta / n;
    m2 += delta.cwiseProduct(x - mean);
  }

  void merge(const Moments& o) {
    if (o.n == 0.0) return;
    if (n == 0.0) {
      *this = o;
      return;
    }
    const double total = n + o.n;
    const Eigen::VectorXd delta = o.mean - mean;
    mean += delta * (o.n / total);
    m2 += o.m2 + delta.cwiseProduct(delta) * (n * o.n / total);
    n = total;
  }

  Eigen::VectorXd stderr_vec() const {
    if (n < 2.0) return Eigen::VectorXd::Zero(mean.size());
    return (m2 / ((n - 1.0) * n)).cwiseSqrt();
  }
};

struct BlockResult {
  std::vector<Moments> moments;
  std::size_t aborted = 0;
};

enum class Mode { kWave, kDensity };

Eigen::VectorXd observation(const ComplexMatrix& x, Mode mode, const ComplexMatrix& rho0,
                            std::size_t jumps) {
  const Eigen::Index d = x.rows();
  const ComplexMatrix rho =
      mode == Mode::kWave ? ComplexMatrix(x * x.adjoint()) : ComplexMatrix(x * rho0 * x.adjoint());
  Eigen::VectorXd v(2 + 2 * d * d);
  v(0) = rho.trace().real();
  v(1) = jumps == 0 ? 1.0 : 0.0;
  for (Eigen::Index j = 0; j < d; ++j) {
    for (Eigen::Index i = 0; i < d; ++i) {
      v(2 + i * d + j) = rho(i, j).real();
      v(2 + d * d + i * d + j) = rho(i, j).imag();
    }
  }
  return v;
}

std::vector<double> record_times_of(const TrajectoryConfig& cfg) {
  if (cfg.kind == NoiseKind::kJump) return cfg.record_times;
  std::vector<double> out;
  for (std::size_t s : snapped_steps(cfg)) out.push_back(static_cast<double>(s) * cfg.h);
  return out;
}

EnsembleStats run_ensemble(const TrajectoryConfig& cfg, const ComplexMatrix& x0, Mode mode,
                           const ComplexMatrix& rho0) {
  cfg.validate();
  EnsembleStats stats;
  stats.n_traj = cfg.n_traj;
  if (cfg.kind == NoiseKind::kDiffusive) {
    const double hk = cfg.h * cfg.K.norm();
    if (hk > 0.5) {
      fail(ErrorCode::kStepTooLarge,
           "h * |K| = " + std::to_string(hk) + " exceeds 0.5; reduce the step");
    }
    if (hk > 0.1) {
      stats.warnings.push_back("StepTooLarge: h * |K| = " + std::to_string(hk) + " exceeds 0.1");
    }
  }

  const Eigen::Index d = cfg.dim();
  const std::size_t n_rec = cfg.record_times.size();
  const Eigen::Index width = 2 + 2 * d * d;
  const std::size_t n_blocks = (cfg.n_traj + kBlockSize - 1) / kBlockSize;
  std::vector<BlockResult> blocks(n_blocks);

  auto run_block = [&](std::size_t b) {
    BlockResult res;
    res.moments.assign(n_rec, Moments(width));
    const std::size_t begin = b * kBlockSize;
    const std::size_t end = std::min(cfg.n_traj, begin + kBlockSize);
    for (std::size_t idx = begin; idx < end; ++idx) {
      const PathResult path = simulate_path(cfg, idx, x0);
      if (path.aborted) ++res.aborted;
      for (std::size_t r = 0; r < path.valid; ++r) {
        res.moments[r].add(observation(path.states[r], mode, rho0, path.jumps[r]));
      }
    }
    blocks[b] = std::move(res);
  };

  unsigned threads = cfg.threads == 0 ? std::max(1u, std::thread::hardware_concurrency())
                                      : cfg.threads;
  threads = static_cast<unsigned>(std::min<std::size_t>(threads, std::max<std::size_t>(1, n_blocks)));
  if (threads <= 1) {
    for (std::size_t b = 0; b < n_blocks; ++b) run_block(b);
  } else {
    std::atomic<std::size_t> next{0};
    std::vector<std::thread> pool;
    std::vector<std::exception_ptr> errors(threads);
    for (unsigned w = 0; w < threads; ++w) {
      pool.emplace_back([&, w] {
        try {
          for (std::size_t b = next++; b < n_blocks; b = next++) run_block(b);
        } catch (...) {
          errors[w] = std::current_exception();
        }
      });
    }
    for (auto& th : pool) th.join();
    for (auto& e : errors) {
      if (e) std::rethrow_exception(e);
    }
  }

  // Merge in block order so the result does not depend on the schedule.
  std::vector<Moments> total(n_rec, Moments(width));
  for (const auto& blk : blocks) {
    stats.aborted += blk.aborted;
    for (std::size_t r = 0; r < n_rec; ++r) total[r].merge(blk.moments[r]);
  }
  if (stats.aborted > 0) {
    stats.warnings.push_back(std::to_string(stats.aborted) +
                             " trajectories aborted after |psi| exceeded 1e8");
  }

  const std::vector<double> times = record_times_of(cfg);
  const double nan = std::numeric_limits<double>::quiet_NaN();
  for (std::size_t r = 0; r < n_rec; ++r) {
    const Moments& mo = total[r];
    const Eigen::VectorXd se = mo.stderr_vec();
    RecordStats rs;
    rs.t = times[r];
    rs.count = static_cast<std::size_t>(mo.n);
    rs.mean_norm2 = mo.mean(0);
    rs.stderr_norm2 = se(0);
    rs.survival_frac = cfg.kind == NoiseKind::kJump ? mo.mean(1) : nan;
    rs.stderr_survival = cfg.kind == NoiseKind::kJump ? se(1) : nan;
    rs.rho_mean = ComplexMatrix(d, d);
    rs.rho_stderr_re = Eigen::MatrixXd(d, d);
    rs.rho_stderr_im = Eigen::MatrixXd(d, d);
    for (Eigen::Index j = 0; j < d; ++j) {
      for (Eigen::Index i = 0; i < d; ++i) {
        const Eigen::Index re = 2 + i * d + j;
        const Eigen::Index im = 2 + d * d + i * d + j;
        rs.rho_mean(i, j) = Complex(mo.mean(re), mo.mean(im));
        rs.rho_stderr_re(i, j) = se(re);
        rs.rho_stderr_im(i, j) = se(im);
      }
    }
    stats.records.push_back(std::move(rs));
  }
  return stats;
}

}  // namespace

const char* to_string(NoiseKind kind) {
  return kind == NoiseKind::kDiffusive ? "diffusive" : "jump";
}

ComplexMatrix TrajectoryConfig::noise_operator() const {
  if (kind == NoiseKind::kDiffusive) return L_or_J;
  return L_or_J - ComplexMatrix::Identity(L_or_J.rows(), L_or_J.cols());
}

void TrajectoryConfig::validate() const {
  const Eigen::Index d = K.rows();
  if (d < 1 || K.cols() != d || L_or_J.rows() != d || L_or_J.cols() != d) {
    fail(ErrorCode::kDimensionMismatch, "trajectory K and L/J must be square of one size");
  }
  if (!all_finite(K) || !all_finite(L_or_J)) {
    fail(ErrorCode::kInvalidArgument, "trajectory coefficients must be finite");
  }
  if (!(t_max > 0.0) || !std::isfinite(t_max)) {
    fail(ErrorCode::kInvalidArgument, "t_max must be positive");
  }
  if (!(h > 0.0) || !std::isfinite(h)) fail(ErrorCode::kInvalidArgument, "h must be positive");
  if (n_traj == 0) fail(ErrorCode::kInvalidArgument, "n_traj must be positive");
  double prev = -1.0;
  for (double t : record_times) {
    if (!(t >= 0.0) || t > t_max) {
      fail(ErrorCode::kInvalidArgument, "record times must lie in [0, t_max]");
    }
    if (t < prev) fail(ErrorCode::kInvalidArgument, "record times must be sorted");
    prev = t;
  }
}

TrajectoryRng::TrajectoryRng(std::uint64_t seed, std::uint64_t index)
    : engine_(splitmix64(seed) ^ splitmix64(~index)) {}

double TrajectoryRng::gaussian(double variance) { return std::sqrt(variance) * normal_(engine_); }

double TrajectoryRng::exponential() { return exp_(engine_); }

double RecordStats::trace_sigma() const {
  return std::sqrt(rho_stderr_re.squaredNorm() + rho_stderr_im.squaredNorm());
}

std::vector<std::size_t> snapped_steps(const TrajectoryConfig& cfg) {
  const auto n_steps = static_cast<std::size_t>(std::ceil(cfg.t_max / cfg.h - 1e-9));
  std::vector<std::size_t> out;
  out.reserve(cfg.record_times.size());
  for (double t : cfg.record_times) {
    const double x = std::ceil(t / cfg.h - 0.5);
    out.push_back(std::min(n_steps, static_cast<std::size_t>(std::max(0.0, x))));
  }
  return out;
}

PathResult simulate_path(const TrajectoryConfig& cfg, std::uint64_t index,
                         const ComplexMatrix& x0) {
  const Eigen::Index d = cfg.dim();
  if (x0.rows() != d) fail(ErrorCode::kDimensionMismatch, "initial state has wrong dimension");
  TrajectoryRng rng(cfg.seed, index);
  PathResult out;
  const std::size_t n_rec = cfg.record_times.size();
  out.states.reserve(n_rec);
  out.jumps.reserve(n_rec);
  ComplexMatrix x = x0;

  if (cfg.kind == NoiseKind::kDiffusive) {
    const std::vector<std::size_t> rec = snapped_steps(cfg);
    const std::size_t n_steps = rec.empty() ? 0 : *std::max_element(rec.begin(), rec.end());
    const ComplexMatrix drift = ComplexMatrix::Identity(d, d) - cfg.h * cfg.K;
    const ComplexMatrix& l = cfg.L_or_J;
    ComplexMatrix a(x.rows(), x.cols());
    ComplexMatrix b(x.rows(), x.cols());
    std::size_t r = 0;
    for (std::size_t n = 0;; ++n) {
      while (r < n_rec && rec[r] == n) {
        out.states.push_back(x);
        out.jumps.push_back(0);
        ++r;
      }
      if (n >= n_steps) break;
      const double dq = rng.gaussian(cfg.h);
      a.noalias() = drift * x;
      b.noalias() = l * x;
      x = a + dq * b;
      if (!(x.norm() <= kBlowupNorm)) {
        out.aborted = true;
        break;
      }
    }
    out.valid = out.states.size();
    return out;
  }

  const ComplexMatrix gen = -(cfg.K + cfg.noise_operator());
  const ComplexMatrix& jump = cfg.L_or_J;
  double now = 0.0;
  double next_event = rng.exponential();
  std::size_t jumps = 0;
  auto drift_to = [&](double target) {
    if (target > now) x = (expm((target - now) * gen) * x).eval();
    now = target;
  };
  for (double t_rec : cfg.record_times) {
    while (next_event <= t_rec) {
      drift_to(next_event);
      x = (jump * x).eval();
      ++jumps;
      next_event += rng.exponential();
      if (!(x.norm() <= kBlowupNorm)) break;
    }
    if (!(x.norm() <= kBlowupNorm)) {
      out.aborted = true;
      break;
    }
    drift_to(t_rec);
    if (!(x.norm() <= kBlowupNorm)) {
      out.aborted = true;
      break;
    }
    out.states.push_back(x);
    out.jumps.push_back(jumps);
  }
  out.valid = out.states.size();
  return out;
}

EnsembleStats simulate(const TrajectoryConfig& cfg, const ComplexVector& psi0) {
  if (std::abs(psi0.norm() - 1.0) > 1e-10) {
    fail(ErrorCode::kInvalidArgument, "initial wave function must be normalized");
  }
  return run_ensemble(cfg, psi0, Mode::kWave, ComplexMatrix());
}

EnsembleStats simulate_diffusive(const TrajectoryConfig& cfg, const ComplexVector& psi0) {
  if (cfg.kind != NoiseKind::kDiffusive) {
    fail(ErrorCode::kInvalidArgument, "simulate_diffusive needs a diffusive config");
  }
  return simulate(cfg, psi0);
}

EnsembleStats simulate_jump(const TrajectoryConfig& cfg, const ComplexVector& psi0) {
  if (cfg.kind != NoiseKind::kJump) {
    fail(ErrorCode::kInvalidArgument, "simulate_jump needs a jump config");
  }
  return simulate(cfg, psi0);
}

EnsembleStats evolve_density(const TrajectoryConfig& cfg, const ComplexMatrix& rho0) {
  const Eigen::Index d = cfg.dim();
  if (rho0.rows() != d || rho0.cols() != d) {
    fail(ErrorCode::kDimensionMismatch, "rho0 has the wrong size");
  }
  if (min_eig_hermitian(rho0) < -1e-12) fail(ErrorCode::kNotPSD, "rho0 is not PSD");
  if (std::abs(rho0.trace() - Complex(1.0)) > 1e-10) {
    fail(ErrorCode::kInvalidArgument, "rho0 must have unit trace");
  }
  return run_ensemble(cfg, ComplexMatrix::Identity(d, d), Mode::kDensity, rho0);
}

UnifiedCoefficients unified_coefficients(NoiseKind kind, const ComplexMatrix& k,
                                         const ComplexMatrix& l_or_j) {
  require_square(k, "K");
  if (l_or_j.rows() != k.rows() || l_or_j.cols() != k.cols()) {
    fail(ErrorCode::kDimensionMismatch, "L/J must match K");
  }
  const ComplexMatrix id = ComplexMatrix::Identity(k.rows(), k.cols());
  UnifiedCoefficients c;
  c.K = k;
  if (kind == NoiseKind::kDiffusive) {
    c.J = id;
    c.L_plus = l_or_j;
    c.K_minus = -l_or_j;
  } else {
    const ComplexMatrix l = l_or_j - id;
    c.J = l_or_j;
    c.L_plus = kI * l;
    c.K_minus = kI * l;
  }
  return c;
}

GermModel to_germ_model(const UnifiedCoefficients& c) {
  return {c.K.rows(), 1, c.K, {c.K_minus}, {KrausTerm{c.L_plus, {c.J}}}};
}

GermModel averaged_model(const TrajectoryConfig& cfg) {
  return {cfg.dim(), 0, cfg.K, {}, {KrausTerm{cfg.noise_operator(), {}}}};
}

MartingaleReport martingale_stats(const EnsembleStats& stats, const DissipativityReport& cls) {
  if (stats.records.size() < 2) {
    fail(ErrorCode::kInsufficientData, "martingale_stats needs at least two record times");
  }
  MartingaleReport rep;
  if (cls.cls == DissipativityClass::kFiltering) {
    rep.mode = "martingale";
    rep.pass = true;
    for (const auto& r : stats.records) {
      MartingaleEntry e{r.t, std::abs(r.mean_norm2 - 1.0), 4.0 * r.stderr_norm2, false};
      // Allow for rounding when the standard error vanishes.
      e.pass = e.deviation <= e.bound + 1e-12;
      rep.pass = rep.pass && e.pass;
      rep.entries.push_back(e);
    }
  } else if (cls.cls == DissipativityClass::kSubfiltering) {
    rep.mode = "nonincreasing";
    rep.pass = true;
    for (std::size_t i = 1; i < stats.records.size(); ++i) {
      const RecordStats& a = stats.records[i - 1];
      const RecordStats& b = stats.records[i];
      const double se = std::hypot(a.stderr_norm2, b.stderr_norm2);
      MartingaleEntry e{b.t, b.mean_norm2 - a.mean_norm2, 4.0 * se, false};
      e.pass = e.deviation <= e.bound + 1e-12;
      rep.pass = rep.pass && e.pass;
      rep.entries.push_back(e);
    }
  } else {
    rep.mode = "unsupported";
    rep.pass = false;
  }
  if (stats.aborted > 0) rep.pass = false;
  return rep;
}

}  // namespace qsf
