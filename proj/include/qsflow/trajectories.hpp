#pragma once

#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "qsflow/generators.hpp"
#include "qsflow/matrix_core.hpp"

namespace qsf {

enum class NoiseKind { kDiffusive, kJump };

const char* to_string(NoiseKind kind);

/// Linear filtering equation dV + K V dt = L V dQ (diffusive) or
/// dV + K V dt = L V dP with L = J - I (jump).
struct TrajectoryConfig {
  NoiseKind kind = NoiseKind::kDiffusive;
  ComplexMatrix K;
  /// L for the diffusive equation, J for the jump equation.
  ComplexMatrix L_or_J;
  double t_max = 1.0;
  /// Euler-Maruyama step (diffusive only; the jump scheme is exact).
  double h = 1e-3;
  std::size_t n_traj = 10000;
  std::uint64_t seed = 0;
  std::vector<double> record_times;
  /// Worker threads; 0 uses the hardware concurrency.
  unsigned threads = 0;

  Eigen::Index dim() const { return K.rows(); }
  /// L for both kinds (J - I for jumps).
  ComplexMatrix noise_operator() const;
  void validate() const;
};

/// Per-trajectory random stream: std::mt19937_64 seeded with
/// splitmix64(seed) ^ splitmix64(index), libstdc++ distributions.
class TrajectoryRng {
 public:
  static constexpr const char* kName = "mt19937_64/splitmix64(seed,index)";

  TrajectoryRng(std::uint64_t seed, std::uint64_t index);

  /// Normal(0, variance).
  double gaussian(double variance);
  /// Exponential(1) waiting time.
  double exponential();

 private:
  std::mt19937_64 engine_;
  std::normal_distribution<double> normal_{0.0, 1.0};
  std::exponential_distribution<double> exp_{1.0};
};

struct RecordStats {
  double t = 0.0;  ///< actual recorded time (snapped for the diffusive scheme)
  std::size_t count = 0;
  double mean_norm2 = 0.0;
  double stderr_norm2 = 0.0;
  /// Fraction of paths without jumps; NaN for the diffusive scheme.
  double survival_frac = 0.0;
  double stderr_survival = 0.0;
  ComplexMatrix rho_mean;
  /// Per-entry standard errors, real and imaginary parts separately.
  Eigen::MatrixXd rho_stderr_re;
  Eigen::MatrixXd rho_stderr_im;

  /// Frobenius norm of the per-entry standard errors.
  double trace_sigma() const;
};

struct EnsembleStats {
  std::vector<RecordStats> records;
  std::size_t n_traj = 0;
  std::size_t aborted = 0;
  std::vector<std::string> warnings;
};

/// Result of one path: propagated state X (d x c) at each record time,
/// jump counts, and whether the path was aborted.
struct PathResult {
  std::vector<ComplexMatrix> states;
  std::vector<std::size_t> jumps;
  /// Number of record times reached before an abort (all if not aborted).
  std::size_t valid = 0;
  bool aborted = false;
};

/// Largest |psi| before a path is aborted.
inline constexpr double kBlowupNorm = 1e8;

/// Diffusive record times snapped to the step grid (nearest grid point,
/// ties toward the earlier one), as step indices.
std::vector<std::size_t> snapped_steps(const TrajectoryConfig& cfg);

/// Propagates X0 along trajectory `index`.
PathResult simulate_path(const TrajectoryConfig& cfg, std::uint64_t index,
                         const ComplexMatrix& x0);

/// Wave-function ensemble started from psi0: statistics of |psi_t|^2 and
/// of the unnormalized density psi_t psi_t^*.
EnsembleStats simulate(const TrajectoryConfig& cfg, const ComplexVector& psi0);
EnsembleStats simulate_diffusive(const TrajectoryConfig& cfg, const ComplexVector& psi0);
EnsembleStats simulate_jump(const TrajectoryConfig& cfg, const ComplexVector& psi0);

/// Density ensemble rho_t = V_t rho0 V_t^* on the same noise paths;
/// mean_norm2 is then the mean trace.
EnsembleStats evolve_density(const TrajectoryConfig& cfg, const ComplexMatrix& rho0);

/// Quantum coefficients of the unified equation for one unraveling.
struct UnifiedCoefficients {
  ComplexMatrix K;
  ComplexMatrix K_minus;
  ComplexMatrix L_plus;
  ComplexMatrix J;
};

UnifiedCoefficients unified_coefficients(NoiseKind kind, const ComplexMatrix& k,
                                         const ComplexMatrix& l_or_j);

/// Single-noise germ model: K_list = {K^-}, one Kraus term {L_+, J}.
GermModel to_germ_model(const UnifiedCoefficients& c);

/// Germ model of the averaged dynamics: m = 0, one Kraus term L.
GermModel averaged_model(const TrajectoryConfig& cfg);

struct MartingaleEntry {
  double t = 0.0;
  double deviation = 0.0;  ///< |mean - 1| or increase over previous time
  double bound = 0.0;      ///< 4 standard errors
  bool pass = false;
};

struct MartingaleReport {
  std::string mode;  ///< "martingale", "nonincreasing" or "unsupported"
  std::vector<MartingaleEntry> entries;
  bool pass = false;
};

MartingaleReport martingale_stats(const EnsembleStats& stats, const DissipativityReport& cls);

}  // namespace qsf
