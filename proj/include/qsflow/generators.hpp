#pragma once

#include <array>
#include <string>
#include <vector>

#include "qsflow/ito_algebra.hpp"
#include "qsflow/matrix_core.hpp"

namespace qsf {

/// One Kraus term {L^k_+, L^k_1, ..., L^k_m}.
struct KrausTerm {
  ComplexMatrix plus;
  std::vector<ComplexMatrix> noise;
};

/// Generator data (K, K_1..K_m, Kraus family) of a CP flow on d x d
/// matrices driven by m noise channels.
class GermModel {
 public:
  GermModel() = default;
  GermModel(Eigen::Index dim, Eigen::Index multiplicity, ComplexMatrix k,
            std::vector<ComplexMatrix> k_list, std::vector<KrausTerm> kraus);

  Eigen::Index dim() const { return dim_; }
  Eigen::Index multiplicity() const { return m_; }
  const ComplexMatrix& K() const { return k_; }
  const std::vector<ComplexMatrix>& K_list() const { return k_list_; }
  const std::vector<KrausTerm>& kraus() const { return kraus_; }

  /// L^k_nu with nu = 0 meaning "+" and nu = n meaning noise index n.
  const ComplexMatrix& kraus_op(std::size_t k, Eigen::Index nu) const;

  /// Row block M_k = [L^k_+, L^k_1, ..., L^k_m], d x d(1+m).
  ComplexMatrix kraus_row(std::size_t k) const;

 private:
  Eigen::Index dim_ = 0;
  Eigen::Index m_ = 0;
  ComplexMatrix k_;
  std::vector<ComplexMatrix> k_list_;
  std::vector<KrausTerm> kraus_;
};

/// (1+m) x (1+m) array of superoperators indexed by mu in {-, 1..m}
/// (row, 0 = "-") and nu in {+, 1..m} (column, 0 = "+").
struct GermMatrix {
  Eigen::Index dim = 0;
  Eigen::Index multiplicity = 0;
  std::vector<SuperOperator> blocks;

  const SuperOperator& at(Eigen::Index mu, Eigen::Index nu) const {
    return blocks[static_cast<std::size_t>(mu * (multiplicity + 1) + nu)];
  }
  SuperOperator& at(Eigen::Index mu, Eigen::Index nu) {
    return blocks[static_cast<std::size_t>(mu * (multiplicity + 1) + nu)];
  }

  /// Block matrix [block(mu, nu)(B)] of side d(1+m).
  ComplexMatrix apply(const ComplexMatrix& b) const;
};

/// phi^mu_nu(B) = sum_k (L^k_mu)^* B L^k_nu, with mu = 0 using L^k_+.
ComplexMatrix phi_block(const GermModel& model, Eigen::Index mu, Eigen::Index nu,
                        const ComplexMatrix& b);

/// Block map B -> sum_k M_k^* B M_k, side d(1+m).
ComplexMatrix block_phi(const GermModel& model, const ComplexMatrix& b);

/// gamma^mu_nu built from phi, K and K_n.
GermMatrix build_germ(const GermModel& model);

/// lambda^mu_nu: the germ minus the identity ampliation on the noise-noise
/// blocks.
GermMatrix structural_maps(const GermModel& model);

/// Germ of `model` with gamma^-_+ replaced by B -> B^T - K^* B - B K. The
/// transpose is positive but not completely positive, so for d >= 2 the
/// result is not conditionally completely positive.
GermMatrix transpose_perturbed_germ(const GermModel& model);

struct CcpReport {
  bool pass = false;
  double min_eig = 0.0;
  Eigen::Index null_dim = 0;
  /// Violating vector (stacked zeta_k) when pass is false.
  ComplexVector witness;
};

/// Positivity of sum_kl <zeta_k | gamma(B_k^* B_l) zeta_l> on the subspace
/// sum_k B_k zeta_k^+ = 0. An empty basis means the d^2 matrix units.
CcpReport ccp_check(const GermMatrix& germ, const std::vector<ComplexMatrix>& basis = {},
                    double tol = 1e-8);

/// Matrix units E_ij of size d, ordered row-major.
std::vector<ComplexMatrix> matrix_units(Eigen::Index d);

/// Choi matrix sum_ij E_ij (x) block_phi(E_ij), side d^2 (1+m).
ComplexMatrix block_choi(const GermModel& model);

/// Kraus family recovered from the eigendecomposition of a block Choi
/// matrix. Throws NotPSD if the smallest eigenvalue is below
/// -rank_tol * |choi|.
std::vector<KrausTerm> kraus_extract(const ComplexMatrix& choi, Eigen::Index d, Eigen::Index m,
                                     double rank_tol = 1e-10);

/// Matrix of vec(B) -> vec(block_phi(B)) for a Kraus family; used to
/// compare families up to unitary mixing.
ComplexMatrix block_phi_matrix(const std::vector<KrausTerm>& kraus, Eigen::Index d,
                               Eigen::Index m);

/// Shifts L^k_+ by c_k = <eta0|L^k_+ eta0> and compensates in K and K_n so
/// that every structural map is unchanged.
GermModel gauge_fix(const GermModel& model, const ComplexVector& eta0);

enum class DissipativityClass { kFiltering, kSubfiltering, kContractive, kNone };

const char* to_string(DissipativityClass c);

struct DissipativityReport {
  double lambda_I_min = 0.0;        ///< min eig of D = K + K^* - phi(I)
  double block_lambda_I_min = 0.0;  ///< min eig of the block form
  double D_norm = 0.0;              ///< Frobenius norm of D
  DissipativityClass cls = DissipativityClass::kNone;
  /// Block condition holds; reported separately because it implies
  /// subfiltering and so never decides the class on its own.
  bool contractive = false;
};

ComplexMatrix dissipation_matrix(const GermModel& model);
ComplexMatrix block_dissipation_matrix(const GermModel& model);
DissipativityReport classify(const GermModel& model, double tol = 1e-10);

/// Coefficients of a unitary cocycle, dilation multiplicity q:
/// L_plus qd x d, J_bullet qd x md, J_circ qd x qd, K d x d,
/// K_bullet d x md, K_circ d x qd.
struct UnitarityCoefficients {
  ComplexMatrix K;
  ComplexMatrix K_bullet;
  ComplexMatrix K_circ;
  ComplexMatrix L_plus;
  ComplexMatrix J_bullet;
  ComplexMatrix J_circ;
};

struct UnitarityReport {
  static constexpr std::array<const char*, 5> kNames = {
      "K+K^*=L^*L", "K_bullet=L^*J_bullet", "J_bullet^*J_bullet=I",
      "K_circ=L^*J_circ", "J_circ=I-J_bullet J_bullet^*"};
  std::array<double, 5> residuals{};
  bool pass = false;
};

UnitarityReport unitarity_check(const UnitarityCoefficients& c, Eigen::Index d,
                                double tol = 1e-12);

/// Completes a filtering model to unitary cocycle coefficients. The noise
/// part of the Kraus family is used as J_bullet when it is an isometry;
/// otherwise J_bullet is the canonical embedding of the m noise channels.
UnitarityCoefficients canonical_completion(const GermModel& model, double tol = 1e-10);

/// Heisenberg generator B -> phi(B) - K^* B - B K.
SuperOperator lindblad_superop(const GermModel& model);

/// Schroedinger dual rho -> sum L rho L^* - K rho - rho K^*, defined by
/// tr[lambda(B) rho] = tr[B lambda'(rho)].
SuperOperator lindblad_dual(const GermModel& model);

/// Representation i(a) of one Ito algebra element on the dilation space
/// (dimension q = number of Kraus terms).
struct IntertwineRep {
  ComplexMatrix i;       ///< q x q
  ComplexMatrix i_minus; ///< 1 x q
  ComplexMatrix i_plus;  ///< q x 1
  Complex i_minus_plus{};
};

struct IntertwineReport {
  std::array<double, 4> residuals{};
  bool pass = false;
};

IntertwineReport intertwine_check(const GermModel& model, const ItoQuadruple& a,
                                  const IntertwineRep& rep, double tol = 1e-12);

/// Largest entry of the HP commutator between the coefficient matrix
/// [[-K, -K_bullet], [L_plus, L_bullet - I]] and a (x) I. Needs as many
/// Kraus terms as noise channels (one for m = 1). Zero means the generator
/// commutes with the noise element.
double hp_commutant_residual(const GermModel& model, const ItoQuadruple& a);

}  // namespace qsf
