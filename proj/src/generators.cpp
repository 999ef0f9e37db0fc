#include "qsflow/generators.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include <Eigen/SVD>

#include "qsflow/error.hpp"

namespace qsf {

namespace {

void require_dim(const ComplexMatrix& a, Eigen::Index d, const std::string& what) {
  if (a.rows() != d || a.cols() != d) {
    fail(ErrorCode::kDimensionMismatch,
         what + " must be " + std::to_string(d) + " x " + std::to_string(d));
  }
}

ComplexMatrix identity(Eigen::Index d) { return ComplexMatrix::Identity(d, d); }

double max_abs(const ComplexMatrix& a) { return a.size() == 0 ? 0.0 : a.cwiseAbs().maxCoeff(); }

}  // namespace

GermModel::GermModel(Eigen::Index dim, Eigen::Index multiplicity, ComplexMatrix k,
                     std::vector<ComplexMatrix> k_list, std::vector<KrausTerm> kraus)
    : dim_(dim),
      m_(multiplicity),
      k_(std::move(k)),
      k_list_(std::move(k_list)),
      kraus_(std::move(kraus)) {
  if (dim_ < 1) fail(ErrorCode::kInvalidArgument, "model dimension must be positive");
  if (m_ < 0) fail(ErrorCode::kInvalidArgument, "multiplicity must be non-negative");
  require_dim(k_, dim_, "K");
  if (static_cast<Eigen::Index>(k_list_.size()) != m_) {
    fail(ErrorCode::kMultiplicityMismatch, "K_list must hold one matrix per noise channel");
  }
  for (const auto& kn : k_list_) require_dim(kn, dim_, "K_n");
  for (const auto& term : kraus_) {
    require_dim(term.plus, dim_, "Kraus operator L^k_+");
    if (static_cast<Eigen::Index>(term.noise.size()) != m_) {
      fail(ErrorCode::kMultiplicityMismatch, "each Kraus term needs m noise operators");
    }
    for (const auto& l : term.noise) require_dim(l, dim_, "Kraus operator L^k_n");
  }
  auto finite = [](const ComplexMatrix& a) { return all_finite(a); };
  bool ok = finite(k_) && std::all_of(k_list_.begin(), k_list_.end(), finite);
  for (const auto& term : kraus_) {
    ok = ok && finite(term.plus) && std::all_of(term.noise.begin(), term.noise.end(), finite);
  }
  if (!ok) fail(ErrorCode::kInvalidArgument, "model contains non-finite entries");
}

const ComplexMatrix& GermModel::kraus_op(std::size_t k, Eigen::Index nu) const {
  const KrausTerm& term = kraus_.at(k);
  return nu == 0 ? term.plus : term.noise.at(static_cast<std::size_t>(nu - 1));
}

ComplexMatrix GermModel::kraus_row(std::size_t k) const {
  ComplexMatrix row(dim_, dim_ * (1 + m_));
  for (Eigen::Index nu = 0; nu <= m_; ++nu) row.middleCols(nu * dim_, dim_) = kraus_op(k, nu);
  return row;
}

ComplexMatrix GermMatrix::apply(const ComplexMatrix& b) const {
  const Eigen::Index d = dim;
  ComplexMatrix out(d * (1 + multiplicity), d * (1 + multiplicity));
  for (Eigen::Index mu = 0; mu <= multiplicity; ++mu) {
    for (Eigen::Index nu = 0; nu <= multiplicity; ++nu) {
      out.block(mu * d, nu * d, d, d) = at(mu, nu).apply(b);
    }
  }
  return out;
}

ComplexMatrix phi_block(const GermModel& model, Eigen::Index mu, Eigen::Index nu,
                        const ComplexMatrix& b) {
  require_dim(b, model.dim(), "argument");
  ComplexMatrix out = ComplexMatrix::Zero(model.dim(), model.dim());
  for (std::size_t k = 0; k < model.kraus().size(); ++k) {
    out += model.kraus_op(k, mu).adjoint() * b * model.kraus_op(k, nu);
  }
  return out;
}

ComplexMatrix block_phi(const GermModel& model, const ComplexMatrix& b) {
  require_dim(b, model.dim(), "argument");
  const Eigen::Index side = model.dim() * (1 + model.multiplicity());
  ComplexMatrix out = ComplexMatrix::Zero(side, side);
  for (std::size_t k = 0; k < model.kraus().size(); ++k) {
    const ComplexMatrix row = model.kraus_row(k);
    out += row.adjoint() * b * row;
  }
  return out;
}

namespace {

GermMatrix germ_blocks(const GermModel& model, bool subtract_identity) {
  const Eigen::Index d = model.dim();
  const Eigen::Index m = model.multiplicity();
  GermMatrix g{d, m, std::vector<SuperOperator>(static_cast<std::size_t>((m + 1) * (m + 1)),
                                                SuperOperator::zero(d))};
  for (Eigen::Index mu = 0; mu <= m; ++mu) {
    for (Eigen::Index nu = 0; nu <= m; ++nu) {
      SuperOperator& blk = g.at(mu, nu);
      for (std::size_t k = 0; k < model.kraus().size(); ++k) {
        blk = blk + superop_sandwich(model.kraus_op(k, mu), model.kraus_op(k, nu));
      }
      if (mu == 0 && nu == 0) {
        blk = blk - superop_left(model.K().adjoint(), d) - superop_right(model.K(), d);
      } else if (mu == 0) {
        blk = blk - superop_right(model.K_list()[static_cast<std::size_t>(nu - 1)], d);
      } else if (nu == 0) {
        blk = blk - superop_left(model.K_list()[static_cast<std::size_t>(mu - 1)].adjoint(), d);
      } else if (mu == nu && subtract_identity) {
        blk = blk - SuperOperator::identity(d);
      }
    }
  }
  return g;
}

}  // namespace

GermMatrix build_germ(const GermModel& model) { return germ_blocks(model, false); }

GermMatrix structural_maps(const GermModel& model) { return germ_blocks(model, true); }

GermMatrix transpose_perturbed_germ(const GermModel& model) {
  GermMatrix g = build_germ(model);
  const Eigen::Index d = model.dim();
  ComplexMatrix transpose = ComplexMatrix::Zero(d * d, d * d);
  // vec(X^T)[j + i d] = X(j, i) = vec(X)[i + j d]
  for (Eigen::Index i = 0; i < d; ++i) {
    for (Eigen::Index j = 0; j < d; ++j) transpose(j + i * d, i + j * d) = 1.0;
  }
  g.at(0, 0) = SuperOperator(d, transpose) - superop_left(model.K().adjoint(), d) -
               superop_right(model.K(), d);
  return g;
}

std::vector<ComplexMatrix> matrix_units(Eigen::Index d) {
  std::vector<ComplexMatrix> units;
  units.reserve(static_cast<std::size_t>(d * d));
  for (Eigen::Index i = 0; i < d; ++i) {
    for (Eigen::Index j = 0; j < d; ++j) {
      ComplexMatrix e = ComplexMatrix::Zero(d, d);
      e(i, j) = 1.0;
      units.push_back(std::move(e));
    }
  }
  return units;
}

CcpReport ccp_check(const GermMatrix& germ, const std::vector<ComplexMatrix>& basis_in,
                    double tol) {
  const Eigen::Index d = germ.dim;
  const std::vector<ComplexMatrix> basis = basis_in.empty() ? matrix_units(d) : basis_in;
  const auto n = static_cast<Eigen::Index>(basis.size());
  for (const auto& b : basis) require_dim(b, d, "basis element");

  // Spanning test: the vectorized basis must have rank d^2.
  ComplexMatrix stacked(d * d, n);
  for (Eigen::Index k = 0; k < n; ++k) stacked.col(k) = vec(basis[static_cast<std::size_t>(k)]);
  Eigen::JacobiSVD<ComplexMatrix> span_svd(stacked);
  const auto sv = span_svd.singularValues();
  if (sv.size() < d * d || sv(d * d - 1) <= 1e-10 * std::max(1.0, sv(0))) {
    fail(ErrorCode::kBasisNotSpanning, "ccp_check: operator basis does not span the algebra");
  }

  const Eigen::Index block = d * (1 + germ.multiplicity);
  const Eigen::Index total = n * block;
  ComplexMatrix gram(total, total);
  for (Eigen::Index k = 0; k < n; ++k) {
    for (Eigen::Index l = 0; l < n; ++l) {
      const ComplexMatrix arg =
          basis[static_cast<std::size_t>(k)].adjoint() * basis[static_cast<std::size_t>(l)];
      gram.block(k * block, l * block, block, block) = germ.apply(arg);
    }
  }

  // Constraint sum_k B_k zeta_k^+ = 0; zeta_k^+ is the first d entries.
  ComplexMatrix constraint = ComplexMatrix::Zero(d, total);
  for (Eigen::Index k = 0; k < n; ++k) {
    constraint.block(0, k * block, d, d) = basis[static_cast<std::size_t>(k)];
  }
  Eigen::JacobiSVD<ComplexMatrix> svd(constraint, Eigen::ComputeFullV);
  const auto cs = svd.singularValues();
  const double cutoff = 1e-10 * std::max(1.0, cs.size() > 0 ? cs(0) : 0.0);
  Eigen::Index rank = 0;
  for (Eigen::Index i = 0; i < cs.size(); ++i) rank += cs(i) > cutoff ? 1 : 0;
  const ComplexMatrix null_basis = svd.matrixV().rightCols(total - rank);

  CcpReport report;
  report.null_dim = null_basis.cols();
  if (report.null_dim == 0) {
    report.pass = true;
    return report;
  }
  ComplexMatrix reduced = null_basis.adjoint() * gram * null_basis;
  reduced = 0.5 * (reduced + reduced.adjoint()).eval();
  Eigen::SelfAdjointEigenSolver<ComplexMatrix> es(reduced);
  report.min_eig = es.eigenvalues()(0);
  report.pass = report.min_eig >= -tol;
  if (!report.pass) report.witness = null_basis * es.eigenvectors().col(0);
  return report;
}

ComplexMatrix block_choi(const GermModel& model) {
  const Eigen::Index d = model.dim();
  const Eigen::Index side = d * (1 + model.multiplicity());
  ComplexMatrix choi = ComplexMatrix::Zero(d * side, d * side);
  for (std::size_t k = 0; k < model.kraus().size(); ++k) {
    // v_k = sum_i e_i (x) M_k^* e_i
    const ComplexMatrix row = model.kraus_row(k);
    ComplexVector v(d * side);
    for (Eigen::Index i = 0; i < d; ++i) v.segment(i * side, side) = row.row(i).adjoint();
    choi += v * v.adjoint();
  }
  return choi;
}

std::vector<KrausTerm> kraus_extract(const ComplexMatrix& choi, Eigen::Index d, Eigen::Index m,
                                     double rank_tol) {
  const Eigen::Index side = d * (1 + m);
  if (choi.rows() != d * side || choi.cols() != d * side) {
    fail(ErrorCode::kDimensionMismatch, "Choi matrix has the wrong size for (d, m)");
  }
  const ComplexMatrix herm = 0.5 * (choi + choi.adjoint());
  Eigen::SelfAdjointEigenSolver<ComplexMatrix> es(herm);
  const Eigen::VectorXd& ev = es.eigenvalues();
  const double scale = std::max(std::abs(ev(0)), std::abs(ev(ev.size() - 1)));
  if (ev(0) < -rank_tol * scale) {
    fail(ErrorCode::kNotPSD, "Choi matrix has eigenvalue " + std::to_string(ev(0)));
  }
  std::vector<KrausTerm> out;
  for (Eigen::Index j = ev.size() - 1; j >= 0; --j) {
    if (scale == 0.0 || ev(j) <= rank_tol * scale) break;
    const ComplexVector v = std::sqrt(ev(j)) * es.eigenvectors().col(j);
    ComplexMatrix row(d, side);
    for (Eigen::Index i = 0; i < d; ++i) row.row(i) = v.segment(i * side, side).adjoint();
    KrausTerm term;
    term.plus = row.leftCols(d);
    for (Eigen::Index n = 1; n <= m; ++n) term.noise.push_back(row.middleCols(n * d, d));
    out.push_back(std::move(term));
  }
  return out;
}

ComplexMatrix block_phi_matrix(const std::vector<KrausTerm>& kraus, Eigen::Index d,
                               Eigen::Index m) {
  const Eigen::Index side = d * (1 + m);
  ComplexMatrix out = ComplexMatrix::Zero(side * side, d * d);
  for (const auto& term : kraus) {
    ComplexMatrix row(d, side);
    row.leftCols(d) = term.plus;
    for (Eigen::Index n = 1; n <= m; ++n) {
      row.middleCols(n * d, d) = term.noise.at(static_cast<std::size_t>(n - 1));
    }
    out += kron(row.transpose(), row.adjoint());
  }
  return out;
}

GermModel gauge_fix(const GermModel& model, const ComplexVector& eta0) {
  const Eigen::Index d = model.dim();
  if (eta0.size() != d) fail(ErrorCode::kDimensionMismatch, "eta0 has the wrong length");
  if (std::abs(eta0.norm() - 1.0) > 1e-10) {
    fail(ErrorCode::kInvalidArgument, "eta0 must be a unit vector");
  }
  ComplexMatrix k = model.K();
  std::vector<ComplexMatrix> k_list = model.K_list();
  std::vector<KrausTerm> kraus = model.kraus();
  for (auto& term : kraus) {
    const Complex c = eta0.dot(term.plus * eta0);
    k += -std::conj(c) * term.plus + 0.5 * std::norm(c) * identity(d);
    for (std::size_t n = 0; n < k_list.size(); ++n) k_list[n] -= std::conj(c) * term.noise[n];
    term.plus -= c * identity(d);
  }
  return {d, model.multiplicity(), std::move(k), std::move(k_list), std::move(kraus)};
}

const char* to_string(DissipativityClass c) {
  switch (c) {
    case DissipativityClass::kFiltering:
      return "filtering";
    case DissipativityClass::kSubfiltering:
      return "subfiltering";
    case DissipativityClass::kContractive:
      return "contractive";
    case DissipativityClass::kNone:
      return "none";
  }
  return "none";
}

ComplexMatrix dissipation_matrix(const GermModel& model) {
  return model.K() + model.K().adjoint() - phi_block(model, 0, 0, identity(model.dim()));
}

ComplexMatrix block_dissipation_matrix(const GermModel& model) {
  const Eigen::Index d = model.dim();
  const Eigen::Index m = model.multiplicity();
  ComplexMatrix kk = ComplexMatrix::Identity(d * (1 + m), d * (1 + m));
  kk.topLeftCorner(d, d) = model.K() + model.K().adjoint();
  for (Eigen::Index n = 1; n <= m; ++n) {
    const ComplexMatrix& kn = model.K_list()[static_cast<std::size_t>(n - 1)];
    kk.block(0, n * d, d, d) = kn;
    kk.block(n * d, 0, d, d) = kn.adjoint();
  }
  return kk - block_phi(model, identity(d));
}

DissipativityReport classify(const GermModel& model, double tol) {
  DissipativityReport r;
  const ComplexMatrix dm = dissipation_matrix(model);
  r.D_norm = dm.norm();
  r.lambda_I_min = min_eig_hermitian(dm);
  r.block_lambda_I_min = min_eig_hermitian(block_dissipation_matrix(model));
  r.contractive = r.block_lambda_I_min >= -tol;
  if (r.D_norm <= tol) {
    r.cls = DissipativityClass::kFiltering;
  } else if (r.lambda_I_min >= -tol) {
    r.cls = DissipativityClass::kSubfiltering;
  } else if (r.contractive) {
    r.cls = DissipativityClass::kContractive;
  } else {
    r.cls = DissipativityClass::kNone;
  }
  return r;
}

UnitarityReport unitarity_check(const UnitarityCoefficients& c, Eigen::Index d, double tol) {
  const Eigen::Index qd = c.L_plus.rows();
  const Eigen::Index md = c.J_bullet.cols();
  auto shape = [](const ComplexMatrix& a, Eigen::Index r, Eigen::Index cc, const char* name) {
    if (a.rows() != r || a.cols() != cc) {
      fail(ErrorCode::kDimensionMismatch, std::string("unitarity block ") + name +
                                              " has shape " + std::to_string(a.rows()) + "x" +
                                              std::to_string(a.cols()));
    }
  };
  if (d < 1 || qd % d != 0 || md % d != 0) {
    fail(ErrorCode::kDimensionMismatch, "unitarity blocks are not multiples of d");
  }
  shape(c.K, d, d, "K");
  shape(c.L_plus, qd, d, "L_plus");
  shape(c.J_bullet, qd, md, "J_bullet");
  shape(c.J_circ, qd, qd, "J_circ");
  shape(c.K_bullet, d, md, "K_bullet");
  shape(c.K_circ, d, qd, "K_circ");

  const ComplexMatrix l_adj = c.L_plus.adjoint();
  UnitarityReport r;
  r.residuals[0] = (c.K + c.K.adjoint() - l_adj * c.L_plus).norm();
  r.residuals[1] = (c.K_bullet - l_adj * c.J_bullet).norm();
  r.residuals[2] = (c.J_bullet.adjoint() * c.J_bullet - identity(md)).norm();
  r.residuals[3] = (c.K_circ - l_adj * c.J_circ).norm();
  r.residuals[4] = (c.J_circ - (identity(qd) - c.J_bullet * c.J_bullet.adjoint())).norm();
  r.pass = std::all_of(r.residuals.begin(), r.residuals.end(),
                       [tol](double x) { return x <= tol; });
  return r;
}

UnitarityCoefficients canonical_completion(const GermModel& model, double tol) {
  const Eigen::Index d = model.dim();
  const Eigen::Index m = model.multiplicity();
  const auto p = static_cast<Eigen::Index>(model.kraus().size());

  // Use the Kraus noise blocks when they already form an isometry.
  ComplexMatrix j_kraus(p * d, m * d);
  for (Eigen::Index k = 0; k < p; ++k) {
    for (Eigen::Index n = 0; n < m; ++n) {
      j_kraus.block(k * d, n * d, d, d) = model.kraus_op(static_cast<std::size_t>(k), n + 1);
    }
  }
  const bool isometric =
      m > 0 && p > 0 && (j_kraus.adjoint() * j_kraus - identity(m * d)).norm() <= tol;
  const Eigen::Index q = isometric ? p : std::max(p, m);

  UnitarityCoefficients c;
  c.K = model.K();
  c.L_plus = ComplexMatrix::Zero(q * d, d);
  for (Eigen::Index k = 0; k < p; ++k) {
    c.L_plus.middleRows(k * d, d) = model.kraus_op(static_cast<std::size_t>(k), 0);
  }
  if (isometric) {
    c.J_bullet = j_kraus;
  } else {
    c.J_bullet = ComplexMatrix::Zero(q * d, m * d);
    c.J_bullet.topRows(m * d) = identity(m * d);
  }
  const ComplexMatrix l_adj = c.L_plus.adjoint();
  c.K_bullet = l_adj * c.J_bullet;
  c.J_circ = identity(q * d) - c.J_bullet * c.J_bullet.adjoint();
  c.K_circ = l_adj * c.J_circ;
  return c;
}

SuperOperator lindblad_superop(const GermModel& model) {
  return build_germ(model).at(0, 0);
}

SuperOperator lindblad_dual(const GermModel& model) {
  const Eigen::Index d = model.dim();
  const ComplexMatrix id = identity(d);
  ComplexMatrix mat = -kron(id, model.K()) - kron(model.K().conjugate(), id);
  for (const auto& term : model.kraus()) mat += kron(term.plus.conjugate(), term.plus);
  return {d, mat};
}

IntertwineReport intertwine_check(const GermModel& model, const ItoQuadruple& a,
                                  const IntertwineRep& rep, double tol) {
  const Eigen::Index d = model.dim();
  const Eigen::Index m = model.multiplicity();
  const auto q = static_cast<Eigen::Index>(model.kraus().size());
  if (a.multiplicity() != m) {
    fail(ErrorCode::kMultiplicityMismatch, "intertwine_check: quadruple multiplicity differs");
  }
  if (rep.i.rows() != q || rep.i.cols() != q || rep.i_minus.rows() != 1 ||
      rep.i_minus.cols() != q || rep.i_plus.rows() != q || rep.i_plus.cols() != 1) {
    fail(ErrorCode::kDimensionMismatch, "intertwine_check: representation shapes");
  }
  const ComplexMatrix id = identity(d);
  ComplexMatrix l(q * d, d);
  ComplexMatrix l_bullet(q * d, m * d);
  for (Eigen::Index k = 0; k < q; ++k) {
    l.middleRows(k * d, d) = model.kraus_op(static_cast<std::size_t>(k), 0);
    for (Eigen::Index n = 0; n < m; ++n) {
      l_bullet.block(k * d, n * d, d, d) = model.kraus_op(static_cast<std::size_t>(k), n + 1);
    }
  }
  ComplexMatrix k_bullet(d, m * d);
  for (Eigen::Index n = 0; n < m; ++n) {
    k_bullet.middleCols(n * d, d) = model.K_list()[static_cast<std::size_t>(n)];
  }
  const ComplexMatrix ex = kron(a.exchange(), id);
  const ComplexMatrix cr = kron(a.creation(), id);
  const ComplexMatrix an = kron(a.annihilation(), id);
  const ComplexMatrix ri = kron(rep.i, id);
  const ComplexMatrix rm = kron(rep.i_minus, id);

  IntertwineReport r;
  r.residuals[0] = (l_bullet * ex - ri * l_bullet).norm();
  r.residuals[1] = (a.time() * id - k_bullet * cr - rm * l - rep.i_minus_plus * id).norm();
  r.residuals[2] = (l_bullet * cr - ri * l - kron(rep.i_plus, id)).norm();
  r.residuals[3] = (an - k_bullet * ex - rm * l_bullet).norm();
  r.pass = std::all_of(r.residuals.begin(), r.residuals.end(),
                       [tol](double x) { return x <= tol; });
  return r;
}

double hp_commutant_residual(const GermModel& model, const ItoQuadruple& a) {
  const Eigen::Index d = model.dim();
  const Eigen::Index m = model.multiplicity();
  if (static_cast<Eigen::Index>(model.kraus().size()) != m || a.multiplicity() != m) {
    fail(ErrorCode::kMultiplicityMismatch,
         "hp_commutant_residual needs one Kraus term per noise channel");
  }
  const Eigen::Index side = d * (m + 2);
  ComplexMatrix c = ComplexMatrix::Zero(side, side);
  c.block(0, (m + 1) * d, d, d) = -model.K();
  for (Eigen::Index n = 0; n < m; ++n) {
    c.block(0, (n + 1) * d, d, d) = -model.K_list()[static_cast<std::size_t>(n)];
    c.block((n + 1) * d, (m + 1) * d, d, d) = model.kraus_op(static_cast<std::size_t>(n), 0);
    for (Eigen::Index k = 0; k < m; ++k) {
      c.block((k + 1) * d, (n + 1) * d, d, d) =
          model.kraus_op(static_cast<std::size_t>(k), n + 1) - (k == n ? identity(d) : ComplexMatrix::Zero(d, d));
    }
  }
  const ComplexMatrix ext = kron(extend(a).matrix(), identity(d));
  return max_abs(c * ext - ext * c);
}

}  // namespace qsf
