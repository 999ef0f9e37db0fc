#include "qsflow/commands.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <map>
#include <random>
#include <set>
#include <sstream>

#include "qsflow/error.hpp"
#include "qsflow/flows.hpp"
#include "qsflow/generators.hpp"
#include "qsflow/ito_algebra.hpp"
#include "qsflow/json_io.hpp"
#include "qsflow/trajectories.hpp"
#include "qsflow/weyl_fock.hpp"

namespace qsf::commands {

namespace {

using json_io::Json;
using json_io::OrderedJson;
using json_io::to_json;

[[noreturn]] void config_error(const std::string& what) { fail(ErrorCode::kConfig, what); }

/// Reads keys from one config object, records the resolved value of each
/// (defaults included) and rejects keys that were never read.
class Reader {
 public:
  Reader(const Json& j, std::string where, OrderedJson& resolved)
      : j_(j), where_(std::move(where)), out_(resolved) {
    if (!j_.is_object()) config_error(where_ + ": expected an object");
  }

  const Json* raw(const std::string& key) {
    seen_.insert(key);
    return j_.contains(key) ? &j_[key] : nullptr;
  }

  const Json& required(const std::string& key) {
    const Json* v = raw(key);
    if (v == nullptr) config_error(where_ + ": missing \"" + key + "\"");
    return *v;
  }

  double real(const std::string& key, double def) {
    const Json* v = raw(key);
    const double x = v != nullptr ? json_io::real_from(*v, path(key)) : def;
    out_[key] = x;
    return x;
  }

  double real_required(const std::string& key) {
    const double x = json_io::real_from(required(key), path(key));
    out_[key] = x;
    return x;
  }

  std::size_t count(const std::string& key, std::size_t def) {
    const Json* v = raw(key);
    const std::size_t x = v != nullptr ? json_io::count_from(*v, path(key)) : def;
    out_[key] = x;
    return x;
  }

  std::uint64_t seed(const std::string& key, std::uint64_t def,
                     const std::optional<std::uint64_t>& override_seed) {
    const Json* v = raw(key);
    std::uint64_t s = def;
    if (v != nullptr) {
      if (!v->is_number_unsigned() && !(v->is_number_integer() && v->get<long long>() >= 0)) {
        config_error(path(key) + ": expected a non-negative integer");
      }
      s = v->get<std::uint64_t>();
    }
    if (override_seed) s = *override_seed;
    out_[key] = s;
    return s;
  }

  bool flag(const std::string& key, bool def) {
    const Json* v = raw(key);
    if (v != nullptr && !v->is_boolean()) config_error(path(key) + ": expected true or false");
    const bool b = v != nullptr ? v->get<bool>() : def;
    out_[key] = b;
    return b;
  }

  std::string choice(const std::string& key, const std::string& def,
                     std::initializer_list<const char*> allowed) {
    const Json* v = raw(key);
    if (v != nullptr && !v->is_string()) config_error(path(key) + ": expected a string");
    const std::string s = v != nullptr ? v->get<std::string>() : def;
    if (std::none_of(allowed.begin(), allowed.end(), [&](const char* a) { return s == a; })) {
      config_error(path(key) + ": unsupported value \"" + s + "\"");
    }
    out_[key] = s;
    return s;
  }

  std::vector<double> reals(const std::string& key, std::vector<double> def) {
    const Json* v = raw(key);
    std::vector<double> x = v != nullptr ? json_io::reals_from(*v, path(key)) : std::move(def);
    out_[key] = x;
    return x;
  }

  GermModel model(const std::string& key) {
    GermModel m = json_io::model_from(required(key), path(key));
    out_[key] = to_json(m);
    return m;
  }

  void finish() {
    for (const auto& item : j_.items()) {
      if (seen_.count(item.key()) == 0) {
        config_error(where_ + ": unknown key \"" + item.key() + "\"");
      }
    }
  }

  std::string path(const std::string& key) const { return where_ + "." + key; }
  OrderedJson& resolved() { return out_; }

 private:
  const Json& j_;
  std::string where_;
  OrderedJson& out_;
  std::set<std::string> seen_;
};

struct Outcome {
  bool pass = true;
  OrderedJson report = OrderedJson::object();
  /// Optional CSV rendering of the report.
  std::string csv;
  std::string rng;
  std::vector<std::string> warnings;
};

struct Context {
  const RunOptions& options;
  OrderedJson resolved = OrderedJson::object();
};

double max_abs(const ComplexMatrix& a) { return a.size() == 0 ? 0.0 : a.cwiseAbs().maxCoeff(); }

OrderedJson check_entry(const std::string& name, double residual, double tol) {
  OrderedJson j;
  j["name"] = name;
  j["residual"] = residual;
  j["tol"] = tol;
  j["pass"] = residual <= tol;
  return j;
}

// ------------------------------------------------------------------ verify-algebra

Complex random_entry(std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  const double re = u(rng);
  const double im = u(rng);
  return Complex(re, im) / std::sqrt(2.0);
}

ComplexMatrix random_block(std::mt19937_64& rng, Eigen::Index r, Eigen::Index c) {
  ComplexMatrix a(r, c);
  for (Eigen::Index j = 0; j < c; ++j) {
    for (Eigen::Index i = 0; i < r; ++i) a(i, j) = random_entry(rng);
  }
  return a;
}

ItoQuadruple random_quadruple(std::mt19937_64& rng, Eigen::Index m) {
  ComplexMatrix ex = random_block(rng, m, m);
  ComplexMatrix cr = random_block(rng, m, 1);
  ComplexMatrix an = random_block(rng, 1, m);
  return {ex, cr, an, random_entry(rng)};
}

PiecewiseCoherent random_coherent(std::mt19937_64& rng, Eigen::Index m) {
  std::uniform_int_distribution<int> pieces(0, 3);
  std::uniform_real_distribution<double> len(0.1, 0.8);
  const int n = pieces(rng);
  std::vector<double> bp{0.0};
  std::vector<ComplexVector> amps;
  for (int k = 0; k < n; ++k) {
    bp.push_back(bp.back() + len(rng));
    amps.push_back(random_block(rng, m, 1).col(0) / std::sqrt(static_cast<double>(m)));
  }
  return {m, bp, amps, random_entry(rng) + 1.0};
}

Outcome cmd_verify_algebra(const Json& cfg, Context& ctx) {
  Reader r(cfg, "config", ctx.resolved);
  const std::size_t samples = r.count("samples", 1000);
  const std::size_t mult = r.count("multiplicity", 3);
  const std::uint64_t seed = r.seed("seed", 0, ctx.options.seed);
  const double tol = r.real("tol", 1e-13);
  const std::size_t weyl_samples = r.count("weyl_samples", 200);
  const double weyl_tol = r.real("weyl_tol", 1e-10);
  const bool fault = r.flag("inject_fault", false);
  r.finish();
  if (samples == 0) config_error("config.samples must be positive");
  if (mult == 0) config_error("config.multiplicity must be positive");

  // The injected fault perturbs the time entry of every product.
  auto prod = [fault](const ItoQuadruple& a, const ItoQuadruple& b) {
    const ItoQuadruple p = hp_product(a, b);
    if (!fault) return p;
    const Eigen::Index m = p.multiplicity();
    return p + ItoQuadruple(ComplexMatrix::Zero(m, m), ComplexMatrix::Zero(m, 1),
                            ComplexMatrix::Zero(1, m), 0.5 * a.time() * b.time());
  };
  auto star_prod = [&](const ItoQuadruple& a, const ItoQuadruple& b) {
    return b + prod(star(a), b) + star(a);
  };
  // a o b = a + b + ab, so that a * b = star(a) o b; o is the associative one.
  auto compose = [&](const ItoQuadruple& a, const ItoQuadruple& b) { return a + b + prod(a, b); };

  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<std::size_t> pick_m(1, mult);
  double assoc = 0.0, anti = 0.0, invol = 0.0, ext_prod = 0.0, ext_star = 0.0, compose_assoc = 0.0,
         star_herm = 0.0;
  for (std::size_t s = 0; s < samples; ++s) {
    const auto m = static_cast<Eigen::Index>(pick_m(rng));
    const ItoQuadruple a = random_quadruple(rng, m);
    const ItoQuadruple b = random_quadruple(rng, m);
    const ItoQuadruple c = random_quadruple(rng, m);
    assoc = std::max(assoc, prod(prod(a, b), c).distance(prod(a, prod(b, c))));
    anti = std::max(anti, star(prod(a, b)).distance(prod(star(b), star(a))));
    invol = std::max(invol, star(star(a)).distance(a));
    ext_prod = std::max(ext_prod, max_abs((extend(a) * extend(b)).matrix() -
                                          extend(prod(a, b)).matrix()));
    ext_star = std::max(ext_star, max_abs(pseudo_adjoint(extend(a)).matrix() -
                                          extend(star(a)).matrix()));
    compose_assoc = std::max(compose_assoc, compose(compose(a, b), c)
                                                .distance(compose(a, compose(b, c))));
    star_herm = std::max(star_herm, star(star_prod(a, b)).distance(star_prod(b, a)));
  }

  const ItoQuadruple w = wiener(0.0, 1.0);
  const ItoQuadruple p = poisson(0.0, 1.0);
  const ItoQuadruple d = newton(1.0);
  const double table_dq = prod(w, w).distance(newton(1.0));
  const double table_dp = prod(p, p).distance(p + newton(1.0));
  const double table_dt = prod(d, d).distance(ItoQuadruple(1));

  double weyl = 0.0;
  std::uniform_real_distribution<double> pick_t(0.0, 2.0);
  std::uniform_int_distribution<Eigen::Index> pick_wm(1, static_cast<Eigen::Index>(std::min<std::size_t>(2, mult)));
  for (std::size_t s = 0; s < weyl_samples; ++s) {
    const Eigen::Index m = pick_wm(rng);
    // Blocks scaled so that each has norm at most 1.
    const ItoQuadruple a = (1.0 / static_cast<double>(m)) * random_quadruple(rng, m);
    const PiecewiseCoherent f = random_coherent(rng, m);
    const PiecewiseCoherent h = random_coherent(rng, m);
    const double t = pick_t(rng);
    if (fault) {
      const Complex lhs = coherent_inner(weyl_apply(t, a, f), weyl_apply(t, a, h));
      const Complex rhs = coherent_inner(f, weyl_apply(t, star_prod(a, a), h));
      weyl = std::max(weyl, std::abs(lhs - rhs) / std::max(1.0, std::abs(lhs)));
    } else {
      weyl = std::max(weyl, weyl_semigroup_check(t, a, f, h));
    }
  }

  Outcome out;
  out.rng = "mt19937_64(seed), uniform entries in the unit disk";
  OrderedJson checks = OrderedJson::array();
  checks.push_back(check_entry("hp_associativity", assoc, tol));
  checks.push_back(check_entry("star_anti_multiplicativity", anti, tol));
  checks.push_back(check_entry("star_involution", invol, tol));
  checks.push_back(check_entry("extend_product", ext_prod, tol));
  checks.push_back(check_entry("extend_involution", ext_star, tol));
  checks.push_back(check_entry("composition_associativity", compose_assoc, tol));
  checks.push_back(check_entry("star_product_hermitian", star_herm, tol));
  checks.push_back(check_entry("table_dQ_dQ_eq_dt", table_dq, 0.0));
  checks.push_back(check_entry("table_dP_dP_eq_dP_plus_dt", table_dp, 0.0));
  checks.push_back(check_entry("table_dt_dt_eq_0", table_dt, 0.0));
  checks.push_back(check_entry("weyl_semigroup", weyl, weyl_tol));
  double max_residual = 0.0;
  for (const auto& c : checks) {
    out.pass = out.pass && c["pass"].get<bool>();
    if (c["name"] != "weyl_semigroup") {
      max_residual = std::max(max_residual, c["residual"].get<double>());
    }
  }
  out.report["samples"] = samples;
  out.report["max_algebra_residual"] = max_residual;
  out.report["checks"] = std::move(checks);
  out.report["pass"] = out.pass;
  return out;
}

// ------------------------------------------------------------------ weyl-check

Outcome cmd_weyl_check(const Json& cfg, Context& ctx) {
  Reader r(cfg, "config", ctx.resolved);
  const double t = r.real_required("t");
  const ItoQuadruple a = json_io::quadruple_from(r.required("a"), "config.a");
  ctx.resolved["a"] = to_json(a);
  const Json* bj = r.raw("b");
  const ItoQuadruple b = bj != nullptr ? json_io::quadruple_from(*bj, "config.b") : a;
  ctx.resolved["b"] = to_json(b);
  const Json* fj = r.raw("f");
  const Json* hj = r.raw("h");
  const PiecewiseCoherent f = fj != nullptr ? json_io::coherent_from(*fj, "config.f")
                                            : PiecewiseCoherent::vacuum(a.multiplicity());
  const PiecewiseCoherent h = hj != nullptr ? json_io::coherent_from(*hj, "config.h")
                                            : PiecewiseCoherent::vacuum(a.multiplicity());
  ctx.resolved["f"] = to_json(f);
  ctx.resolved["h"] = to_json(h);
  const double tol = r.real("tol", 1e-10);
  r.finish();
  if (t < 0.0) config_error("config.t must be non-negative");
  if (b.multiplicity() != a.multiplicity() || f.multiplicity() != a.multiplicity() ||
      h.multiplicity() != a.multiplicity()) {
    config_error("config: a, b, f and h must share one multiplicity");
  }

  const Complex lhs = coherent_inner(weyl_apply(t, a, f), weyl_apply(t, b, h));
  const Complex rhs = coherent_inner(f, weyl_apply(t, star_product(a, b), h));
  const double disc = weyl_semigroup_check(t, a, b, f, h);
  Outcome out;
  out.pass = disc <= tol;
  out.report["lhs"] = to_json(lhs);
  out.report["rhs"] = to_json(rhs);
  out.report["star_product"] = to_json(star_product(a, b));
  out.report["discrepancy"] = disc;
  out.report["pass"] = out.pass;
  return out;
}

// ------------------------------------------------------------------ germ

OrderedJson germ_to_json(const GermMatrix& g) {
  OrderedJson rows = OrderedJson::array();
  for (Eigen::Index mu = 0; mu <= g.multiplicity; ++mu) {
    OrderedJson row = OrderedJson::array();
    for (Eigen::Index nu = 0; nu <= g.multiplicity; ++nu) row.push_back(to_json(g.at(mu, nu).matrix));
    rows.push_back(std::move(row));
  }
  return rows;
}

double germ_adjointness_residual(const GermMatrix& g) {
  double res = 0.0;
  for (const auto& e : matrix_units(g.dim)) {
    res = std::max(res, max_abs(g.apply(e.adjoint()) - g.apply(e).adjoint()));
  }
  return res;
}

OrderedJson classification_json(const DissipativityReport& c) {
  OrderedJson j;
  j["class"] = to_string(c.cls);
  j["contractive"] = c.contractive;
  j["lambda_I_min"] = c.lambda_I_min;
  j["block_lambda_I_min"] = c.block_lambda_I_min;
  j["D_norm"] = c.D_norm;
  return j;
}

Outcome cmd_germ(const Json& cfg, Context& ctx) {
  Reader r(cfg, "config", ctx.resolved);
  const GermModel model = r.model("model");
  const double tol = r.real("tol", 1e-8);
  const double class_tol = r.real("class_tol", 1e-10);
  ComplexVector eta0 = ComplexVector::Zero(model.dim());
  eta0(0) = 1.0;
  if (const Json* e = r.raw("eta0")) eta0 = json_io::vector_from(*e, "config.eta0");
  ctx.resolved["eta0"] = json_io::vector_to_json(eta0);
  const std::string perturb = r.choice("perturb", "none", {"none", "transpose"});
  r.finish();
  if (eta0.size() != model.dim()) config_error("config.eta0 must have length dim");
  if (std::abs(eta0.norm() - 1.0) > 1e-10) config_error("config.eta0 must be a unit vector");

  const GermMatrix germ =
      perturb == "transpose" ? transpose_perturbed_germ(model) : build_germ(model);
  const CcpReport ccp = ccp_check(germ, {}, tol);
  const DissipativityReport cls = classify(model, class_tol);
  const GermModel fixed = gauge_fix(model, eta0);
  OrderedJson vac = OrderedJson::array();
  for (const auto& term : fixed.kraus()) vac.push_back(std::abs(eta0.dot(term.plus * eta0)));
  const double lambda_change =
      (lindblad_superop(fixed).matrix - lindblad_superop(model).matrix).norm();

  Outcome out;
  out.pass = ccp.pass;
  out.report["germ"] = germ_to_json(germ);
  out.report["adjointness_residual"] = germ_adjointness_residual(germ);
  OrderedJson cj;
  cj["pass"] = ccp.pass;
  cj["min_eig"] = ccp.min_eig;
  cj["null_dim"] = ccp.null_dim;
  if (!ccp.pass) cj["witness"] = json_io::vector_to_json(ccp.witness);
  out.report["ccp"] = std::move(cj);
  out.report["classification"] = classification_json(cls);
  OrderedJson gj;
  gj["model"] = to_json(fixed);
  gj["vacuum_expectations"] = std::move(vac);
  gj["lambda_change"] = lambda_change;
  out.report["gauge_fixed"] = std::move(gj);
  out.report["pass"] = out.pass;
  return out;
}

// ------------------------------------------------------------------ dilate

Outcome cmd_dilate(const Json& cfg, Context& ctx) {
  Reader r(cfg, "config", ctx.resolved);
  const GermModel model = r.model("model");
  const double rank_tol = r.real("rank_tol", 1e-10);
  const double tol = r.real("tol", 1e-10);
  const double unitarity_tol = r.real("unitarity_tol", 1e-12);
  const double class_tol = r.real("class_tol", 1e-10);
  r.finish();

  const Eigen::Index d = model.dim();
  const Eigen::Index m = model.multiplicity();
  const ComplexMatrix choi = block_choi(model);
  const std::vector<KrausTerm> kraus = kraus_extract(choi, d, m, rank_tol);
  const double recon =
      (block_phi_matrix(kraus, d, m) - block_phi_matrix(model.kraus(), d, m)).norm();
  const DissipativityReport cls = classify(model, class_tol);

  Outcome out;
  out.pass = recon <= tol;
  out.report["choi_min_eig"] = choi.size() == 0 ? 0.0 : min_eig_hermitian(choi);
  out.report["rank"] = kraus.size();
  OrderedJson kj = OrderedJson::array();
  for (const auto& term : kraus) {
    OrderedJson t;
    t["plus"] = to_json(term.plus);
    OrderedJson noise = OrderedJson::array();
    for (const auto& l : term.noise) noise.push_back(to_json(l));
    t["noise"] = std::move(noise);
    kj.push_back(std::move(t));
  }
  out.report["kraus"] = std::move(kj);
  out.report["reconstruction_error"] = recon;
  out.report["classification"] = classification_json(cls);

  OrderedJson uj;
  const bool filtering = cls.cls == DissipativityClass::kFiltering;
  uj["applicable"] = filtering;
  if (filtering) {
    const UnitarityCoefficients coeffs = canonical_completion(model, class_tol);
    const UnitarityReport ur = unitarity_check(coeffs, d, unitarity_tol);
    OrderedJson res = OrderedJson::array();
    for (std::size_t i = 0; i < ur.residuals.size(); ++i) {
      res.push_back(check_entry(UnitarityReport::kNames[i], ur.residuals[i], unitarity_tol));
    }
    uj["dilation_multiplicity"] = coeffs.L_plus.rows() / d;
    uj["conditions"] = std::move(res);
    uj["pass"] = ur.pass;
    out.pass = out.pass && ur.pass;
  }
  out.report["unitarity"] = std::move(uj);
  out.report["pass"] = out.pass;
  return out;
}

// ------------------------------------------------------------------ simulate

struct TrajectorySetup {
  TrajectoryConfig cfg;
  ComplexMatrix rho0;
  ComplexVector psi0;
  bool density = false;
};

TrajectorySetup read_trajectory(Reader& r, const RunOptions& options,
                                std::vector<double> default_times) {
  TrajectorySetup s;
  const std::string kind = r.choice("kind", "diffusive", {"diffusive", "jump"});
  s.cfg.kind = kind == "diffusive" ? NoiseKind::kDiffusive : NoiseKind::kJump;
  s.cfg.K = json_io::matrix_from(r.required("K"), r.path("K"));
  r.resolved()["K"] = to_json(s.cfg.K);
  const char* noise_key = s.cfg.kind == NoiseKind::kDiffusive ? "L" : "J";
  s.cfg.L_or_J = json_io::matrix_from(r.required(noise_key), r.path(noise_key));
  r.resolved()[noise_key] = to_json(s.cfg.L_or_J);
  const Eigen::Index d = s.cfg.K.rows();
  const Json* psi = r.raw("psi0");
  const Json* rho = r.raw("rho0");
  if (psi != nullptr && rho != nullptr) config_error(r.path("psi0") + ": give psi0 or rho0, not both");
  if (rho != nullptr) {
    s.density = true;
    s.rho0 = json_io::matrix_from(*rho, r.path("rho0"));
    r.resolved()["rho0"] = to_json(s.rho0);
  } else {
    s.psi0 = ComplexVector::Zero(d);
    if (d > 0) s.psi0(0) = 1.0;
    if (psi != nullptr) s.psi0 = json_io::vector_from(*psi, r.path("psi0"));
    r.resolved()["psi0"] = json_io::vector_to_json(s.psi0);
  }
  s.cfg.t_max = r.real("t_max", 1.0);
  s.cfg.h = r.real("h", 1e-3);
  s.cfg.n_traj = r.count("n_traj", 10000);
  s.cfg.seed = r.seed("seed", 0, options.seed);
  if (default_times.empty()) {
    for (int i = 0; i <= 10; ++i) default_times.push_back(s.cfg.t_max * i / 10.0);
  }
  s.cfg.record_times = r.reals("record_times", default_times);
  s.cfg.threads = options.threads;
  try {
    s.cfg.validate();
  } catch (const Error& e) {
    config_error(std::string("trajectory config: ") + e.what());
  }
  if (!s.density && s.psi0.size() != d) config_error(r.path("psi0") + ": wrong length");
  if (s.density && (s.rho0.rows() != d || s.rho0.cols() != d)) {
    config_error(r.path("rho0") + ": wrong size");
  }
  return s;
}

EnsembleStats run_trajectories(const TrajectorySetup& s) {
  return s.density ? evolve_density(s.cfg, s.rho0) : simulate(s.cfg, s.psi0);
}

Outcome cmd_simulate(const Json& cfg, Context& ctx) {
  Reader r(cfg, "config", ctx.resolved);
  const TrajectorySetup s = read_trajectory(r, ctx.options, {});
  r.finish();
  const EnsembleStats stats = run_trajectories(s);
  const Eigen::Index d = s.cfg.dim();

  Outcome out;
  out.rng = TrajectoryRng::kName;
  out.warnings = stats.warnings;
  std::ostringstream csv;
  csv << "t,mean_norm2,stderr_norm2,survival_frac";
  for (const char* part : {"re", "im"}) {
    for (Eigen::Index i = 0; i < d; ++i) {
      for (Eigen::Index j = 0; j < d; ++j) csv << ",rho_" << part << "_" << i << j;
    }
  }
  csv << "\n";
  OrderedJson recs = OrderedJson::array();
  for (const auto& rec : stats.records) {
    using json_io::format_double;
    csv << format_double(rec.t) << "," << format_double(rec.mean_norm2) << ","
        << format_double(rec.stderr_norm2) << "," << format_double(rec.survival_frac);
    for (int part = 0; part < 2; ++part) {
      for (Eigen::Index i = 0; i < d; ++i) {
        for (Eigen::Index j = 0; j < d; ++j) {
          const Complex z = rec.rho_mean(i, j);
          csv << "," << format_double(part == 0 ? z.real() : z.imag());
        }
      }
    }
    csv << "\n";
    OrderedJson rj;
    rj["t"] = rec.t;
    rj["count"] = rec.count;
    rj["mean_norm2"] = rec.mean_norm2;
    rj["stderr_norm2"] = rec.stderr_norm2;
    rj["survival_frac"] = std::isnan(rec.survival_frac) ? OrderedJson() : OrderedJson(rec.survival_frac);
    rj["rho_mean"] = to_json(rec.rho_mean);
    rj["trace_sigma"] = rec.trace_sigma();
    recs.push_back(std::move(rj));
  }
  out.csv = csv.str();
  out.report["n_traj"] = stats.n_traj;
  out.report["aborted"] = stats.aborted;
  const DissipativityReport cls = classify(averaged_model(s.cfg));
  out.report["classification"] = classification_json(cls);
  if (stats.records.size() >= 2 && !s.density) {
    const MartingaleReport mr = martingale_stats(stats, cls);
    OrderedJson mj;
    mj["mode"] = mr.mode;
    mj["pass"] = mr.pass;
    out.report["martingale"] = std::move(mj);
  }
  out.report["records"] = std::move(recs);
  return out;
}

// ------------------------------------------------------------------ semigroup

FlowOptions read_flow_options(Reader& r) {
  FlowOptions opts;
  opts.steps = r.count("steps", 0);
  opts.integrator = r.choice("integrator", "rk4", {"rk4", "expm"}) == "rk4" ? Integrator::kRk4
                                                                            : Integrator::kExpm;
  return opts;
}

Outcome cmd_semigroup(const Json& cfg, Context& ctx) {
  Reader r(cfg, "config", ctx.resolved);
  const GermModel model = r.model("model");
  std::vector<double> times = r.reals("times", {});
  const FlowOptions opts = read_flow_options(r);
  const Eigen::Index d = model.dim();
  std::optional<ComplexMatrix> rho0;
  if (const Json* rj = r.raw("rho0")) {
    rho0 = json_io::matrix_from(*rj, "config.rho0");
    ctx.resolved["rho0"] = to_json(*rho0);
  }
  std::vector<std::pair<Eigen::Index, Eigen::Index>> elems;
  if (const Json* ej = r.raw("elements")) {
    if (!ej->is_array()) config_error("config.elements: expected [[i, j], ...]");
    for (const auto& e : *ej) {
      if (!e.is_array() || e.size() != 2) config_error("config.elements: expected [[i, j], ...]");
      const auto i = static_cast<Eigen::Index>(json_io::count_from(e[0], "config.elements"));
      const auto j = static_cast<Eigen::Index>(json_io::count_from(e[1], "config.elements"));
      if (i >= d || j >= d) config_error("config.elements: index out of range");
      elems.emplace_back(i, j);
    }
  } else {
    for (Eigen::Index i = 0; i < d; ++i) {
      for (Eigen::Index j = 0; j < d; ++j) elems.emplace_back(i, j);
    }
  }
  OrderedJson ej = OrderedJson::array();
  for (const auto& [i, j] : elems) ej.push_back({i, j});
  ctx.resolved["elements"] = std::move(ej);
  const double tol = r.real("tol", 1e-10);
  const double class_tol = r.real("class_tol", 1e-10);
  r.finish();
  if (times.empty()) config_error("config.times must not be empty");
  if (!std::is_sorted(times.begin(), times.end()) || times.front() < 0.0) {
    config_error("config.times must be sorted and non-negative");
  }
  if (rho0 && (rho0->rows() != d || rho0->cols() != d)) config_error("config.rho0: wrong size");

  const DissipativityReport cls = classify(model, class_tol);
  const ComplexMatrix id = ComplexMatrix::Identity(d, d);
  std::ostringstream csv;
  csv << "t,theta_I_min_eig,theta_I_dev";
  for (const auto& [i, j] : elems) csv << ",re_" << i << j << ",im_" << i << j;
  csv << "\n";
  OrderedJson rows = OrderedJson::array();
  Outcome out;
  double prev_min = std::numeric_limits<double>::infinity();
  for (double t : times) {
    const SuperOperator theta = evolve_semigroup(model, t, opts);
    const ComplexMatrix theta_i = theta.apply(id);
    const double mn = min_eig_hermitian(theta_i, 1e-8);
    const double dev = (theta_i - id).norm();
    const ComplexMatrix shown = rho0 ? trace_dual(theta).apply(*rho0) : theta_i;
    bool ok = true;
    if (cls.cls == DissipativityClass::kFiltering) ok = dev <= tol;
    if (cls.cls == DissipativityClass::kSubfiltering) ok = mn <= prev_min + 1e-9;
    out.pass = out.pass && ok;
    prev_min = mn;
    using json_io::format_double;
    csv << format_double(t) << "," << format_double(mn) << "," << format_double(dev);
    OrderedJson row;
    row["t"] = t;
    row["theta_I_min_eig"] = mn;
    row["theta_I_dev"] = dev;
    OrderedJson vals = OrderedJson::array();
    for (const auto& [i, j] : elems) {
      csv << "," << format_double(shown(i, j).real()) << "," << format_double(shown(i, j).imag());
      vals.push_back(to_json(shown(i, j)));
    }
    csv << "\n";
    row["elements"] = std::move(vals);
    row["pass"] = ok;
    rows.push_back(std::move(row));
  }
  out.csv = csv.str();
  out.report["picture"] = rho0 ? "schroedinger" : "heisenberg";
  out.report["classification"] = classification_json(cls);
  out.report["rows"] = std::move(rows);
  out.report["pass"] = out.pass;
  return out;
}

// ------------------------------------------------------------------ genfun

Outcome cmd_genfun(const Json& cfg, Context& ctx) {
  Reader r(cfg, "config", ctx.resolved);
  const GermModel model = r.model("model");
  const double t = r.real_required("t");
  std::vector<StepFunction> family;
  if (const Json* fj = r.raw("family")) {
    if (!fj->is_array()) config_error("config.family: expected an array of step functions");
    for (std::size_t i = 0; i < fj->size(); ++i) {
      family.push_back(json_io::step_from((*fj)[i], "config.family[" + std::to_string(i) + "]"));
    }
  } else {
    family.push_back(StepFunction::zero(model.multiplicity()));
  }
  OrderedJson fam = OrderedJson::array();
  for (const auto& g : family) fam.push_back(to_json(g));
  ctx.resolved["family"] = std::move(fam);
  std::vector<ComplexVector> etas;
  if (const Json* ej = r.raw("etas")) {
    if (!ej->is_array()) config_error("config.etas: expected an array of vectors");
    for (std::size_t i = 0; i < ej->size(); ++i) {
      etas.push_back(json_io::vector_from((*ej)[i], "config.etas[" + std::to_string(i) + "]"));
    }
    OrderedJson ev = OrderedJson::array();
    for (const auto& e : etas) ev.push_back(json_io::vector_to_json(e));
    ctx.resolved["etas"] = std::move(ev);
  }
  const std::vector<double> later = r.reals("later", {});
  const double tol = r.real("tol", 1e-8);
  const FlowOptions opts = read_flow_options(r);
  r.finish();
  if (family.empty() || family.size() > 8) config_error("config.family must hold 1 to 8 entries");
  for (const auto& g : family) {
    if (g.multiplicity() != model.multiplicity()) {
      config_error("config.family: multiplicity differs from the model");
    }
  }
  if (!etas.empty() && etas.size() != family.size()) {
    config_error("config.etas must hold one vector per step function");
  }
  for (const auto& e : etas) {
    if (e.size() != model.dim()) config_error("config.etas: vector length must equal dim");
  }
  if (t < 0.0) config_error("config.t must be non-negative");
  for (double s : later) {
    if (!(s > t)) config_error("config.later: times must exceed t");
  }

  const KernelReport kr = kernel_psd_check(model, family, etas, t, later, tol, opts);
  Outcome out;
  out.pass = kr.pass;
  out.report["t"] = t;
  out.report["kernel"] = to_json(kr.kernel);
  out.report["min_eig"] = kr.min_eig;
  OrderedJson mono = OrderedJson::array();
  for (const auto& m : kr.monotonicity) {
    OrderedJson mj;
    mj["s"] = m.s;
    mj["min_eig"] = m.min_eig;
    mj["pass"] = m.pass;
    mono.push_back(std::move(mj));
  }
  out.report["monotonicity"] = std::move(mono);
  OrderedJson commute = OrderedJson::array();
  if (static_cast<Eigen::Index>(model.kraus().size()) == model.multiplicity()) {
    for (const auto& g : family) {
      double res = 0.0;
      for (const auto& v : g.values()) res = std::max(res, hp_commutant_residual(model, v));
      commute.push_back(res);
    }
  }
  out.report["hp_commutant_residuals"] = std::move(commute);
  out.report["pass"] = out.pass;
  return out;
}

// ------------------------------------------------------------------ crosscheck

Outcome cmd_crosscheck(const Json& cfg, Context& ctx) {
  Reader r(cfg, "config", ctx.resolved);
  OrderedJson traj_resolved = OrderedJson::object();
  Reader tr(r.required("trajectory"), "config.trajectory", traj_resolved);
  const TrajectorySetup s = read_trajectory(tr, ctx.options, {0.5, 1.0});
  tr.finish();
  ctx.resolved["trajectory"] = std::move(traj_resolved);
  const double t_flow = r.real("t_flow", 0.5);
  const double amplitude = r.real("amplitude", 0.5);
  PicardOptions popts;
  popts.depth = r.count("picard_depth", 12);
  popts.quad_steps = r.count("quad_steps", 256);
  const double tol_semigroup = r.real("tol_semigroup", 1e-10);
  const double tol_picard = r.real("tol_picard", 1e-6);
  const double traj_tol = r.real("traj_tol", 0.005);
  r.finish();
  if (t_flow < 0.0) config_error("config.t_flow must be non-negative");
  if (popts.quad_steps < 8) config_error("config.quad_steps must be at least 8");

  const GermModel avg = averaged_model(s.cfg);
  const GermModel unified =
      to_germ_model(unified_coefficients(s.cfg.kind, s.cfg.K, s.cfg.L_or_J));
  const PiecewiseCoherent vac0 = PiecewiseCoherent::vacuum(0);
  const PiecewiseCoherent vac1 = PiecewiseCoherent::vacuum(1);

  Outcome out;
  OrderedJson checks = OrderedJson::array();
  auto add = [&](const std::string& name, double residual, double tol) {
    OrderedJson c = check_entry(name, residual, tol);
    out.pass = out.pass && c["pass"].get<bool>();
    checks.push_back(std::move(c));
  };

  const SuperOperator theta_rk4 = evolve_semigroup(avg, t_flow);
  FlowOptions exact;
  exact.integrator = Integrator::kExpm;
  const SuperOperator theta_exp = evolve_semigroup(avg, t_flow, exact);
  add("semigroup_rk4_vs_expm", max_abs(theta_rk4.matrix - theta_exp.matrix), tol_semigroup);
  add("semigroup_vs_vacuum_propagator",
      max_abs(theta_rk4.matrix - coherent_propagator(avg, vac0, vac0, t_flow).map.matrix),
      tol_semigroup);
  add("picard_vacuum_vs_semigroup",
      max_abs(picard_oracle(avg, vac0, vac0, t_flow, popts).propagator.map.matrix -
              theta_exp.matrix),
      tol_picard);
  const PiecewiseCoherent amp = t_flow > 0.0
                                    ? PiecewiseCoherent::constant(
                                          t_flow, ComplexVector::Constant(1, amplitude))
                                    : vac1;
  add("picard_coherent_vs_propagator",
      max_abs(picard_oracle(unified, amp, amp, t_flow, popts).propagator.map.matrix -
              coherent_propagator(unified, amp, amp, t_flow).map.matrix),
      tol_picard);

  const EnsembleStats stats = run_trajectories(s);
  out.warnings = stats.warnings;
  const ComplexMatrix rho0 = s.density ? s.rho0 : ComplexMatrix(s.psi0 * s.psi0.adjoint());
  OrderedJson traj = OrderedJson::array();
  for (const auto& rec : stats.records) {
    const ComplexMatrix oracle =
        trace_dual(evolve_semigroup(avg, rec.t, exact)).apply(rho0);
    const double dist = trace_distance(rec.rho_mean, oracle);
    const double bound = std::max(3.0 * rec.trace_sigma(), traj_tol);
    add("trajectory_vs_master_t=" + json_io::format_double(rec.t), dist, bound);
  }
  if (stats.aborted > 0) {
    out.pass = false;
    out.warnings.push_back("aborted trajectories make the ensemble mean unreliable");
  }
  out.rng = TrajectoryRng::kName;
  out.report["checks"] = std::move(checks);
  out.report["aborted"] = stats.aborted;
  out.report["pass"] = out.pass;
  return out;
}

using Handler = std::function<Outcome(const Json&, Context&)>;

const std::map<std::string, std::pair<Handler, bool>>& handlers() {
  // name -> (handler, supports csv)
  static const std::map<std::string, std::pair<Handler, bool>> table = {
      {"verify-algebra", {cmd_verify_algebra, false}},
      {"weyl-check", {cmd_weyl_check, false}},
      {"germ", {cmd_germ, false}},
      {"dilate", {cmd_dilate, false}},
      {"simulate", {cmd_simulate, true}},
      {"semigroup", {cmd_semigroup, true}},
      {"genfun", {cmd_genfun, false}},
      {"crosscheck", {cmd_crosscheck, false}},
  };
  return table;
}

}  // namespace

const std::vector<std::string>& command_names() {
  static const std::vector<std::string> names = {"verify-algebra", "weyl-check", "germ",
                                                 "dilate",         "simulate",   "semigroup",
                                                 "genfun",         "crosscheck"};
  return names;
}

RunResult run(const std::string& command, const std::string& config_text,
              const RunOptions& options) {
  RunResult result;
  const auto& table = handlers();
  const auto it = table.find(command);
  if (it == table.end()) {
    result.exit_code = kExitConfigError;
    result.diagnostics.push_back("unknown command \"" + command + "\"");
    return result;
  }
  const bool csv_ok = it->second.second;
  const std::string format = options.format.empty() ? (csv_ok ? "csv" : "json") : options.format;
  if (format != "json" && !(format == "csv" && csv_ok)) {
    result.exit_code = kExitConfigError;
    result.diagnostics.push_back("format \"" + format + "\" is not supported by " + command);
    return result;
  }
  result.format = format;

  Context ctx{options};
  Outcome outcome;
  try {
    const Json cfg = Json::parse(config_text);
    if (!cfg.is_object()) config_error("config must be a JSON object");
    if (!cfg.contains("schema_version")) config_error("config: missing \"schema_version\"");
    if (cfg["schema_version"] != 1) config_error("config: unsupported schema_version (expected 1)");
    Json body = cfg;
    body.erase("schema_version");
    ctx.resolved["schema_version"] = 1;
    outcome = it->second.first(body, ctx);
  } catch (const Json::exception& e) {
    result.exit_code = kExitConfigError;
    result.diagnostics.push_back(std::string("invalid config JSON: ") + e.what());
    return result;
  } catch (const Error& e) {
    result.exit_code = kExitConfigError;
    result.diagnostics.push_back(std::string(to_string(e.code())) + ": " + e.what());
    return result;
  } catch (const std::exception& e) {
    result.exit_code = kExitConfigError;
    result.diagnostics.push_back(std::string("error: ") + e.what());
    return result;
  }

  result.exit_code = outcome.pass ? kExitPass : kExitCheckFailed;
  result.diagnostics = outcome.warnings;
  OrderedJson manifest;
  manifest["tool"] = "qsflow";
  manifest["version"] = kVersion;
  manifest["command"] = command;
  manifest["config"] = ctx.resolved;
  if (!outcome.rng.empty()) manifest["rng"] = outcome.rng;
  manifest["warnings"] = outcome.warnings;
  manifest["pass"] = outcome.pass;
  manifest["exit_code"] = result.exit_code;
  if (format == "csv") {
    manifest["summary"] = outcome.report;
    manifest["summary"].erase("records");
    manifest["summary"].erase("rows");
    result.document = outcome.csv;
    result.manifest = manifest.dump(2) + "\n";
  } else {
    OrderedJson doc;
    doc["manifest"] = manifest;
    doc["report"] = outcome.report;
    result.document = doc.dump(2) + "\n";
    result.manifest = manifest.dump(2) + "\n";
  }
  return result;
}

}  // namespace qsf::commands
