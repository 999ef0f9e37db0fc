#include "qsflow/json_io.hpp"

#include <charconv>
#include <cmath>
#include <set>

#include "qsflow/error.hpp"

namespace qsf::json_io {

namespace {

[[noreturn]] void config_error(const std::string& where, const std::string& what) {
  fail(ErrorCode::kConfig, where + ": " + what);
}

}  // namespace

void check_keys(const Json& obj, std::initializer_list<const char*> allowed,
                const std::string& where) {
  if (!obj.is_object()) config_error(where, "expected an object");
  const std::set<std::string> names(allowed.begin(), allowed.end());
  for (const auto& item : obj.items()) {
    if (names.count(item.key()) == 0) config_error(where, "unknown key \"" + item.key() + "\"");
  }
}

double real_from(const Json& j, const std::string& where) {
  if (!j.is_number()) config_error(where, "expected a number");
  const double x = j.get<double>();
  if (!std::isfinite(x)) config_error(where, "number is not finite");
  return x;
}

std::size_t count_from(const Json& j, const std::string& where) {
  if (!j.is_number_integer() && !j.is_number_unsigned()) {
    config_error(where, "expected a non-negative integer");
  }
  if (j.is_number_integer() && j.get<long long>() < 0) {
    config_error(where, "expected a non-negative integer");
  }
  return j.get<std::size_t>();
}

std::vector<double> reals_from(const Json& j, const std::string& where) {
  if (!j.is_array()) config_error(where, "expected an array of numbers");
  std::vector<double> out;
  for (std::size_t i = 0; i < j.size(); ++i) {
    out.push_back(real_from(j[i], where + "[" + std::to_string(i) + "]"));
  }
  return out;
}

Complex complex_from(const Json& j, const std::string& where) {
  if (j.is_number()) return {real_from(j, where), 0.0};
  if (!j.is_array() || j.size() != 2) config_error(where, "expected [re, im] or a number");
  return {real_from(j[0], where), real_from(j[1], where)};
}

ComplexMatrix matrix_from(const Json& j, const std::string& where) {
  if (!j.is_array() || j.empty()) config_error(where, "expected a non-empty array of rows");
  const auto rows = static_cast<Eigen::Index>(j.size());
  if (!j[0].is_array()) config_error(where, "expected rows to be arrays");
  const auto cols = static_cast<Eigen::Index>(j[0].size());
  ComplexMatrix a(rows, cols);
  for (Eigen::Index r = 0; r < rows; ++r) {
    const Json& row = j[static_cast<std::size_t>(r)];
    if (!row.is_array() || static_cast<Eigen::Index>(row.size()) != cols) {
      config_error(where, "rows have different lengths");
    }
    for (Eigen::Index c = 0; c < cols; ++c) {
      a(r, c) = complex_from(row[static_cast<std::size_t>(c)],
                             where + "[" + std::to_string(r) + "][" + std::to_string(c) + "]");
    }
  }
  return a;
}

ComplexVector vector_from(const Json& j, const std::string& where) {
  if (!j.is_array()) config_error(where, "expected an array of complex entries");
  ComplexVector v(static_cast<Eigen::Index>(j.size()));
  for (std::size_t i = 0; i < j.size(); ++i) {
    v(static_cast<Eigen::Index>(i)) = complex_from(j[i], where + "[" + std::to_string(i) + "]");
  }
  return v;
}

ItoQuadruple quadruple_from(const Json& j, const std::string& where) {
  check_keys(j, {"m", "exchange", "creation", "annihilation", "time"}, where);
  if (!j.contains("m")) config_error(where, "missing \"m\"");
  const auto m = static_cast<Eigen::Index>(count_from(j["m"], where + ".m"));
  ComplexMatrix ex = ComplexMatrix::Zero(m, m);
  ComplexMatrix cr = ComplexMatrix::Zero(m, 1);
  ComplexMatrix an = ComplexMatrix::Zero(1, m);
  Complex time{};
  if (j.contains("exchange")) ex = matrix_from(j["exchange"], where + ".exchange");
  if (j.contains("creation")) cr = matrix_from(j["creation"], where + ".creation");
  if (j.contains("annihilation")) an = matrix_from(j["annihilation"], where + ".annihilation");
  if (j.contains("time")) time = complex_from(j["time"], where + ".time");
  if (ex.rows() != m || ex.cols() != m || cr.rows() != m || cr.cols() != 1 || an.rows() != 1 ||
      an.cols() != m) {
    config_error(where, "block shapes do not match m");
  }
  return {ex, cr, an, time};
}

StepFunction step_from(const Json& j, const std::string& where) {
  check_keys(j, {"m", "breakpoints", "values"}, where);
  if (!j.contains("m")) config_error(where, "missing \"m\"");
  const auto m = static_cast<Eigen::Index>(count_from(j["m"], where + ".m"));
  std::vector<double> bp{0.0};
  std::vector<ItoQuadruple> values;
  if (j.contains("breakpoints")) bp = reals_from(j["breakpoints"], where + ".breakpoints");
  if (j.contains("values")) {
    const Json& vals = j["values"];
    if (!vals.is_array()) config_error(where + ".values", "expected an array");
    for (std::size_t i = 0; i < vals.size(); ++i) {
      Json q = vals[i];
      if (q.is_object() && !q.contains("m")) q["m"] = m;
      values.push_back(quadruple_from(q, where + ".values[" + std::to_string(i) + "]"));
    }
  }
  try {
    return {m, bp, values};
  } catch (const Error& e) {
    config_error(where, e.what());
  }
}

PiecewiseCoherent coherent_from(const Json& j, const std::string& where) {
  check_keys(j, {"m", "breakpoints", "amplitudes", "prefactor"}, where);
  if (!j.contains("m")) config_error(where, "missing \"m\"");
  const auto m = static_cast<Eigen::Index>(count_from(j["m"], where + ".m"));
  std::vector<double> bp{0.0};
  std::vector<ComplexVector> amps;
  Complex prefactor{1.0};
  if (j.contains("breakpoints")) bp = reals_from(j["breakpoints"], where + ".breakpoints");
  if (j.contains("amplitudes")) {
    const Json& a = j["amplitudes"];
    if (!a.is_array()) config_error(where + ".amplitudes", "expected an array");
    for (std::size_t i = 0; i < a.size(); ++i) {
      amps.push_back(vector_from(a[i], where + ".amplitudes[" + std::to_string(i) + "]"));
    }
  }
  if (j.contains("prefactor")) prefactor = complex_from(j["prefactor"], where + ".prefactor");
  try {
    return {m, bp, amps, prefactor};
  } catch (const Error& e) {
    config_error(where, e.what());
  }
}

GermModel model_from(const Json& j, const std::string& where) {
  check_keys(j, {"dim", "multiplicity", "K", "K_list", "kraus"}, where);
  for (const char* key : {"dim", "multiplicity", "K"}) {
    if (!j.contains(key)) config_error(where, std::string("missing \"") + key + "\"");
  }
  const auto d = static_cast<Eigen::Index>(count_from(j["dim"], where + ".dim"));
  const auto m = static_cast<Eigen::Index>(count_from(j["multiplicity"], where + ".multiplicity"));
  const ComplexMatrix k = matrix_from(j["K"], where + ".K");
  std::vector<ComplexMatrix> k_list;
  if (j.contains("K_list")) {
    const Json& kl = j["K_list"];
    if (!kl.is_array()) config_error(where + ".K_list", "expected an array");
    for (std::size_t i = 0; i < kl.size(); ++i) {
      k_list.push_back(matrix_from(kl[i], where + ".K_list[" + std::to_string(i) + "]"));
    }
  } else {
    k_list.assign(static_cast<std::size_t>(m), ComplexMatrix::Zero(d, d));
  }
  std::vector<KrausTerm> kraus;
  if (j.contains("kraus")) {
    const Json& kr = j["kraus"];
    if (!kr.is_array()) config_error(where + ".kraus", "expected an array");
    for (std::size_t i = 0; i < kr.size(); ++i) {
      const std::string w = where + ".kraus[" + std::to_string(i) + "]";
      check_keys(kr[i], {"plus", "noise"}, w);
      KrausTerm term;
      term.plus = kr[i].contains("plus") ? matrix_from(kr[i]["plus"], w + ".plus")
                                         : ComplexMatrix::Zero(d, d);
      if (kr[i].contains("noise")) {
        const Json& nz = kr[i]["noise"];
        if (!nz.is_array()) config_error(w + ".noise", "expected an array");
        for (std::size_t n = 0; n < nz.size(); ++n) {
          term.noise.push_back(matrix_from(nz[n], w + ".noise[" + std::to_string(n) + "]"));
        }
      } else {
        term.noise.assign(static_cast<std::size_t>(m), ComplexMatrix::Zero(d, d));
      }
      kraus.push_back(std::move(term));
    }
  }
  try {
    return {d, m, k, k_list, kraus};
  } catch (const Error& e) {
    config_error(where, e.what());
  }
}

OrderedJson to_json(Complex z) { return OrderedJson::array({z.real(), z.imag()}); }

OrderedJson to_json(const ComplexMatrix& a) {
  OrderedJson rows = OrderedJson::array();
  for (Eigen::Index r = 0; r < a.rows(); ++r) {
    OrderedJson row = OrderedJson::array();
    for (Eigen::Index c = 0; c < a.cols(); ++c) row.push_back(to_json(a(r, c)));
    rows.push_back(std::move(row));
  }
  return rows;
}

OrderedJson vector_to_json(const ComplexVector& v) {
  OrderedJson out = OrderedJson::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) out.push_back(to_json(v(i)));
  return out;
}

OrderedJson to_json(const ItoQuadruple& a) {
  OrderedJson j;
  j["m"] = a.multiplicity();
  j["exchange"] = to_json(a.exchange());
  j["creation"] = to_json(a.creation());
  j["annihilation"] = to_json(a.annihilation());
  j["time"] = to_json(a.time());
  return j;
}

OrderedJson to_json(const StepFunction& g) {
  OrderedJson j;
  j["m"] = g.multiplicity();
  j["breakpoints"] = g.breakpoints();
  OrderedJson values = OrderedJson::array();
  for (const auto& v : g.values()) values.push_back(to_json(v));
  j["values"] = std::move(values);
  return j;
}

OrderedJson to_json(const PiecewiseCoherent& f) {
  OrderedJson j;
  j["m"] = f.multiplicity();
  j["breakpoints"] = f.breakpoints();
  OrderedJson amps = OrderedJson::array();
  for (const auto& v : f.amplitudes()) amps.push_back(vector_to_json(v));
  j["amplitudes"] = std::move(amps);
  j["prefactor"] = to_json(f.prefactor());
  return j;
}

OrderedJson to_json(const GermModel& model) {
  OrderedJson j;
  j["dim"] = model.dim();
  j["multiplicity"] = model.multiplicity();
  j["K"] = to_json(model.K());
  OrderedJson kl = OrderedJson::array();
  for (const auto& k : model.K_list()) kl.push_back(to_json(k));
  j["K_list"] = std::move(kl);
  OrderedJson kraus = OrderedJson::array();
  for (const auto& term : model.kraus()) {
    OrderedJson t;
    t["plus"] = to_json(term.plus);
    OrderedJson noise = OrderedJson::array();
    for (const auto& l : term.noise) noise.push_back(to_json(l));
    t["noise"] = std::move(noise);
    kraus.push_back(std::move(t));
  }
  j["kraus"] = std::move(kraus);
  return j;
}

std::string format_double(double x) {
  if (std::isnan(x)) return "nan";
  if (std::isinf(x)) return x > 0 ? "inf" : "-inf";
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, x);
  return {buf, res.ptr};
}

}  // namespace qsf::json_io
