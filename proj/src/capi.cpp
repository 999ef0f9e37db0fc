#include "qsflow/qsflow.h"

#include <exception>
#include <new>
#include <string>

#include "qsflow/commands.hpp"
#include "qsflow/error.hpp"
#include "qsflow/flows.hpp"
#include "qsflow/generators.hpp"
#include "qsflow/json_io.hpp"

struct qsf_model {
  qsf::GermModel model;
};

struct qsf_result {
  qsf::commands::RunResult run;
};

namespace {

thread_local std::string last_error;

qsf_status status_of(qsf::ErrorCode code) {
  using qsf::ErrorCode;
  switch (code) {
    case ErrorCode::kInvalidArgument:
      return QSF_ERR_INVALID_ARGUMENT;
    case ErrorCode::kDimensionMismatch:
      return QSF_ERR_DIMENSION_MISMATCH;
    case ErrorCode::kMultiplicityMismatch:
      return QSF_ERR_MULTIPLICITY_MISMATCH;
    case ErrorCode::kNotHermitian:
      return QSF_ERR_NOT_HERMITIAN;
    case ErrorCode::kNotPSD:
      return QSF_ERR_NOT_PSD;
    case ErrorCode::kBasisNotSpanning:
      return QSF_ERR_BASIS_NOT_SPANNING;
    case ErrorCode::kStepTooLarge:
      return QSF_ERR_STEP_TOO_LARGE;
    case ErrorCode::kInsufficientData:
      return QSF_ERR_INSUFFICIENT_DATA;
    case ErrorCode::kConfig:
      return QSF_ERR_CONFIG;
  }
  return QSF_ERR_INTERNAL;
}

qsf_status set_error(qsf_status status, const std::string& what) {
  last_error = what;
  return status;
}

/// Runs `body`, translating exceptions into status codes.
template <typename F>
qsf_status guarded(F&& body) {
  try {
    last_error.clear();
    return body();
  } catch (const qsf::Error& e) {
    return set_error(status_of(e.code()), e.what());
  } catch (const std::bad_alloc&) {
    return set_error(QSF_ERR_INTERNAL, "out of memory");
  } catch (const std::exception& e) {
    return set_error(QSF_ERR_INTERNAL, e.what());
  }
}

qsf_status write_matrix(const qsf::ComplexMatrix& m, double* out, size_t out_len) {
  const auto needed = static_cast<size_t>(2 * m.size());
  if (out == nullptr || out_len < needed) {
    return set_error(QSF_ERR_BUFFER_TOO_SMALL,
                     "output buffer needs " + std::to_string(needed) + " doubles");
  }
  size_t k = 0;
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    for (Eigen::Index c = 0; c < m.cols(); ++c) {
      out[k++] = m(r, c).real();
      out[k++] = m(r, c).imag();
    }
  }
  return QSF_OK;
}

}  // namespace

extern "C" {

const char* qsf_version(void) { return qsf::commands::kVersion; }

const char* qsf_status_string(qsf_status status) {
  switch (status) {
    case QSF_OK:
      return "ok";
    case QSF_ERR_INVALID_ARGUMENT:
      return "invalid argument";
    case QSF_ERR_DIMENSION_MISMATCH:
      return "dimension mismatch";
    case QSF_ERR_MULTIPLICITY_MISMATCH:
      return "multiplicity mismatch";
    case QSF_ERR_NOT_HERMITIAN:
      return "not Hermitian";
    case QSF_ERR_NOT_PSD:
      return "not positive semidefinite";
    case QSF_ERR_BASIS_NOT_SPANNING:
      return "basis does not span";
    case QSF_ERR_STEP_TOO_LARGE:
      return "step too large";
    case QSF_ERR_INSUFFICIENT_DATA:
      return "insufficient data";
    case QSF_ERR_CONFIG:
      return "config error";
    case QSF_ERR_BUFFER_TOO_SMALL:
      return "buffer too small";
    case QSF_ERR_INTERNAL:
      return "internal error";
  }
  return "unknown status";
}

const char* qsf_last_error(void) { return last_error.c_str(); }

qsf_status qsf_model_from_json(const char* json, qsf_model** out) {
  if (json == nullptr || out == nullptr) {
    return set_error(QSF_ERR_INVALID_ARGUMENT, "null argument");
  }
  *out = nullptr;
  return guarded([&] {
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(json);
    } catch (const nlohmann::json::exception& e) {
      return set_error(QSF_ERR_CONFIG, std::string("invalid JSON: ") + e.what());
    }
    *out = new qsf_model{qsf::json_io::model_from(j, "model")};
    return QSF_OK;
  });
}

void qsf_model_free(qsf_model* model) { delete model; }

qsf_status qsf_model_dims(const qsf_model* model, size_t* dim, size_t* multiplicity,
                          size_t* kraus_count) {
  if (model == nullptr) return set_error(QSF_ERR_INVALID_ARGUMENT, "null model");
  if (dim != nullptr) *dim = static_cast<size_t>(model->model.dim());
  if (multiplicity != nullptr) *multiplicity = static_cast<size_t>(model->model.multiplicity());
  if (kraus_count != nullptr) *kraus_count = model->model.kraus().size();
  return QSF_OK;
}

qsf_status qsf_model_lindblad(const qsf_model* model, int schroedinger, double* out,
                              size_t out_len) {
  if (model == nullptr) return set_error(QSF_ERR_INVALID_ARGUMENT, "null model");
  return guarded([&] {
    const qsf::SuperOperator op = schroedinger != 0 ? qsf::lindblad_dual(model->model)
                                                    : qsf::lindblad_superop(model->model);
    return write_matrix(op.matrix, out, out_len);
  });
}

qsf_status qsf_model_semigroup(const qsf_model* model, double t, size_t steps, int exact,
                               double* out, size_t out_len) {
  if (model == nullptr) return set_error(QSF_ERR_INVALID_ARGUMENT, "null model");
  return guarded([&] {
    qsf::FlowOptions opts;
    opts.steps = steps;
    opts.integrator = exact != 0 ? qsf::Integrator::kExpm : qsf::Integrator::kRk4;
    return write_matrix(qsf::evolve_semigroup(model->model, t, opts).matrix, out, out_len);
  });
}

qsf_status qsf_model_classify(const qsf_model* model, double tol, qsf_dissipativity* out) {
  if (model == nullptr || out == nullptr) {
    return set_error(QSF_ERR_INVALID_ARGUMENT, "null argument");
  }
  return guarded([&] {
    const qsf::DissipativityReport r = qsf::classify(model->model, tol);
    out->cls = static_cast<qsf_class>(static_cast<int>(r.cls));
    out->contractive = r.contractive ? 1 : 0;
    out->lambda_I_min = r.lambda_I_min;
    out->block_lambda_I_min = r.block_lambda_I_min;
    out->D_norm = r.D_norm;
    return QSF_OK;
  });
}

qsf_status qsf_model_ccp_check(const qsf_model* model, double tol, int* pass, double* min_eig) {
  if (model == nullptr || pass == nullptr) {
    return set_error(QSF_ERR_INVALID_ARGUMENT, "null argument");
  }
  return guarded([&] {
    const qsf::CcpReport r = qsf::ccp_check(qsf::build_germ(model->model), {}, tol);
    *pass = r.pass ? 1 : 0;
    if (min_eig != nullptr) *min_eig = r.min_eig;
    return QSF_OK;
  });
}

qsf_status qsf_command_run(const char* command, const char* config_json,
                           const qsf_run_options* options, qsf_result** out) {
  if (command == nullptr || config_json == nullptr || out == nullptr) {
    return set_error(QSF_ERR_INVALID_ARGUMENT, "null argument");
  }
  *out = nullptr;
  return guarded([&] {
    qsf::commands::RunOptions opts;
    if (options != nullptr) {
      if (options->format != nullptr) opts.format = options->format;
      if (options->has_seed != 0) opts.seed = options->seed;
      opts.threads = options->threads;
    }
    *out = new qsf_result{qsf::commands::run(command, config_json, opts)};
    return QSF_OK;
  });
}

int qsf_result_exit_code(const qsf_result* result) {
  return result != nullptr ? result->run.exit_code : qsf::commands::kExitConfigError;
}

const char* qsf_result_format(const qsf_result* result) {
  return result != nullptr ? result->run.format.c_str() : "";
}

const char* qsf_result_document(const qsf_result* result) {
  return result != nullptr ? result->run.document.c_str() : "";
}

const char* qsf_result_manifest(const qsf_result* result) {
  return result != nullptr ? result->run.manifest.c_str() : "";
}

size_t qsf_result_diagnostic_count(const qsf_result* result) {
  return result != nullptr ? result->run.diagnostics.size() : 0;
}

const char* qsf_result_diagnostic(const qsf_result* result, size_t index) {
  if (result == nullptr || index >= result->run.diagnostics.size()) return "";
  return result->run.diagnostics[index].c_str();
}

void qsf_result_free(qsf_result* result) { delete result; }

}  // extern "C"
