/* C interface to the qsflow library. All functions are thread-safe; error
 * details for the calling thread are available from qsf_last_error(). */
#ifndef QSFLOW_QSFLOW_H
#define QSFLOW_QSFLOW_H

#include <stddef.h>
#include <stdint.h>

#if defined(QSF_BUILDING_LIBRARY)
#define QSF_API __attribute__((visibility("default")))
#else
#define QSF_API
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum qsf_status {
  QSF_OK = 0,
  QSF_ERR_INVALID_ARGUMENT = 1,
  QSF_ERR_DIMENSION_MISMATCH = 2,
  QSF_ERR_MULTIPLICITY_MISMATCH = 3,
  QSF_ERR_NOT_HERMITIAN = 4,
  QSF_ERR_NOT_PSD = 5,
  QSF_ERR_BASIS_NOT_SPANNING = 6,
  QSF_ERR_STEP_TOO_LARGE = 7,
  QSF_ERR_INSUFFICIENT_DATA = 8,
  QSF_ERR_CONFIG = 9,
  QSF_ERR_BUFFER_TOO_SMALL = 10,
  QSF_ERR_INTERNAL = 11
} qsf_status;

typedef enum qsf_class {
  QSF_CLASS_FILTERING = 0,
  QSF_CLASS_SUBFILTERING = 1,
  QSF_CLASS_CONTRACTIVE = 2,
  QSF_CLASS_NONE = 3
} qsf_class;

typedef struct qsf_dissipativity {
  qsf_class cls;
  int contractive;
  double lambda_I_min;
  double block_lambda_I_min;
  double D_norm;
} qsf_dissipativity;

typedef struct qsf_model qsf_model;
typedef struct qsf_result qsf_result;

typedef struct qsf_run_options {
  const char* format; /* "json", "csv" or NULL for the command default */
  int has_seed;
  uint64_t seed;
  unsigned threads; /* 0: hardware concurrency */
} qsf_run_options;

QSF_API const char* qsf_version(void);
QSF_API const char* qsf_status_string(qsf_status status);
/* Message of the last failed call on this thread, "" if none. */
QSF_API const char* qsf_last_error(void);

/* Parses a generator model from its JSON form
 * {"dim", "multiplicity", "K", "K_list", "kraus"}. */
QSF_API qsf_status qsf_model_from_json(const char* json, qsf_model** out);
QSF_API void qsf_model_free(qsf_model* model);
QSF_API qsf_status qsf_model_dims(const qsf_model* model, size_t* dim, size_t* multiplicity,
                                  size_t* kraus_count);

/* Lindblad generator as a d^2 x d^2 matrix on column-stacked vectors,
 * written row-major with interleaved real and imaginary parts
 * (out_len >= 2 d^4 doubles). schroedinger != 0 selects the dual. */
QSF_API qsf_status qsf_model_lindblad(const qsf_model* model, int schroedinger, double* out,
                                      size_t out_len);

/* Heisenberg semigroup exp(t lambda) in the same layout. steps = 0 with
 * exact != 0 uses the matrix exponential; otherwise RK4 with `steps`
 * steps (0: ceil(1000 t)). */
QSF_API qsf_status qsf_model_semigroup(const qsf_model* model, double t, size_t steps,
                                       int exact, double* out, size_t out_len);

QSF_API qsf_status qsf_model_classify(const qsf_model* model, double tol,
                                      qsf_dissipativity* out);

/* Conditional complete positivity of the germ on the matrix-unit basis. */
QSF_API qsf_status qsf_model_ccp_check(const qsf_model* model, double tol, int* pass,
                                       double* min_eig);

/* Runs one subcommand (see qsflow --help) on a JSON config text. A
 * result is produced for every command outcome, including config
 * errors; the status is non-OK only for invalid arguments. */
QSF_API qsf_status qsf_command_run(const char* command, const char* config_json,
                                   const qsf_run_options* options, qsf_result** out);
QSF_API int qsf_result_exit_code(const qsf_result* result);
QSF_API const char* qsf_result_format(const qsf_result* result);
QSF_API const char* qsf_result_document(const qsf_result* result);
QSF_API const char* qsf_result_manifest(const qsf_result* result);
QSF_API size_t qsf_result_diagnostic_count(const qsf_result* result);
/* "" when index is out of range. */
QSF_API const char* qsf_result_diagnostic(const qsf_result* result, size_t index);
QSF_API void qsf_result_free(qsf_result* result);

#ifdef __cplusplus
}
#endif

#endif /* QSFLOW_QSFLOW_H */
