/*
 * valign — corpus value-alignment measurement toolkit, C API.
 *
 * All functions return va_status; VA_OK on success. On failure,
 * va_last_error() returns a thread-local description of the most recent
 * error. Objects are opaque handles released with their _close function.
 */

#ifndef VALIGN_VALIGN_H
#define VALIGN_VALIGN_H

#include <stddef.h>
#include <stdint.h>

#ifndef VALIGN_API
#if defined(_WIN32)
#define VALIGN_API __declspec(dllimport)
#elif defined(__GNUC__)
#define VALIGN_API __attribute__((visibility("default")))
#else
#define VALIGN_API
#endif
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum va_status {
  VA_OK = 0,
  VA_ERR_INVALID_ARGUMENT = 1,
  VA_ERR_DEGENERATE = 2,
  VA_ERR_PARSE = 3,
  VA_ERR_TRANSPORT = 4,
  VA_ERR_IO = 5,
  VA_ERR_INTERNAL = 6
} va_status;

VALIGN_API const char* va_version(void);

/* Thread-local message for the last failing call on this thread. */
VALIGN_API const char* va_last_error(void);

/* ---- run configuration ---- */

typedef struct va_config va_config;

VALIGN_API va_status va_config_open(const char* path, va_config** out);
VALIGN_API va_status va_config_parse(const char* json_text, va_config** out);
/* Sets a dotted key (e.g. "optimizer.T") to a JSON value ("5", "\"x\""). */
VALIGN_API va_status va_config_set(va_config* cfg, const char* dotted_key, const char* json_value);
VALIGN_API va_status va_config_hash(const va_config* cfg, char* buf, size_t bufsize);
VALIGN_API void va_config_close(va_config* cfg);

/* ---- corpora and codebooks ---- */

typedef struct va_corpus va_corpus;

VALIGN_API va_status va_corpus_open(const char* path, const char* group, va_corpus** out);
VALIGN_API size_t va_corpus_size(const va_corpus* corpus);
VALIGN_API void va_corpus_close(va_corpus* corpus);

typedef struct va_codebook va_codebook;

VALIGN_API va_status va_codebook_open(const char* checkpoint_path, va_codebook** out);
VALIGN_API size_t va_codebook_size(const va_codebook* codebook); /* K */
VALIGN_API va_status va_codebook_code_name(const va_codebook* codebook, size_t index, char* buf,
                                size_t bufsize);
VALIGN_API va_status va_codebook_id(const va_codebook* codebook, char* buf, size_t bufsize);
VALIGN_API void va_codebook_close(va_codebook* codebook);

/* ---- pipeline commands ---- */

/* Extracts value expressions for every configured corpus into out_path. */
VALIGN_API va_status va_run_extract(va_config* cfg, const char* out_path);

/* Builds the codebook; writes the final checkpoint path into the buffer. */
VALIGN_API va_status va_run_build_codebook(va_config* cfg, char* checkpoint_path_buf, size_t bufsize);

/* Scores every (examinee, reference) pair into a line-delimited report. */
VALIGN_API va_status va_run_evaluate(va_config* cfg, const char* codebook_path,
                          const char* out_report_path);

/* Runs the validity/reliability suite over a score cube file. */
VALIGN_API va_status va_run_validate(va_config* cfg, const char* cube_path, const char* out_report_path);

/* Renders a line-delimited report as an aligned text table. Free the
 * returned string with va_string_free. */
VALIGN_API va_status va_render_report(const char* report_path, char** out_text);
VALIGN_API void va_string_free(char* text);

/* ---- direct numeric entry points ---- */

/* Debiased unbalanced-transport divergence between two length-k histograms
 * under a k*k row-major cost matrix. metric_cfg_json may be NULL for
 * defaults (epsilon 0.01, gamma 0.5). Outputs may be NULL if not needed. */
VALIGN_API va_status va_debiased_uot(const double* a, const double* b, const double* cost, size_t k,
                          const char* metric_cfg_json, double* out_d_uot, double* out_r);

VALIGN_API va_status va_pearson(const double* x, const double* y, size_t n, double* out);

/* data is subjects*items, row-major. */
VALIGN_API va_status va_cronbach_alpha(const double* data, size_t subjects, size_t items, double* out);

VALIGN_API va_status va_cohen_kappa(const char* const* labels_a, const char* const* labels_b, size_t n,
                         double* out);

VALIGN_API va_status va_coefficient_of_variation(const double* x, size_t n, double* out);

VALIGN_API va_status va_shannon_entropy(const double* p, size_t n, double* out);

VALIGN_API va_status va_priming_delta(double r_control, double r_steered, double* out);

#ifdef __cplusplus
} /* extern "C" */
#endif

#endif /* VALIGN_VALIGN_H */
