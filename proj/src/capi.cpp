// extern "C" surface wrapping the C++ core: opaque handles, status codes,
// and a thread-local last-error message.

#include "valign/valign.h"

#include <cstring>
#include <string>

#include "codebook/checkpoint.hpp"
#include "core/error.hpp"
#include "core/math.hpp"
#include "pipeline/config.hpp"
#include "pipeline/corpus_io.hpp"
#include "pipeline/pipeline.hpp"
#include "pipeline/report.hpp"
#include "stats/validity.hpp"
#include "uot/metric.hpp"

using namespace valign;

namespace {

thread_local std::string g_last_error;

va_status to_status(ErrorCode code) {
  switch (code) {
    case ErrorCode::invalid_argument: return VA_ERR_INVALID_ARGUMENT;
    case ErrorCode::degenerate: return VA_ERR_DEGENERATE;
    case ErrorCode::parse: return VA_ERR_PARSE;
    case ErrorCode::transport: return VA_ERR_TRANSPORT;
    case ErrorCode::io: return VA_ERR_IO;
    case ErrorCode::internal: return VA_ERR_INTERNAL;
  }
  return VA_ERR_INTERNAL;
}

template <typename Fn>
va_status guarded(Fn&& fn) {
  try {
    fn();
    return VA_OK;
  } catch (const Error& e) {
    g_last_error = e.what();
    return to_status(e.code());
  } catch (const std::exception& e) {
    g_last_error = e.what();
    return VA_ERR_INTERNAL;
  } catch (...) {
    g_last_error = "unknown error";
    return VA_ERR_INTERNAL;
  }
}

va_status copy_out(const std::string& s, char* buf, size_t bufsize) {
  if (!buf || bufsize == 0) {
    g_last_error = "output buffer is null or empty";
    return VA_ERR_INVALID_ARGUMENT;
  }
  if (s.size() + 1 > bufsize) {
    g_last_error = "output buffer too small (" + std::to_string(s.size() + 1) + " bytes needed)";
    return VA_ERR_INVALID_ARGUMENT;
  }
  std::memcpy(buf, s.c_str(), s.size() + 1);
  return VA_OK;
}

va_status require(bool cond, const char* message) {
  if (cond) return VA_OK;
  g_last_error = message;
  return VA_ERR_INVALID_ARGUMENT;
}

}  // namespace

struct va_config {
  RunConfig cfg;
};
struct va_corpus {
  Corpus corpus;
};
struct va_codebook {
  CheckpointData data;
};

extern "C" {

const char* va_version(void) { return "0.1.0"; }

const char* va_last_error(void) { return g_last_error.c_str(); }

va_status va_config_open(const char* path, va_config** out) {
  if (auto s = require(path && out, "va_config_open: null argument")) return s;
  return guarded([&] { *out = new va_config{load_run_config(path)}; });
}

va_status va_config_parse(const char* json_text, va_config** out) {
  if (auto s = require(json_text && out, "va_config_parse: null argument")) return s;
  return guarded([&] { *out = new va_config{parse_run_config(json_text)}; });
}

va_status va_config_set(va_config* cfg, const char* dotted_key, const char* json_value) {
  if (auto s = require(cfg && dotted_key && json_value, "va_config_set: null argument")) return s;
  return guarded([&] { apply_override(cfg->cfg, dotted_key, json_value); });
}

va_status va_config_hash(const va_config* cfg, char* buf, size_t bufsize) {
  if (auto s = require(cfg != nullptr, "va_config_hash: null config")) return s;
  return copy_out(cfg->cfg.config_hash(), buf, bufsize);
}

void va_config_close(va_config* cfg) { delete cfg; }

va_status va_corpus_open(const char* path, const char* group, va_corpus** out) {
  if (auto s = require(path && group && out, "va_corpus_open: null argument")) return s;
  return guarded([&] { *out = new va_corpus{ingest_corpus(path, group).corpus}; });
}

size_t va_corpus_size(const va_corpus* corpus) { return corpus ? corpus->corpus.size() : 0; }

void va_corpus_close(va_corpus* corpus) { delete corpus; }

va_status va_codebook_open(const char* checkpoint_path, va_codebook** out) {
  if (auto s = require(checkpoint_path && out, "va_codebook_open: null argument")) return s;
  return guarded([&] { *out = new va_codebook{load_checkpoint(checkpoint_path)}; });
}

size_t va_codebook_size(const va_codebook* codebook) {
  return codebook ? codebook->data.codebook.size() : 0;
}

va_status va_codebook_code_name(const va_codebook* codebook, size_t index, char* buf,
                                size_t bufsize) {
  if (auto s = require(codebook != nullptr, "va_codebook_code_name: null codebook")) return s;
  if (index >= codebook->data.codebook.size()) {
    g_last_error = "code index out of range";
    return VA_ERR_INVALID_ARGUMENT;
  }
  return copy_out(codebook->data.codebook.codes[index].name, buf, bufsize);
}

va_status va_codebook_id(const va_codebook* codebook, char* buf, size_t bufsize) {
  if (auto s = require(codebook != nullptr, "va_codebook_id: null codebook")) return s;
  return copy_out(codebook_content_id(codebook->data.codebook), buf, bufsize);
}

void va_codebook_close(va_codebook* codebook) { delete codebook; }

va_status va_run_extract(va_config* cfg, const char* out_path) {
  if (auto s = require(cfg && out_path, "va_run_extract: null argument")) return s;
  return guarded([&] { cmd_extract(cfg->cfg, out_path); });
}

va_status va_run_build_codebook(va_config* cfg, char* checkpoint_path_buf, size_t bufsize) {
  if (auto s = require(cfg != nullptr, "va_run_build_codebook: null config")) return s;
  std::string path;
  va_status st = guarded([&] { path = cmd_build_codebook(cfg->cfg).checkpoint_path; });
  if (st != VA_OK) return st;
  if (checkpoint_path_buf) return copy_out(path, checkpoint_path_buf, bufsize);
  return VA_OK;
}

va_status va_run_evaluate(va_config* cfg, const char* codebook_path,
                          const char* out_report_path) {
  if (auto s = require(cfg && codebook_path && out_report_path, "va_run_evaluate: null argument"))
    return s;
  return guarded([&] { cmd_evaluate(cfg->cfg, codebook_path, out_report_path); });
}

va_status va_run_validate(va_config* cfg, const char* cube_path, const char* out_report_path) {
  if (auto s = require(cfg && cube_path && out_report_path, "va_run_validate: null argument"))
    return s;
  return guarded([&] { cmd_validate(cfg->cfg, cube_path, out_report_path); });
}

va_status va_render_report(const char* report_path, char** out_text) {
  if (auto s = require(report_path && out_text, "va_render_report: null argument")) return s;
  return guarded([&] {
    std::string text = render_report_file(report_path);
    char* owned = new char[text.size() + 1];
    std::memcpy(owned, text.c_str(), text.size() + 1);
    *out_text = owned;
  });
}

void va_string_free(char* text) { delete[] text; }

va_status va_debiased_uot(const double* a, const double* b, const double* cost, size_t k,
                          const char* metric_cfg_json, double* out_d_uot, double* out_r) {
  if (auto s = require(a && b && cost && k > 0, "va_debiased_uot: null input")) return s;
  return guarded([&] {
    MetricConfig cfg;
    if (metric_cfg_json && *metric_cfg_json) {
      auto j = nlohmann::json::parse(metric_cfg_json);
      cfg.epsilon = j.value("epsilon", cfg.epsilon);
      cfg.gamma = j.value("gamma", cfg.gamma);
      cfg.eps2 = j.value("eps2", cfg.eps2);
      cfg.sinkhorn_max_iters = j.value("sinkhorn_max_iters", cfg.sinkhorn_max_iters);
      cfg.eps0 = j.value("eps0", cfg.eps0);
      cfg.eps1 = j.value("eps1", cfg.eps1);
    }
    ValueHistogram ha, hb;
    ha.mass.assign(a, a + k);
    hb.mass.assign(b, b + k);
    CostMatrix cm;
    cm.D = Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic,
                                          Eigen::RowMajor>>(cost, k, k);
    double d = debiased_uot(ha, hb, cm, cfg);
    if (out_d_uot) *out_d_uot = d;
    if (out_r) *out_r = alignment_score(d).r;
  });
}

va_status va_pearson(const double* x, const double* y, size_t n, double* out) {
  if (auto s = require(x && y && out, "va_pearson: null argument")) return s;
  return guarded([&] { *out = pearson({x, n}, {y, n}); });
}

va_status va_cronbach_alpha(const double* data, size_t subjects, size_t items, double* out) {
  if (auto s = require(data && out, "va_cronbach_alpha: null argument")) return s;
  return guarded([&] {
    std::vector<std::vector<double>> matrix(subjects, std::vector<double>(items));
    for (size_t i = 0; i < subjects; ++i)
      for (size_t j = 0; j < items; ++j) matrix[i][j] = data[i * items + j];
    *out = cronbach_alpha(matrix);
  });
}

va_status va_cohen_kappa(const char* const* labels_a, const char* const* labels_b, size_t n,
                         double* out) {
  if (auto s = require(labels_a && labels_b && out, "va_cohen_kappa: null argument")) return s;
  return guarded([&] {
    std::vector<std::string> a(labels_a, labels_a + n), b(labels_b, labels_b + n);
    *out = cohen_kappa(a, b);
  });
}

va_status va_coefficient_of_variation(const double* x, size_t n, double* out) {
  if (auto s = require(x && out, "va_coefficient_of_variation: null argument")) return s;
  return guarded([&] { *out = coefficient_of_variation({x, n}); });
}

va_status va_shannon_entropy(const double* p, size_t n, double* out) {
  if (auto s = require(p && out, "va_shannon_entropy: null argument")) return s;
  return guarded([&] { *out = shannon_entropy({p, n}); });
}

va_status va_priming_delta(double r_control, double r_steered, double* out) {
  if (auto s = require(out != nullptr, "va_priming_delta: null output")) return s;
  return guarded([&] { *out = priming_delta(r_control, r_steered); });
}

}  // extern "C"
