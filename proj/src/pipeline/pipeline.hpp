#pragma once

// End-to-end orchestration behind the CLI subcommands: corpus ingestion,
// codebook build, examinee generation, evaluation, and validity reports.

#include <string>
#include <vector>

#include "pipeline/config.hpp"

namespace valign {

struct BuildOutput {
  std::string checkpoint_path;
  std::string codebook_id;
  int iterations = 0;
  double final_score = 0.0;
  int K = 0;
};

// Extracts (via cache), embeds, optimizes, and writes the final checkpoint
// plus a per-iteration score log under cfg.output_dir.
BuildOutput cmd_build_codebook(const RunConfig& cfg);

// Dumps extracted expressions for every configured corpus as line-delimited
// records (also warms the reply cache). Returns the output path.
std::string cmd_extract(const RunConfig& cfg, const std::string& out_path);

struct EvaluationRecord {
  std::string examinee;
  std::string reference;
  int K = 0;
  double epsilon = 0.0, gamma = 0.0;
  double d_uot = 0.0, r = 0.0, r_display = 0.0;
  bool converged = false;
  int iters_used = 0;
  int skipped_examinee_docs = 0, skipped_reference_docs = 0;
  std::string codebook_id, config_hash;
};

struct EvaluationReport {
  std::vector<EvaluationRecord> records;
  std::string report_path;
};

// Scores every (examinee, reference) pair: recognizes all documents, builds
// histograms, derives the cost matrix from the reference corpus, and emits
// debiased divergences with both rescalings. Partial progress is flushed to
// a resume manifest next to the report.
EvaluationReport cmd_evaluate(const RunConfig& cfg, const std::string& codebook_path,
                              const std::string& out_report_path);

// Runs every applicable validity/reliability statistic over a score cube
// ({method, group, model, score} lines) and writes a combined report.
// Degenerate statistics are reported per cell; the run continues.
std::string cmd_validate(const RunConfig& cfg, const std::string& cube_path,
                         const std::string& out_report_path);

// Seeded topic subset (cfg.topic_fraction of the configured topics), stable
// across runs for the robustness studies.
std::vector<std::string> select_topics(const RunConfig& cfg);

}  // namespace valign
