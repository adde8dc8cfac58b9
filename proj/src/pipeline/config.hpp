#pragma once

#include <json.hpp>

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "codebook/builder.hpp"
#include "gateway/gateway.hpp"
#include "recognizer/recognizer.hpp"
#include "stats/validity.hpp"
#include "uot/metric.hpp"

namespace valign {

struct ExamineeGenSpec {
  std::string label;
  std::optional<std::string> role;  // role-priming group; absent = plain
  int docs_per_topic = 1;
};

struct ValidateConfig {
  CulturePairSets pairs;
  std::string control_label = "control";
  bool fisher_z = false;
  std::vector<std::string> retest_cubes;  // repeated-measurement cubes
  std::string labels_file;                // annotator labels for kappa
};

// Full run description. `raw` is the effective JSON (defaults merged with the
// file and overrides); it is echoed into outputs and hashed for traceability.
struct RunConfig {
  std::uint64_t seed = 0;
  std::string output_dir = "out";
  std::map<std::string, std::string> corpora;           // group -> corpus path
  std::map<std::string, std::string> examinee_corpora;  // label -> corpus path
  std::vector<std::string> training_groups;             // default: every corpus
  std::vector<std::string> reference_groups;            // default: every corpus
  std::vector<std::string> topics;
  double topic_fraction = 1.0;
  bool topic_weighted = false;  // average per topic first, then over topics
  std::vector<ExamineeGenSpec> examinee_generation;
  GatewayProfiles gateway;
  OptimizerConfig optimizer;
  MetricConfig metric;
  RecognizerParams recognizer;  // sigma2 <= 0 means estimate from the codebook
  ValidateConfig validate;
  nlohmann::json raw;
  std::string base_dir = ".";  // directory relative paths resolve against

  std::string config_hash() const;
};

RunConfig load_run_config(const std::string& path);
RunConfig parse_run_config(const std::string& json_text, const std::string& base_dir = ".");

// Sets a dotted key (e.g. "optimizer.T") to a JSON value and re-derives the
// typed fields. Flag values win over file values which win over defaults.
void apply_override(RunConfig& cfg, const std::string& dotted_key,
                    const std::string& json_value);

}  // namespace valign
