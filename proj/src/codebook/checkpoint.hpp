#pragma once

#include <optional>
#include <string>
#include <vector>

#include "codebook/builder.hpp"
#include "core/types.hpp"

namespace valign {

struct CheckpointData {
  Codebook codebook;
  std::vector<ScoreBreakdown> scores;
  int iteration = 0;
  bool stopped = false;
};

// Checkpoints are JSON documents holding the iteration index, a config echo,
// and per-code state (centroid, members with embeddings, usage, distortion
// history), so optimization can resume without re-deriving anything.
void save_checkpoint(const std::string& path, const Codebook& codebook,
                     const OptimizerConfig& cfg, const std::vector<ScoreBreakdown>& scores,
                     bool stopped);

CheckpointData load_checkpoint(const std::string& path);

// Newest iter_*.json in dir, if any.
std::optional<std::string> latest_checkpoint(const std::string& dir);

// Stable identifier derived from the serialized codes; reports reference it.
std::string codebook_content_id(const Codebook& codebook);

}  // namespace valign
