#pragma once

// Codebook construction: density-clustered initialization and the iterative
// rate-distortion loop (reconstruction scoring + split/merge refinement).

#include <memory>
#include <string>
#include <vector>

#include "core/types.hpp"
#include "gateway/gateway.hpp"

namespace valign {

struct OptimizerConfig {
  int N1 = 3;              // code sets kept per document
  int N2 = 3;              // reconstruction trials per set
  int M = 3;               // codes per sampled set
  int T = 10;              // max iterations
  double beta1 = 0.3;
  double beta2 = 0.08;
  double tau1 = 1.0;       // stop when S(C) exceeds this
  double tau2 = 0.9;       // noise-attach similarity
  double merge_sim = 0.9;  // cluster-merge centroid cosine
  int min_cluster_size = 5;
  double under_z = -0.5;   // usage z below this merges
  double over_z = 1.0;     // usage z above this is overutilized
  double split_improvement = 0.01;  // relative distortion improvement gate
  int reduce_dim = 5;      // clustering-space dimensionality
  std::string reducer = "pca";  // "pca" | "none" (cluster in the full space)
  int global_entropy_sign = +1;  // +1 subtracts the beta2 coverage term; -1 adds it instead
  double sampling_floor = 0.01;
  std::uint64_t seed = 0;
  int workers = 4;         // reconstruction fan-out
};

// Terms of the codebook score:
//   total = -(distortion_term - beta1*M*per_doc_entropy_term)
//           - sign*beta2*M*global_entropy_term
struct ScoreBreakdown {
  double distortion_term = 0.0;       // (1/N) sum_i sum_j w_ij d_ij
  double per_doc_entropy_term = 0.0;  // (1/N) sum_i H_q(z|x_i)
  double global_entropy_term = 0.0;   // H over normalized usage
  double total = 0.0;
};

struct DistortionRecord {
  std::string doc_id;
  CodeIndexSet code_set;
  double d = 0.0;
  double q_weight = 0.0;  // renormalized q_w(s|x) across the kept sets
};

struct ReconstructionOutput {
  std::vector<DistortionRecord> records;
  std::vector<double> usage;  // n_k
  ScoreBreakdown score;
  std::vector<std::string> skipped_docs;  // documents with zero expressions
};

struct RefineOutput {
  Codebook codebook;
  bool refined = false;                // false when usage had zero variance
  std::vector<std::string> actions;    // human-readable log of splits/merges
};

struct OptimizeResult {
  Codebook codebook;
  std::vector<ScoreBreakdown> scores;
  std::vector<std::string> skipped_docs;
};

// A document together with its extracted, embedded value expressions.
struct CodedDocument {
  Document doc;
  std::vector<ValueExpression> expressions;
};
using CodedCorpus = std::vector<CodedDocument>;

// Extracts and embeds expressions for every document (cached by the gateway).
CodedCorpus code_corpus(const Corpus& corpus, Gateway& gateway);

// Initialization: reduce, density-cluster, attach/spawn noise, merge near
// clusters, then name every code. Centroids live in the original space.
Codebook init_codebook(const std::vector<ValueExpression>& exprs, const OptimizerConfig& cfg,
                       Gateway& gateway);

// d(x|s) = -(1/N2) sum_n cos(e_x, e_xhat_n); lower is better.
// `probs_over_set` weights the code names shown to the decoder; pass empty
// for uniform weights.
double distortion(const Document& doc, const CodeIndexSet& code_set, const Codebook& codebook,
                  const OptimizerConfig& cfg, Gateway& gateway,
                  const std::vector<double>& probs_over_set = {});

ReconstructionOutput reconstruction_step(const CodedCorpus& corpus, const Codebook& codebook,
                                         const OptimizerConfig& cfg, Gateway& gateway,
                                         int iteration = 1);

RefineOutput refine_step(const Codebook& codebook, const std::vector<DistortionRecord>& records,
                         const std::vector<double>& usage, const OptimizerConfig& cfg,
                         Gateway& gateway);

// Full Algorithm: init once, then alternate reconstruction/refinement until
// S(C) > tau1 or the iteration cap. When checkpoint_dir is set, every
// iteration is persisted and optimize resumes from the newest checkpoint.
OptimizeResult optimize(const CodedCorpus& corpus, const OptimizerConfig& cfg, Gateway& gateway,
                        const std::string& checkpoint_dir = "");

// Mean distortion per code over records whose set contains it (NaN when a
// code appears in no record). Exposed for refine bookkeeping and tests.
std::vector<double> per_code_distortion(const Codebook& codebook,
                                        const std::vector<DistortionRecord>& records);

}  // namespace valign
