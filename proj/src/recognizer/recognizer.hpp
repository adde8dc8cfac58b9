#pragma once

// The value recognizer q_w: maps embedded value expressions, documents, and
// corpora to distributions over codebook codes via temperature-scaled soft
// assignment, plus without-replacement code-set sampling.

#include <span>
#include <vector>

#include "core/rng.hpp"
#include "core/types.hpp"

namespace valign {

struct RecognizerParams {
  double sigma2 = 0.01;        // softmax temperature (sigma squared)
  double min_code_prob = 0.01; // report floor; codes below it are dropped from reports
};

// Fallback sigma_k for singleton or zero-variance clusters.
inline constexpr double kDefaultSigma = 0.1;

// Mean over codes of sigma_k, where sigma_k is the sample std of
// member-to-centroid cosine similarity.
double estimate_sigma(const Codebook& codebook);

// softmax_k( cos(e_v, e_ck) / sigma^2 ); sums to 1.
std::vector<double> soft_assign(const ValueExpression& expr, const Codebook& codebook,
                                const RecognizerParams& params);

// Arithmetic mean of the M' soft-assign rows. Throws "no value content" when
// the expression list is empty.
std::vector<double> document_distribution(const std::vector<ValueExpression>& doc_exprs,
                                          const Codebook& codebook,
                                          const RecognizerParams& params);

// Unweighted mean over per-document distributions.
ValueHistogram corpus_histogram(const std::vector<std::vector<double>>& corpus_dists);

// M distinct indices drawn sequentially without replacement, renormalizing
// after each draw. Codes with probability < floor are excluded before
// drawing; if fewer than M remain the set is shortened and flagged.
CodeIndexSet sample_code_set(std::span<const double> dist, int M, Rng& rng,
                             double floor = 0.01);

// Probability of drawing exactly this index sequence under the sampler above
// (product of sequential renormalized draw probabilities).
double sequential_set_probability(std::span<const double> dist, const CodeIndexSet& set,
                                  double floor = 0.01);

}  // namespace valign
