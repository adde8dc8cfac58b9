#include "recognizer/recognizer.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "core/error.hpp"
#include "core/math.hpp"

namespace valign {

double estimate_sigma(const Codebook& codebook) {
  if (codebook.codes.empty())
    throw Error(ErrorCode::invalid_argument, "estimate_sigma: empty codebook");
  double sum = 0.0;
  for (const auto& code : codebook.codes) {
    double sigma_k = kDefaultSigma;
    if (code.members.size() >= 2) {
      std::vector<double> sims;
      sims.reserve(code.members.size());
      for (const auto& m : code.members) {
        if (!m.embedding)
          throw Error(ErrorCode::invalid_argument, "estimate_sigma: member without embedding");
        sims.push_back(cosine_similarity(*m.embedding, code.centroid));
      }
      double mean = std::accumulate(sims.begin(), sims.end(), 0.0) / sims.size();
      double var = 0.0;
      for (double s : sims) var += (s - mean) * (s - mean);
      var /= (sims.size() - 1);
      double sd = std::sqrt(var);
      if (sd > 0.0) sigma_k = sd;
    }
    sum += sigma_k;
  }
  return sum / codebook.codes.size();
}

std::vector<double> soft_assign(const ValueExpression& expr, const Codebook& codebook,
                                const RecognizerParams& params) {
  if (codebook.codes.empty())
    throw Error(ErrorCode::invalid_argument, "soft_assign: empty codebook");
  if (!expr.embedding)
    throw Error(ErrorCode::invalid_argument, "soft_assign: expression not embedded");
  if (params.sigma2 <= 0.0)
    throw Error(ErrorCode::invalid_argument, "soft_assign: sigma2 must be positive");
  std::vector<double> logits(codebook.codes.size());
  for (std::size_t k = 0; k < codebook.codes.size(); ++k)
    logits[k] = cosine_similarity(*expr.embedding, codebook.codes[k].centroid) / params.sigma2;
  return softmax(logits);
}

std::vector<double> document_distribution(const std::vector<ValueExpression>& doc_exprs,
                                          const Codebook& codebook,
                                          const RecognizerParams& params) {
  if (doc_exprs.empty())
    throw Error(ErrorCode::invalid_argument, "document_distribution: no value content");
  std::vector<double> mean(codebook.codes.size(), 0.0);
  for (const auto& expr : doc_exprs) {
    auto row = soft_assign(expr, codebook, params);
    for (std::size_t k = 0; k < row.size(); ++k) mean[k] += row[k];
  }
  for (double& v : mean) v /= doc_exprs.size();
  return mean;
}

ValueHistogram corpus_histogram(const std::vector<std::vector<double>>& corpus_dists) {
  if (corpus_dists.empty())
    throw Error(ErrorCode::invalid_argument, "corpus_histogram: empty corpus");
  std::size_t k = corpus_dists.front().size();
  std::vector<double> mean(k, 0.0);
  for (const auto& dist : corpus_dists) {
    if (dist.size() != k)
      throw Error(ErrorCode::invalid_argument, "corpus_histogram: distribution length mismatch");
    for (std::size_t i = 0; i < k; ++i) mean[i] += dist[i];
  }
  for (double& v : mean) v /= corpus_dists.size();
  ValueHistogram h;
  h.mass = std::move(mean);
  return h;
}

CodeIndexSet sample_code_set(std::span<const double> dist, int M, Rng& rng, double floor) {
  if (M < 1) throw Error(ErrorCode::invalid_argument, "sample_code_set: M must be >= 1");
  std::vector<int> eligible;
  std::vector<double> mass;
  for (std::size_t k = 0; k < dist.size(); ++k) {
    if (dist[k] >= floor) {
      eligible.push_back(static_cast<int>(k));
      mass.push_back(dist[k]);
    }
  }
  CodeIndexSet out;
  out.truncated = static_cast<int>(eligible.size()) < M;
  int draws = std::min<int>(M, static_cast<int>(eligible.size()));
  for (int d = 0; d < draws; ++d) {
    double total = std::accumulate(mass.begin(), mass.end(), 0.0);
    double u = rng.uniform() * total;
    std::size_t pick = 0;
    double acc = 0.0;
    for (std::size_t i = 0; i < mass.size(); ++i) {
      acc += mass[i];
      if (u < acc) {
        pick = i;
        break;
      }
      pick = i;  // numeric edge: fall through to the last entry
    }
    out.indices.push_back(eligible[pick]);
    eligible.erase(eligible.begin() + pick);
    mass.erase(mass.begin() + pick);
  }
  return out;
}

double sequential_set_probability(std::span<const double> dist, const CodeIndexSet& set,
                                  double floor) {
  double total = 0.0;
  for (double v : dist)
    if (v >= floor) total += v;
  if (total <= 0.0)
    throw Error(ErrorCode::degenerate, "sequential_set_probability: no eligible mass");
  double prob = 1.0;
  double remaining = total;
  for (int idx : set.indices) {
    double p = dist[idx];
    if (p < floor || remaining <= 0.0) return 0.0;
    prob *= p / remaining;
    remaining -= p;
  }
  return prob;
}

}  // namespace valign
