#include "core/math.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "core/error.hpp"

namespace valign {

bool is_distribution(std::span<const double> p, double tol) {
  double sum = 0.0;
  for (double v : p) {
    if (!(v >= 0.0) || !std::isfinite(v)) return false;
    sum += v;
  }
  return std::abs(sum - 1.0) <= tol;
}

double cosine_similarity(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size())
    throw Error(ErrorCode::invalid_argument, "cosine_similarity: dimension mismatch");
  double dot = 0.0, na = 0.0, nb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    dot += a[i] * b[i];
    na += a[i] * a[i];
    nb += b[i] * b[i];
  }
  if (na == 0.0 || nb == 0.0)
    throw Error(ErrorCode::degenerate, "cosine_similarity: degenerate embedding (zero norm)");
  double c = dot / (std::sqrt(na) * std::sqrt(nb));
  return std::clamp(c, -1.0, 1.0);
}

double cosine_similarity(const Embedding& a, const Embedding& b) {
  return cosine_similarity(std::span<const double>(a.values), std::span<const double>(b.values));
}

double shannon_entropy(std::span<const double> p) {
  if (!is_distribution(p))
    throw Error(ErrorCode::invalid_argument, "shannon_entropy: not a distribution");
  double h = 0.0;
  for (double v : p)
    if (v > 0.0) h -= v * std::log(v);
  return h;
}

double renyi2_entropy(std::span<const double> p) {
  if (!is_distribution(p))
    throw Error(ErrorCode::invalid_argument, "renyi2_entropy: not a distribution");
  double s = 0.0;
  for (double v : p) s += v * v;
  return -std::log(s);
}

ValueHistogram normalize_histogram(std::span<const double> raw) {
  double sum = 0.0;
  for (double v : raw) {
    if (!(v >= 0.0) || !std::isfinite(v))
      throw Error(ErrorCode::invalid_argument, "normalize_histogram: negative or non-finite entry");
    sum += v;
  }
  if (sum <= 0.0) throw Error(ErrorCode::degenerate, "normalize_histogram: empty mass");
  ValueHistogram h;
  h.mass.resize(raw.size());
  for (std::size_t i = 0; i < raw.size(); ++i) h.mass[i] = raw[i] / sum;
  return h;
}

std::vector<double> softmax(std::span<const double> logits) {
  if (logits.empty()) throw Error(ErrorCode::invalid_argument, "softmax: empty input");
  double m = *std::max_element(logits.begin(), logits.end());
  std::vector<double> out(logits.size());
  double sum = 0.0;
  for (std::size_t i = 0; i < logits.size(); ++i) {
    out[i] = std::exp(logits[i] - m);
    sum += out[i];
  }
  for (double& v : out) v /= sum;
  return out;
}

}  // namespace valign
