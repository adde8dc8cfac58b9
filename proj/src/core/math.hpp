#pragma once

#include <span>

#include "core/types.hpp"

namespace valign {

// Absolute tolerance for every probability-sum check in the project.
inline constexpr double kProbTol = 1e-9;

bool is_distribution(std::span<const double> p, double tol = kProbTol);

// cos(a, b) = <a,b> / (|a||b|). Throws on dim mismatch or zero norm.
double cosine_similarity(const Embedding& a, const Embedding& b);
double cosine_similarity(std::span<const double> a, std::span<const double> b);

// Shannon entropy, natural log, 0*log 0 := 0. Input must be a distribution.
double shannon_entropy(std::span<const double> p);

// Renyi entropy of order 2: -log sum p_i^2.
double renyi2_entropy(std::span<const double> p);

// Divide by the sum; throws "empty mass" when all entries are zero.
ValueHistogram normalize_histogram(std::span<const double> raw);

// softmax of logits (numerically stable, max-shifted).
std::vector<double> softmax(std::span<const double> logits);

}  // namespace valign
