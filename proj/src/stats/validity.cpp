#include "stats/validity.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "core/error.hpp"

namespace valign {

namespace {

double mean_of(std::span<const double> x) {
  return std::accumulate(x.begin(), x.end(), 0.0) / x.size();
}

double sample_variance(std::span<const double> x) {
  double m = mean_of(x);
  double acc = 0.0;
  for (double v : x) acc += (v - m) * (v - m);
  return acc / (x.size() - 1);
}

double atanh_clamped(double r) {
  r = std::clamp(r, -0.999999999, 0.999999999);
  return std::atanh(r);
}

}  // namespace

double pearson(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size() || x.size() < 3)
    throw Error(ErrorCode::invalid_argument, "pearson: need equal-length series of >= 3");
  double mx = mean_of(x), my = mean_of(y);
  double cov = 0.0, vx = 0.0, vy = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    cov += (x[i] - mx) * (y[i] - my);
    vx += (x[i] - mx) * (x[i] - mx);
    vy += (y[i] - my) * (y[i] - my);
  }
  if (vx == 0.0 || vy == 0.0)
    throw Error(ErrorCode::degenerate, "pearson: degenerate series (zero variance)");
  return std::clamp(cov / std::sqrt(vx * vy), -1.0, 1.0);
}

double priming_delta(double r_control, double r_steered) {
  if (r_control == 0.0)
    throw Error(ErrorCode::degenerate, "priming_delta: zero control score");
  return (r_steered - r_control) / r_control;
}

void ScoreCube::set(const std::string& method, const std::string& group,
                    const std::string& model, double score) {
  methods.insert(method);
  groups.insert(group);
  models.insert(model);
  cells[{method, group, model}] = score;
}

std::optional<double> ScoreCube::at(const std::string& method, const std::string& group,
                                    const std::string& model) const {
  auto it = cells.find({method, group, model});
  if (it == cells.end()) return std::nullopt;
  return it->second;
}

std::optional<std::vector<double>> ScoreCube::model_vector(const std::string& method,
                                                           const std::string& group) const {
  std::vector<double> out;
  out.reserve(models.size());
  for (const auto& m : models) {
    auto v = at(method, group, m);
    if (!v) return std::nullopt;
    out.push_back(*v);
  }
  return out;
}

StatResult convergent_validity(const ScoreCube& cube, const std::string& method, bool fisher_z) {
  if (cube.methods.size() < 2)
    throw Error(ErrorCode::invalid_argument, "convergent_validity: need >= 2 methods");
  if (cube.models.size() < 3)
    throw Error(ErrorCode::invalid_argument, "convergent_validity: need >= 3 models");

  StatResult res;
  std::vector<double> group_means;
  for (const auto& g : cube.groups) {
    auto base = cube.model_vector(method, g);
    if (!base) {
      res.skipped += static_cast<int>(cube.methods.size()) - 1;
      continue;
    }
    std::vector<double> corrs;
    for (const auto& other : cube.methods) {
      if (other == method) continue;
      auto vec = cube.model_vector(other, g);
      if (!vec) {
        ++res.skipped;
        continue;
      }
      try {
        corrs.push_back(pearson(*base, *vec));
        ++res.used;
      } catch (const Error&) {
        ++res.skipped;
      }
    }
    if (corrs.empty()) continue;
    if (fisher_z) {
      double z = 0.0;
      for (double c : corrs) z += atanh_clamped(c);
      group_means.push_back(std::tanh(z / corrs.size()));
    } else {
      group_means.push_back(mean_of(corrs));
    }
  }
  if (group_means.empty())
    throw Error(ErrorCode::degenerate, "convergent_validity: all correlations degenerate");
  res.value = mean_of(group_means);
  return res;
}

StatResult discriminant_validity(const ScoreCube& cube, const std::string& method,
                                 const CulturePairSets& pairs, bool fisher_z) {
  auto side_mean = [&](const std::vector<std::pair<std::string, std::string>>& set,
                       StatResult& res) -> std::optional<double> {
    std::vector<double> corrs;
    for (const auto& [ga, gb] : set) {
      auto va = cube.model_vector(method, ga);
      auto vb = cube.model_vector(method, gb);
      if (!va || !vb) {
        ++res.skipped;
        continue;
      }
      try {
        corrs.push_back(pearson(*va, *vb));
        ++res.used;
      } catch (const Error&) {
        ++res.skipped;
      }
    }
    if (corrs.empty()) return std::nullopt;
    if (fisher_z) {
      double z = 0.0;
      for (double c : corrs) z += atanh_clamped(c);
      return std::tanh(z / corrs.size());
    }
    return mean_of(corrs);
  };

  StatResult res;
  auto plus = side_mean(pairs.similar, res);
  auto minus = side_mean(pairs.distinct, res);
  if (!plus || !minus)
    throw Error(ErrorCode::degenerate, "discriminant_validity: a pair set has no usable pairs");
  res.value = *plus - *minus;
  return res;
}

double cronbach_alpha(const std::vector<std::vector<double>>& data) {
  const std::size_t n = data.size();
  if (n < 2) throw Error(ErrorCode::invalid_argument, "cronbach_alpha: need >= 2 subjects");
  const std::size_t k = data.front().size();
  if (k < 2) throw Error(ErrorCode::invalid_argument, "cronbach_alpha: need >= 2 items");
  for (const auto& row : data)
    if (row.size() != k)
      throw Error(ErrorCode::invalid_argument, "cronbach_alpha: ragged matrix");

  double item_var_sum = 0.0;
  for (std::size_t j = 0; j < k; ++j) {
    std::vector<double> col(n);
    for (std::size_t i = 0; i < n; ++i) col[i] = data[i][j];
    item_var_sum += sample_variance(col);
  }
  std::vector<double> totals(n, 0.0);
  for (std::size_t i = 0; i < n; ++i)
    totals[i] = std::accumulate(data[i].begin(), data[i].end(), 0.0);
  double total_var = sample_variance(totals);
  if (total_var == 0.0)
    throw Error(ErrorCode::degenerate, "cronbach_alpha: zero total-score variance");
  return (double(k) / (k - 1)) * (1.0 - item_var_sum / total_var);
}

double coefficient_of_variation(std::span<const double> x) {
  if (x.size() < 2)
    throw Error(ErrorCode::invalid_argument, "coefficient_of_variation: need >= 2 values");
  double m = mean_of(x);
  if (m == 0.0)
    throw Error(ErrorCode::degenerate, "coefficient_of_variation: zero mean");
  return std::sqrt(sample_variance(x)) / std::abs(m);
}

double cohen_kappa(const std::vector<std::string>& a, const std::vector<std::string>& b) {
  if (a.empty() || a.size() != b.size())
    throw Error(ErrorCode::invalid_argument, "cohen_kappa: need equal-length non-empty labels");
  const double n = static_cast<double>(a.size());
  std::map<std::string, double> pa, pb;
  double agree = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    pa[a[i]] += 1.0 / n;
    pb[b[i]] += 1.0 / n;
    if (a[i] == b[i]) agree += 1.0 / n;
  }
  double pe = 0.0;
  for (const auto& [label, p] : pa) {
    auto it = pb.find(label);
    if (it != pb.end()) pe += p * it->second;
  }
  if (pe >= 1.0) {
    if (agree >= 1.0 - 1e-12) return 1.0;
    throw Error(ErrorCode::degenerate, "cohen_kappa: degenerate marginals");
  }
  return (agree - pe) / (1.0 - pe);
}

std::string kappa_band(double kappa) {
  if (kappa < 0.0) return "poor";
  if (kappa <= 0.20) return "slight";
  if (kappa <= 0.40) return "fair";
  if (kappa <= 0.60) return "moderate";
  if (kappa <= 0.80) return "substantial";
  return "almost perfect";
}

}  // namespace valign
