#pragma once

// Evaluation-validity and reliability statistics: priming deltas, MTMM
// convergent/discriminant validity, Pearson correlation, Cronbach's alpha,
// coefficient of variation, and Cohen's kappa.

#include <map>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <tuple>
#include <vector>

namespace valign {

double pearson(std::span<const double> x, std::span<const double> y);

// (steered - control) / control
double priming_delta(double r_control, double r_steered);

// Scores indexed by (method, group, model). Missing cells stay missing;
// statistics over incomplete vectors are skipped, never imputed.
struct ScoreCube {
  std::set<std::string> methods, groups, models;
  std::map<std::tuple<std::string, std::string, std::string>, double> cells;

  void set(const std::string& method, const std::string& group, const std::string& model,
           double score);
  std::optional<double> at(const std::string& method, const std::string& group,
                           const std::string& model) const;
  // Score vector across all declared models; nullopt when any cell is absent.
  std::optional<std::vector<double>> model_vector(const std::string& method,
                                                  const std::string& group) const;
};

struct CulturePairSets {
  std::vector<std::pair<std::string, std::string>> similar;   // U+
  std::vector<std::pair<std::string, std::string>> distinct;  // U-
};

struct StatResult {
  double value = 0.0;
  int used = 0;     // correlations that entered the mean
  int skipped = 0;  // incomplete or degenerate pairs left out
};

// Mean over groups of the mean correlation between method's model-vector and
// every other method's, optionally Fisher-z averaged.
StatResult convergent_validity(const ScoreCube& cube, const std::string& method,
                               bool fisher_z = false);

// Mean correlation over similar pairs minus mean over distinct pairs.
StatResult discriminant_validity(const ScoreCube& cube, const std::string& method,
                                 const CulturePairSets& pairs, bool fisher_z = false);

// alpha = k/(k-1) * (1 - sum item variances / total-score variance), sample
// variances throughout. data is subjects x items, row-major.
double cronbach_alpha(const std::vector<std::vector<double>>& subjects_by_items);

// sample std / |mean|
double coefficient_of_variation(std::span<const double> x);

double cohen_kappa(const std::vector<std::string>& labels_a,
                   const std::vector<std::string>& labels_b);

// Landis-Koch style advisory band for a kappa value.
std::string kappa_band(double kappa);

}  // namespace valign
