// Acceptance suite: one pass/fail line per criterion, nonzero exit if any
// fail. Each criterion carries its stated tolerance and runtime budget.

#include <valign/valign.h>

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <numeric>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "codebook/builder.hpp"
#include "codebook/checkpoint.hpp"
#include "core/math.hpp"
#include "core/rng.hpp"
#include "pipeline/config.hpp"
#include "pipeline/pipeline.hpp"
#include "pipeline/report.hpp"
#include "recognizer/recognizer.hpp"
#include "stats/validity.hpp"
#include "support/planted.hpp"
#include "uot/metric.hpp"

using namespace valign;
namespace fs = std::filesystem;

namespace {

struct Scratch {
  fs::path root;
  Scratch() {
    root = fs::temp_directory_path() /
           ("valign-acceptance-" + std::to_string(::getpid()));
    fs::create_directories(root);
  }
  ~Scratch() {
    std::error_code ec;
    fs::remove_all(root, ec);
  }
  std::string file(const std::string& name) const { return (root / name).string(); }
};

Scratch scratch;

ValueHistogram random_hist(int k, Rng& rng) {
  std::vector<double> raw(k);
  for (double& v : raw) v = rng.uniform() + 1e-6;
  return normalize_histogram(raw);
}

CostMatrix random_cost(int k, Rng& rng) {
  CostMatrix c;
  c.D = Eigen::MatrixXd::Zero(k, k);
  for (int i = 0; i < k; ++i)
    for (int j = i + 1; j < k; ++j) {
      double v = 2.0 * rng.uniform();
      c.D(i, j) = v;
      c.D(j, i) = v;
    }
  return c;
}

// --- criterion 1: debiased UOT identity & symmetry ------------------------
bool criterion_uot_identity_symmetry(std::string& detail) {
  Rng rng(1001);
  double worst_self = 0, worst_sym = 0;
  for (int trial = 0; trial < 200; ++trial) {
    int k = 3 + static_cast<int>(rng.uniform_index(18));  // K in {3..20}
    auto a = random_hist(k, rng);
    auto b = random_hist(k, rng);
    auto cost = random_cost(k, rng);
    MetricConfig cfg;
    double self = std::abs(debiased_uot(a, a, cost, cfg));
    double ab = debiased_uot(a, b, cost, cfg);
    double ba = debiased_uot(b, a, cost, cfg);
    worst_self = std::max(worst_self, self);
    worst_sym = std::max(worst_sym, std::abs(ab - ba));
  }
  std::ostringstream ss;
  ss << "max |D(a,a)| = " << worst_self << ", max |D(a,b)-D(b,a)| = " << worst_sym;
  detail = ss.str();
  return worst_self <= 1e-6 && worst_sym <= 1e-6;
}

// --- criterion 2: Sinkhorn vs brute-force/convex oracle --------------------
// Convex coordinate-descent oracle: geometric bisection on each plan entry's
// stationarity condition. Independent of the dual scaling route.
Eigen::MatrixXd oracle_plan(const ValueHistogram& a, const ValueHistogram& b,
                            const CostMatrix& cost, const MetricConfig& cfg) {
  const int k = static_cast<int>(cost.D.rows());
  Eigen::MatrixXd pi = Eigen::MatrixXd::Constant(k, k, 1e-3);
  for (int sweep = 0; sweep < 3000; ++sweep) {
    double moved = 0;
    for (int i = 0; i < k; ++i)
      for (int j = 0; j < k; ++j) {
        double row_rest = pi.row(i).sum() - pi(i, j);
        double col_rest = pi.col(j).sum() - pi(i, j);
        auto grad = [&](double p) {
          return cost.D(i, j) + cfg.epsilon * std::log(p) +
                 cfg.gamma * std::log((row_rest + p) / a.mass[i]) +
                 cfg.gamma * std::log((col_rest + p) / b.mass[j]);
        };
        double lo = 1e-300, hi = 4.0;
        if (grad(hi) < 0) continue;
        for (int it = 0; it < 200; ++it) {
          double mid = std::sqrt(lo * hi);
          (grad(mid) > 0 ? hi : lo) = mid;
        }
        double next = std::sqrt(lo * hi);
        moved = std::max(moved, std::abs(next - pi(i, j)));
        pi(i, j) = next;
      }
    if (moved < 1e-13) break;
  }
  return pi;
}

// Multi-resolution grid search over the four entries of a K=2 plan.
Eigen::MatrixXd grid_plan_k2(const ValueHistogram& a, const ValueHistogram& b,
                             const CostMatrix& cost, const MetricConfig& cfg) {
  double center[4] = {0.25, 0.25, 0.25, 0.25};
  double width = 0.5;
  Eigen::MatrixXd best(2, 2);
  best.setConstant(0.25);
  double best_obj = 1e300;
  for (int level = 0; level < 14; ++level) {
    const int steps = 9;
    double lo[4], hi[4];
    for (int d = 0; d < 4; ++d) {
      lo[d] = std::max(1e-9, center[d] - width);
      hi[d] = center[d] + width;
    }
    double local_best[4] = {center[0], center[1], center[2], center[3]};
    for (int i0 = 0; i0 < steps; ++i0)
      for (int i1 = 0; i1 < steps; ++i1)
        for (int i2 = 0; i2 < steps; ++i2)
          for (int i3 = 0; i3 < steps; ++i3) {
            double p[4];
            int idx[4] = {i0, i1, i2, i3};
            for (int d = 0; d < 4; ++d)
              p[d] = lo[d] + (hi[d] - lo[d]) * idx[d] / (steps - 1);
            Eigen::MatrixXd pi(2, 2);
            pi << p[0], p[1], p[2], p[3];
            double obj = uot_objective(pi, a.mass, b.mass, cost, cfg);
            if (obj < best_obj) {
              best_obj = obj;
              best = pi;
              for (int d = 0; d < 4; ++d) local_best[d] = p[d];
            }
          }
    for (int d = 0; d < 4; ++d) center[d] = local_best[d];
    width /= 3.0;
  }
  return best;
}

bool criterion_sinkhorn_oracle(std::string& detail) {
  Rng rng(1002);
  double worst = 0;
  for (int trial = 0; trial < 20; ++trial) {
    int k = 2 + static_cast<int>(rng.uniform_index(3));  // K in {2,3,4}
    auto a = random_hist(k, rng);
    auto b = random_hist(k, rng);
    auto cost = random_cost(k, rng);
    MetricConfig cfg;
    auto plan = unbalanced_sinkhorn(a, b, cost, cfg);
    double ours = uot_objective(plan.pi, a.mass, b.mass, cost, cfg);
    double oracle = uot_objective(oracle_plan(a, b, cost, cfg), a.mass, b.mass, cost, cfg);
    if (k == 2) {
      double grid = uot_objective(grid_plan_k2(a, b, cost, cfg), a.mass, b.mass, cost, cfg);
      oracle = std::min(oracle, grid);
    }
    worst = std::max(worst, std::abs(ours - oracle));
  }
  std::ostringstream ss;
  ss << "max |objective - oracle| = " << worst;
  detail = ss.str();
  return worst <= 1e-3;
}

// --- criterion 3: balanced limit -------------------------------------------
bool criterion_balanced_limit(std::string& detail) {
  Rng rng(1003);
  double worst = 0;
  for (int trial = 0; trial < 20; ++trial) {
    int k = 3 + static_cast<int>(rng.uniform_index(8));
    auto a = random_hist(k, rng);
    auto b = random_hist(k, rng);
    auto cost = random_cost(k, rng);
    MetricConfig cfg;
    cfg.gamma = 1e3;
    cfg.sinkhorn_max_iters = 20000;
    auto plan = unbalanced_sinkhorn(a, b, cost, cfg);
    Eigen::VectorXd row = plan.pi.rowwise().sum(), col = plan.pi.colwise().sum();
    double re = 0, ce = 0;
    for (int i = 0; i < k; ++i) {
      re += std::abs(row[i] - a.mass[i]);
      ce += std::abs(col[i] - b.mass[i]);
    }
    worst = std::max({worst, re, ce});
  }
  std::ostringstream ss;
  ss << "max L1 marginal error = " << worst;
  detail = ss.str();
  return worst <= 1e-3;
}

// --- criterion 4: proposition check by exhaustive enumeration --------------
bool criterion_proposition(std::string& detail) {
  const int K = 50, M = 3;
  Rng rng(1004);
  double worst = 0;
  for (int trial = 0; trial < 20; ++trial) {
    // non-spiky: jittered uniform, |H2 - log K| small
    std::vector<double> raw(K);
    for (double& v : raw) v = 1.0 + 0.3 * rng.uniform();
    auto p = normalize_histogram(raw).mass;
    if (std::abs(renyi2_entropy(p) - std::log(double(K))) > 0.05) return false;

    double h_tuple = 0.0;
    for (int i = 0; i < K; ++i)
      for (int j = 0; j < K; ++j) {
        if (j == i) continue;
        double pij = p[i] * p[j] / (1.0 - p[i]);
        double rest = 1.0 - p[i] - p[j];
        for (int l = 0; l < K; ++l) {
          if (l == i || l == j) continue;
          double prob = pij * p[l] / rest;
          h_tuple -= prob * std::log(prob);
        }
      }
    double h_single = shannon_entropy(p);
    double rel = std::abs(h_tuple - M * h_single) / (M * h_single);
    worst = std::max(worst, rel);
  }
  std::ostringstream ss;
  ss << "max relative gap = " << worst;
  detail = ss.str();
  return worst <= 0.02;
}

// --- criterion 5: recognizer normalization ---------------------------------
bool criterion_recognizer_normalization(std::string& detail) {
  Rng rng(1005);
  const std::size_t dim = 16;
  Codebook cb;
  for (int k = 0; k < 8; ++k) {
    ValueCode code;
    code.id = k;
    code.name = "c" + std::to_string(k);
    for (std::size_t d = 0; d < dim; ++d) code.centroid.values.push_back(rng.normal());
    cb.codes.push_back(std::move(code));
  }
  double worst = 0;
  for (int trial = 0; trial < 100; ++trial) {
    RecognizerParams params;
    params.sigma2 = 0.05 + rng.uniform();
    std::vector<ValueExpression> exprs;
    int m = 1 + static_cast<int>(rng.uniform_index(4));
    for (int e = 0; e < m; ++e) {
      ValueExpression v;
      v.text = "x";
      Embedding emb;
      for (std::size_t d = 0; d < dim; ++d) emb.values.push_back(rng.normal());
      v.embedding = std::move(emb);
      exprs.push_back(std::move(v));
    }
    auto row = soft_assign(exprs[0], cb, params);
    auto dist = document_distribution(exprs, cb, params);
    for (const auto& vec : {row, dist}) {
      double sum = 0;
      for (double v : vec) {
        if (v < 0) return false;
        sum += v;
      }
      worst = std::max(worst, std::abs(sum - 1.0));
    }
  }
  std::ostringstream ss;
  ss << "max |sum - 1| = " << worst;
  detail = ss.str();
  return worst <= 1e-9;
}

// --- criterion 6: planted codebook recovery --------------------------------
bool criterion_codebook_recovery(std::string& detail) {
  test::PlantedSpec spec;
  spec.code_phrases = {"filial devotion",       "collective harmony", "respect for elders",
                       "individual autonomy",   "free expression",    "personal achievement",
                       "environmental stewardship", "intellectual curiosity",
                       "financial prudence",    "mutual trust"};
  spec.docs = 167;  // 167 * 3 = 501 expressions
  spec.phrases_per_doc = 3;
  spec.seed = 1006;
  spec.topics = 12;
  auto corpus = test::make_planted_corpus(spec);
  auto gateway = make_gateway(test::planted_mock_profiles(1006));
  auto planted = test::extract_planted(corpus, spec, *gateway);

  OptimizerConfig cfg;
  cfg.seed = 1006;
  cfg.workers = 4;
  auto cb0 = init_codebook(planted.expressions, cfg, *gateway);
  std::size_t k0 = cb0.size();

  // member-partition purity against the planted labels
  std::map<std::string, int> phrase_to_label;
  for (std::size_t p = 0; p < spec.code_phrases.size(); ++p)
    phrase_to_label[spec.code_phrases[p]] = static_cast<int>(p);
  std::size_t correct = 0, total = 0;
  for (const auto& code : cb0.codes) {
    std::map<int, int> votes;
    for (const auto& m : code.members) {
      for (const auto& [phrase, label] : phrase_to_label)
        if (m.text.find(phrase) != std::string::npos) votes[label]++;
      ++total;
    }
    int best = 0;
    for (auto& [_, n] : votes) best = std::max(best, n);
    correct += best;
  }
  double purity = double(correct) / double(total);

  auto coded = code_corpus(corpus, *gateway);
  auto result = optimize(coded, cfg, *gateway);
  double s_initial = result.scores.front().total;
  double s_final = result.scores.back().total;
  std::size_t k_final = result.codebook.size();

  std::ostringstream ss;
  ss << "K0 = " << k0 << ", purity = " << purity << ", S " << s_initial << " -> " << s_final
     << ", K = " << k_final << ", expressions = " << total;
  detail = ss.str();
  return k0 >= 9 && k0 <= 11 && purity >= 0.95 && s_final >= s_initial && k_final >= 8 &&
         k_final <= 12 && total == 501;
}

// --- criterion 7: score formula fidelity ------------------------------------
bool criterion_score_formula(std::string& detail) {
  double worst = 0;
  for (int run = 0; run < 5; ++run) {
    test::PlantedSpec spec;
    spec.code_phrases = {"filial devotion", "personal autonomy", "frugality",
                         "open dialogue",   "mutual trust"};
    spec.docs = 14 + 3 * run;
    spec.phrases_per_doc = 2;
    spec.seed = 2000 + run;
    auto corpus = test::make_planted_corpus(spec);
    auto gateway = make_gateway(test::planted_mock_profiles(2000 + run));
    auto coded = code_corpus(corpus, *gateway);

    OptimizerConfig cfg;
    cfg.M = 2;
    cfg.N1 = 2;
    cfg.N2 = 2;
    cfg.seed = 2000 + run;
    cfg.beta1 = 0.25 + 0.05 * run;
    cfg.beta2 = 0.05 + 0.01 * run;
    std::vector<ValueExpression> all;
    for (const auto& cd : coded)
      all.insert(all.end(), cd.expressions.begin(), cd.expressions.end());
    auto cb = init_codebook(all, cfg, *gateway);
    auto out = reconstruction_step(coded, cb, cfg, *gateway, 1);

    // straight-line re-implementation of the score estimator
    RecognizerParams params;
    params.sigma2 = std::pow(estimate_sigma(cb), 2);
    std::map<std::string, std::vector<const DistortionRecord*>> by_doc;
    for (const auto& rec : out.records) by_doc[rec.doc_id].push_back(&rec);
    double acc = 0;
    double n = 0;
    std::vector<double> usage(cb.size(), 0.0);
    for (const auto& cd : coded) {
      if (cd.expressions.empty()) continue;
      n += 1;
      auto q = document_distribution(cd.expressions, cb, params);
      for (std::size_t k = 0; k < q.size(); ++k) usage[k] += q[k];
      double inner = 0;
      for (const auto* rec : by_doc[cd.doc.id]) inner += rec->q_weight * rec->d;
      acc += inner - cfg.beta1 * cfg.M * shannon_entropy(q);
    }
    for (double& u : usage) u /= n;
    double oracle = -(acc / n) - cfg.beta2 * cfg.M * shannon_entropy(usage);
    worst = std::max(worst, std::abs(out.score.total - oracle));
  }
  std::ostringstream ss;
  ss << "max |S - oracle| = " << worst;
  detail = ss.str();
  return worst <= 1e-9;
}

// --- criterion 8: priming arithmetic from published scores ------------------
bool criterion_priming_arithmetic(std::string& detail) {
  double delta_pp = priming_delta(46.54, 55.96) * 100.0;
  // and through the validate command over a cube file
  std::string cube_path = scratch.file("priming_cube.jsonl");
  {
    std::ofstream out(cube_path);
    out << R"({"method":"dove","group":"CN","model":"control","score":46.54})" << "\n";
    out << R"({"method":"dove","group":"CN","model":"chinese","score":55.96})" << "\n";
  }
  auto cfg = parse_run_config("{}", scratch.root.string());
  cmd_validate(cfg, cube_path, scratch.file("priming_validity.jsonl"));
  double reported = 0;
  for (const auto& row : read_jsonl(scratch.file("priming_validity.jsonl")))
    if (row.value("stat", "") == "priming_delta") reported = row.at("percent").get<double>();

  std::ostringstream ss;
  ss << "delta = " << delta_pp << "% (report: " << reported << "%)";
  detail = ss.str();
  return std::abs(delta_pp - 20.25) <= 0.01 && std::abs(reported - 20.25) <= 0.01;
}

// --- criterion 9: statistics oracle equivalence ------------------------------
bool criterion_stats_oracles(std::string& detail) {
  Rng rng(1009);
  double worst = 0;
  for (int trial = 0; trial < 20; ++trial) {
    // pearson
    int n = 5 + static_cast<int>(rng.uniform_index(20));
    std::vector<double> x(n), y(n);
    for (int i = 0; i < n; ++i) {
      x[i] = rng.normal();
      y[i] = 0.7 * x[i] + rng.normal();
    }
    double mx = 0, my = 0;
    for (int i = 0; i < n; ++i) {
      mx += x[i];
      my += y[i];
    }
    mx /= n;
    my /= n;
    double cov = 0, vx = 0, vy = 0;
    for (int i = 0; i < n; ++i) {
      cov += (x[i] - mx) * (y[i] - my);
      vx += (x[i] - mx) * (x[i] - mx);
      vy += (y[i] - my) * (y[i] - my);
    }
    worst = std::max(worst, std::abs(pearson(x, y) - cov / std::sqrt(vx * vy)));

    // cronbach
    int subjects = 4 + static_cast<int>(rng.uniform_index(6));
    int items = 3 + static_cast<int>(rng.uniform_index(4));
    std::vector<std::vector<double>> m(subjects, std::vector<double>(items));
    for (auto& row : m) {
      double s = rng.normal();
      for (auto& cell : row) cell = s + 0.5 * rng.normal();
    }
    auto svar = [](const std::vector<double>& v) {
      double mean = 0;
      for (double a : v) mean += a;
      mean /= v.size();
      double acc = 0;
      for (double a : v) acc += (a - mean) * (a - mean);
      return acc / (v.size() - 1);
    };
    double item_sum = 0;
    for (int j = 0; j < items; ++j) {
      std::vector<double> col(subjects);
      for (int i = 0; i < subjects; ++i) col[i] = m[i][j];
      item_sum += svar(col);
    }
    std::vector<double> totals(subjects, 0.0);
    for (int i = 0; i < subjects; ++i)
      for (int j = 0; j < items; ++j) totals[i] += m[i][j];
    double alpha_oracle = (double(items) / (items - 1)) * (1.0 - item_sum / svar(totals));
    worst = std::max(worst, std::abs(cronbach_alpha(m) - alpha_oracle));

    // kappa
    std::vector<std::string> la, lb;
    const char* labels[3] = {"a", "b", "c"};
    int len = 20 + static_cast<int>(rng.uniform_index(20));
    for (int i = 0; i < len; ++i) {
      la.push_back(labels[rng.uniform_index(3)]);
      lb.push_back(rng.uniform() < 0.6 ? la.back() : labels[rng.uniform_index(3)]);
    }
    std::map<std::string, double> pa, pb;
    double po = 0;
    for (int i = 0; i < len; ++i) {
      pa[la[i]] += 1.0 / len;
      pb[lb[i]] += 1.0 / len;
      if (la[i] == lb[i]) po += 1.0 / len;
    }
    double pe = 0;
    for (auto& [l, p] : pa) pe += p * pb[l];
    worst = std::max(worst, std::abs(cohen_kappa(la, lb) - (po - pe) / (1 - pe)));

    // coefficient of variation
    std::vector<double> series(6);
    for (double& v : series) v = 5.0 + rng.uniform();
    double mean_series = std::accumulate(series.begin(), series.end(), 0.0) / series.size();
    worst = std::max(worst, std::abs(coefficient_of_variation(series) -
                                     std::sqrt(svar(series)) / mean_series));
  }

  // exact anchor cases
  std::vector<std::string> same{"x", "y", "x", "z"};
  bool kappa_one = cohen_kappa(same, same) == 1.0;
  std::vector<std::string> all_yes{"y", "y", "y", "y"};
  std::vector<std::string> half{"y", "n", "y", "n"};
  bool kappa_zero = cohen_kappa(all_yes, half) == 0.0;

  std::ostringstream ss;
  ss << "max |stat - oracle| = " << worst << ", kappa anchors "
     << (kappa_one && kappa_zero ? "exact" : "off");
  detail = ss.str();
  return worst <= 1e-9 && kappa_one && kappa_zero;
}

// --- criteria 10/11: end-to-end separation + determinism --------------------

struct PipelineRun {
  std::string eval_bytes;
  std::string validity_bytes;
  std::map<std::pair<std::string, std::string>, double> r;
};

PipelineRun run_pipeline(std::uint64_t seed, const std::string& tag) {
  fs::path dir = scratch.root / tag;
  fs::create_directories(dir);

  test::PlantedSpec alpha;
  alpha.code_phrases = {"filial devotion", "collective harmony", "respect for elders",
                        "communal duty"};
  alpha.group = "alpha";
  alpha.docs = 18;
  alpha.phrases_per_doc = 2;
  alpha.seed = seed;
  test::PlantedSpec beta = alpha;
  beta.code_phrases = {"individual autonomy", "free expression", "personal achievement",
                       "self reliance"};
  beta.group = "beta";
  beta.seed = seed + 1;

  auto write = [&](const std::string& name, const Corpus& corpus) {
    std::ofstream out(dir / name);
    out << test::corpus_to_jsonl(corpus);
  };
  write("alpha.jsonl", test::make_planted_corpus(alpha));
  write("beta.jsonl", test::make_planted_corpus(beta));

  nlohmann::json cfg_json = {
      {"seed", seed},
      {"output_dir", "out"},
      {"corpora", {{"alpha", "alpha.jsonl"}, {"beta", "beta.jsonl"}}},
      {"examinee_corpora", {{"alpha", "alpha.jsonl"}, {"beta", "beta.jsonl"}}},
      {"optimizer", {{"M", 2}, {"N1", 1}, {"N2", 1}, {"T", 2}, {"workers", 2}}},
  };
  std::string cfg_path = (dir / "config.json").string();
  {
    std::ofstream out(cfg_path);
    out << cfg_json.dump(2);
  }

  // drive the full pipeline through the shared-library C surface
  va_config* cfg = nullptr;
  if (va_config_open(cfg_path.c_str(), &cfg) != VA_OK)
    throw std::runtime_error(va_last_error());
  std::string exprs = (dir / "out" / "expressions.jsonl").string();
  if (va_run_extract(cfg, exprs.c_str()) != VA_OK) throw std::runtime_error(va_last_error());
  char checkpoint[4096];
  if (va_run_build_codebook(cfg, checkpoint, sizeof(checkpoint)) != VA_OK)
    throw std::runtime_error(va_last_error());
  std::string report = (dir / "out" / "eval.jsonl").string();
  if (va_run_evaluate(cfg, checkpoint, report.c_str()) != VA_OK)
    throw std::runtime_error(va_last_error());

  // assemble a score cube from the evaluation and run the validity suite
  PipelineRun run;
  std::string cube_path = (dir / "out" / "cube.jsonl").string();
  {
    std::ofstream cube(cube_path);
    for (const auto& row : read_jsonl(report)) {
      nlohmann::json line = {{"method", "valign"},
                             {"group", row.at("reference").get<std::string>()},
                             {"model", row.at("examinee").get<std::string>()},
                             {"score", row.at("r_display").get<double>()}};
      cube << line.dump() << "\n";
      run.r[{row.at("examinee").get<std::string>(),
             row.at("reference").get<std::string>()}] = row.at("r").get<double>();
    }
  }
  std::string validity = (dir / "out" / "validity.jsonl").string();
  if (va_run_validate(cfg, cube_path.c_str(), validity.c_str()) != VA_OK)
    throw std::runtime_error(va_last_error());
  va_config_close(cfg);

  auto slurp = [](const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
  };
  run.eval_bytes = slurp(report);
  run.validity_bytes = slurp(validity);
  return run;
}

bool criterion_end_to_end_separation(std::string& detail) {
  double min_gap = 1e300;
  for (int s = 0; s < 5; ++s) {
    auto run = run_pipeline(4000 + 10 * s, "e2e-seed" + std::to_string(s));
    double self_a = run.r[{"alpha", "alpha"}], cross_a = run.r[{"alpha", "beta"}];
    double self_b = run.r[{"beta", "beta"}], cross_b = run.r[{"beta", "alpha"}];
    min_gap = std::min({min_gap, self_a - cross_a, self_b - cross_b});
    if (self_a <= cross_a || self_b <= cross_b) {
      detail = "separation failed at seed " + std::to_string(4000 + 10 * s);
      return false;
    }
  }
  std::ostringstream ss;
  ss << "min r(self) - r(cross) over 5 seeds = " << min_gap;
  detail = ss.str();
  return true;
}

bool criterion_determinism(std::string& detail) {
  auto first = run_pipeline(4000, "det-a");
  auto second = run_pipeline(4000, "det-b");
  bool eval_equal = first.eval_bytes == second.eval_bytes && !first.eval_bytes.empty();
  bool validity_equal = first.validity_bytes == second.validity_bytes;
  detail = std::string("evaluation reports ") + (eval_equal ? "identical" : "DIFFER") +
           ", validity reports " + (validity_equal ? "identical" : "DIFFER");
  return eval_equal && validity_equal;
}

struct Criterion {
  int id;
  const char* name;
  std::function<bool(std::string&)> fn;
  double budget_seconds;
};

}  // namespace

int main() {
  std::vector<Criterion> criteria = {
      {1, "debiased UOT identity and symmetry", criterion_uot_identity_symmetry, 30},
      {2, "Sinkhorn objective matches brute-force oracle", criterion_sinkhorn_oracle, 60},
      {3, "balanced-limit marginals", criterion_balanced_limit, 60},
      {4, "tuple-entropy factorization (K=50, M=3)", criterion_proposition, 60},
      {5, "recognizer outputs normalize", criterion_recognizer_normalization, 60},
      {6, "planted codebook recovery", criterion_codebook_recovery, 60},
      {7, "codebook score formula fidelity", criterion_score_formula, 60},
      {8, "priming change-ratio arithmetic", criterion_priming_arithmetic, 60},
      {9, "statistics oracle equivalence", criterion_stats_oracles, 60},
      {10, "end-to-end separation on planted corpora", criterion_end_to_end_separation, 60},
      {11, "pipeline determinism (byte-identical reports)", criterion_determinism, 120},
  };

  int failures = 0;
  for (auto& c : criteria) {
    auto start = std::chrono::steady_clock::now();
    std::string det;
    bool ok = false;
    try {
      ok = c.fn(det);
    } catch (const std::exception& e) {
      det = std::string("exception: ") + e.what();
    }
    double secs =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    bool in_budget = secs <= c.budget_seconds;
    if (!in_budget) det += " [over budget]";
    bool pass = ok && in_budget;
    std::printf("[%s] criterion %2d: %-46s (%6.2fs) %s\n", pass ? "PASS" : "FAIL", c.id,
                c.name, secs, det.c_str());
    if (!pass) ++failures;
  }
  if (failures)
    std::printf("%d criterion(s) failed\n", failures);
  else
    std::printf("all 11 criteria passed\n");
  return failures == 0 ? 0 : 1;
}
