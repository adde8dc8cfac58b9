#include "codebook/builder.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <filesystem>
#include <future>
#include <limits>
#include <numeric>
#include <set>

#include "codebook/checkpoint.hpp"
#include "codebook/clustering.hpp"
#include "core/error.hpp"
#include "core/math.hpp"
#include "core/rng.hpp"
#include "recognizer/recognizer.hpp"

namespace valign {

namespace {

Eigen::MatrixXd to_matrix(const std::vector<ValueExpression>& exprs) {
  if (exprs.empty()) throw Error(ErrorCode::invalid_argument, "no expressions");
  std::size_t dim = 0;
  for (const auto& e : exprs) {
    if (!e.embedding)
      throw Error(ErrorCode::invalid_argument, "expression not embedded: " + e.text);
    if (dim == 0) dim = e.embedding->dim();
    if (e.embedding->dim() != dim)
      throw Error(ErrorCode::invalid_argument, "embedding dimension mismatch");
  }
  Eigen::MatrixXd m(exprs.size(), dim);
  for (std::size_t i = 0; i < exprs.size(); ++i)
    for (std::size_t j = 0; j < dim; ++j) m(i, j) = exprs[i].embedding->values[j];
  return m;
}

Embedding mean_embedding(const std::vector<ValueExpression>& members) {
  Embedding out;
  out.values.assign(members.front().embedding->dim(), 0.0);
  for (const auto& m : members)
    for (std::size_t j = 0; j < out.values.size(); ++j) out.values[j] += m.embedding->values[j];
  for (double& v : out.values) v /= members.size();
  return out;
}

// Members ordered by centrality (closest to the centroid first), capped so
// naming prompts stay bounded.
std::vector<ValueExpression> central_members(const ValueCode& code, std::size_t cap = 10) {
  std::vector<std::pair<double, std::size_t>> order;
  order.reserve(code.members.size());
  for (std::size_t i = 0; i < code.members.size(); ++i)
    order.emplace_back(-cosine_similarity(*code.members[i].embedding, code.centroid), i);
  std::stable_sort(order.begin(), order.end(),
                   [](const auto& a, const auto& b) { return a.first < b.first; });
  std::vector<ValueExpression> out;
  for (std::size_t i = 0; i < std::min(cap, order.size()); ++i)
    out.push_back(code.members[order[i].second]);
  return out;
}

void recompute_centroids(Codebook& cb) {
  for (auto& code : cb.codes)
    if (!code.members.empty()) code.centroid = mean_embedding(code.members);
}

void recompact_ids(Codebook& cb) {
  for (std::size_t i = 0; i < cb.codes.size(); ++i) cb.codes[i].id = static_cast<int>(i);
}

}  // namespace

CodedCorpus code_corpus(const Corpus& corpus, Gateway& gateway) {
  CodedCorpus out;
  out.reserve(corpus.documents.size());
  for (const auto& doc : corpus.documents) {
    CodedDocument cd;
    cd.doc = doc;
    cd.expressions = gateway.extract_value_expressions(doc);
    if (!cd.expressions.empty()) {
      std::vector<std::string> texts;
      texts.reserve(cd.expressions.size());
      for (const auto& e : cd.expressions) texts.push_back(e.text);
      auto embs = gateway.embed_texts(texts);
      for (std::size_t i = 0; i < cd.expressions.size(); ++i)
        cd.expressions[i].embedding = std::move(embs[i]);
    }
    out.push_back(std::move(cd));
  }
  return out;
}

Codebook init_codebook(const std::vector<ValueExpression>& exprs, const OptimizerConfig& cfg,
                       Gateway& gateway) {
  if (exprs.empty()) throw Error(ErrorCode::invalid_argument, "init_codebook: empty input");
  Eigen::MatrixXd full = to_matrix(exprs);
  Eigen::MatrixXd reduced;
  if (cfg.reducer == "pca")
    reduced = pca_reduce(full, cfg.reduce_dim);
  else if (cfg.reducer == "none")
    reduced = full;
  else
    throw Error(ErrorCode::invalid_argument, "init_codebook: unknown reducer '" + cfg.reducer + "'");

  auto clustering = density_cluster(reduced, cfg.min_cluster_size);

  std::vector<std::vector<std::size_t>> groups(clustering.num_clusters);
  std::vector<std::size_t> noise;
  for (std::size_t i = 0; i < exprs.size(); ++i) {
    int label = clustering.labels[i];
    if (label < 0)
      noise.push_back(i);
    else
      groups[label].push_back(i);
  }

  // Original-space centroids of the density clusters.
  struct ProtoCluster {
    std::vector<std::size_t> members;
    Embedding centroid;
  };
  std::vector<ProtoCluster> protos;
  for (auto& g : groups) {
    std::vector<ValueExpression> ms;
    for (auto i : g) ms.push_back(exprs[i]);
    protos.push_back({std::move(g), mean_embedding(ms)});
  }

  // Attach noise points to the nearest centroid when close enough, else
  // spawn a singleton cluster (which later noise points may join).
  for (std::size_t i : noise) {
    double best = -2.0;
    std::size_t best_c = 0;
    for (std::size_t c = 0; c < protos.size(); ++c) {
      double s = cosine_similarity(*exprs[i].embedding, protos[c].centroid);
      if (s > best) {
        best = s;
        best_c = c;
      }
    }
    if (!protos.empty() && best >= cfg.tau2) {
      protos[best_c].members.push_back(i);
    } else {
      protos.push_back({{i}, *exprs[i].embedding});
    }
  }
  for (auto& p : protos) {
    std::vector<ValueExpression> ms;
    for (auto i : p.members) ms.push_back(exprs[i]);
    p.centroid = mean_embedding(ms);
  }

  // Greedy merge of near-duplicate clusters (centroid cosine >= merge_sim).
  for (;;) {
    double best = -2.0;
    std::size_t bi = 0, bj = 0;
    for (std::size_t i = 0; i < protos.size(); ++i)
      for (std::size_t j = i + 1; j < protos.size(); ++j) {
        double s = cosine_similarity(protos[i].centroid, protos[j].centroid);
        if (s > best) {
          best = s;
          bi = i;
          bj = j;
        }
      }
    if (protos.size() < 2 || best < cfg.merge_sim) break;
    protos[bi].members.insert(protos[bi].members.end(), protos[bj].members.begin(),
                              protos[bj].members.end());
    std::sort(protos[bi].members.begin(), protos[bi].members.end());
    protos.erase(protos.begin() + bj);
    std::vector<ValueExpression> ms;
    for (auto i : protos[bi].members) ms.push_back(exprs[i]);
    protos[bi].centroid = mean_embedding(ms);
  }

  Codebook cb;
  for (auto& p : protos) {
    ValueCode code;
    code.id = static_cast<int>(cb.codes.size());
    for (auto i : p.members) code.members.push_back(exprs[i]);
    code.centroid = p.centroid;
    code.name = gateway.name_code(central_members(code));
    cb.codes.push_back(std::move(code));
  }
  return cb;
}

double distortion(const Document& doc, const CodeIndexSet& code_set, const Codebook& codebook,
                  const OptimizerConfig& cfg, Gateway& gateway,
                  const std::vector<double>& probs_over_set) {
  if (code_set.indices.empty())
    throw Error(ErrorCode::invalid_argument, "distortion: empty code set");
  std::vector<std::pair<std::string, double>> codes;
  for (std::size_t i = 0; i < code_set.indices.size(); ++i) {
    int idx = code_set.indices[i];
    if (idx < 0 || idx >= static_cast<int>(codebook.codes.size()))
      throw Error(ErrorCode::invalid_argument, "distortion: code index out of range");
    double p = probs_over_set.empty() ? 1.0 / code_set.indices.size() : probs_over_set[i];
    codes.emplace_back(codebook.codes[idx].name, p);
  }

  std::vector<std::string> texts{doc.text};
  for (int trial = 0; trial < cfg.N2; ++trial)
    texts.push_back(gateway.reconstruct_document(doc.topic_id, codes, trial));
  auto embs = gateway.embed_texts(texts);

  double acc = 0.0;
  for (int trial = 0; trial < cfg.N2; ++trial)
    acc += cosine_similarity(embs[0], embs[trial + 1]);
  return -acc / cfg.N2;
}

namespace {

struct DocResult {
  bool skipped = false;
  std::vector<DistortionRecord> records;
  std::vector<double> q_doc;
  double entropy = 0.0;
};

DocResult process_document(const CodedDocument& cd, const Codebook& codebook,
                           const RecognizerParams& params, const OptimizerConfig& cfg,
                           Gateway& gateway, std::uint64_t doc_seed) {
  DocResult res;
  if (cd.expressions.empty()) {
    res.skipped = true;
    return res;
  }
  res.q_doc = document_distribution(cd.expressions, codebook, params);
  res.entropy = shannon_entropy(res.q_doc);

  Rng rng(doc_seed);
  std::vector<CodeIndexSet> candidates;
  for (int c = 0; c < 2 * cfg.N1; ++c) {
    auto s = sample_code_set(res.q_doc, cfg.M, rng, cfg.sampling_floor);
    bool dup = false;
    for (const auto& prev : candidates)
      if (prev.indices == s.indices) {
        dup = true;
        break;
      }
    if (!dup && !s.indices.empty()) candidates.push_back(std::move(s));
  }

  struct Scored {
    CodeIndexSet set;
    double d;
    double seq_prob;
  };
  std::vector<Scored> scored;
  for (auto& s : candidates) {
    std::vector<double> probs;
    double total = 0.0;
    for (int idx : s.indices) total += res.q_doc[idx];
    for (int idx : s.indices) probs.push_back(total > 0 ? res.q_doc[idx] / total : 0.0);
    double d = distortion(cd.doc, s, codebook, cfg, gateway, probs);
    double p = sequential_set_probability(res.q_doc, s, cfg.sampling_floor);
    scored.push_back({std::move(s), d, p});
  }
  std::stable_sort(scored.begin(), scored.end(),
                   [](const Scored& a, const Scored& b) { return a.d < b.d; });
  if (static_cast<int>(scored.size()) > cfg.N1) scored.resize(cfg.N1);

  double prob_sum = 0.0;
  for (const auto& s : scored) prob_sum += s.seq_prob;
  for (auto& s : scored) {
    DistortionRecord rec;
    rec.doc_id = cd.doc.id;
    rec.code_set = s.set;
    rec.d = s.d;
    rec.q_weight = prob_sum > 0 ? s.seq_prob / prob_sum : 1.0 / scored.size();
    res.records.push_back(std::move(rec));
  }
  return res;
}

}  // namespace

ReconstructionOutput reconstruction_step(const CodedCorpus& corpus, const Codebook& codebook,
                                         const OptimizerConfig& cfg, Gateway& gateway,
                                         int iteration) {
  if (codebook.codes.empty())
    throw Error(ErrorCode::invalid_argument, "reconstruction_step: empty codebook");
  if (corpus.empty())
    throw Error(ErrorCode::invalid_argument, "reconstruction_step: empty corpus");

  RecognizerParams params;
  params.sigma2 = std::pow(estimate_sigma(codebook), 2);

  const std::size_t n_docs = corpus.size();
  std::vector<DocResult> results(n_docs);

  // Fan the per-document work out across workers; results land in indexed
  // slots so aggregation order is fixed.
  const int workers = std::max(1, std::min<int>(cfg.workers, static_cast<int>(n_docs)));
  std::atomic<std::size_t> next{0};
  auto run = [&]() {
    for (;;) {
      std::size_t i = next.fetch_add(1);
      if (i >= n_docs) return;
      std::uint64_t seed =
          derive_seed(cfg.seed, "reconstruction", (std::uint64_t(iteration) << 32) | i);
      results[i] = process_document(corpus[i], codebook, params, cfg, gateway, seed);
    }
  };
  if (workers == 1) {
    run();
  } else {
    std::vector<std::future<void>> futs;
    for (int w = 0; w < workers; ++w) futs.push_back(std::async(std::launch::async, run));
    for (auto& f : futs) f.get();
  }

  ReconstructionOutput out;
  out.usage.assign(codebook.codes.size(), 0.0);
  double dist_sum = 0.0, entropy_sum = 0.0;
  std::size_t processed = 0;
  for (std::size_t i = 0; i < n_docs; ++i) {
    auto& r = results[i];
    if (r.skipped) {
      out.skipped_docs.push_back(corpus[i].doc.id);
      continue;
    }
    ++processed;
    entropy_sum += r.entropy;
    for (std::size_t k = 0; k < r.q_doc.size(); ++k) out.usage[k] += r.q_doc[k];
    for (auto& rec : r.records) {
      dist_sum += rec.q_weight * rec.d;
      out.records.push_back(std::move(rec));
    }
  }
  if (processed == 0)
    throw Error(ErrorCode::degenerate, "reconstruction_step: every document was skipped");

  out.score.distortion_term = dist_sum / processed;
  out.score.per_doc_entropy_term = entropy_sum / processed;
  std::vector<double> global(out.usage);
  for (double& v : global) v /= processed;
  out.score.global_entropy_term = shannon_entropy(global);
  out.score.total =
      -(out.score.distortion_term - cfg.beta1 * cfg.M * out.score.per_doc_entropy_term) -
      cfg.global_entropy_sign * cfg.beta2 * cfg.M * out.score.global_entropy_term;
  return out;
}

std::vector<double> per_code_distortion(const Codebook& codebook,
                                        const std::vector<DistortionRecord>& records) {
  std::vector<double> sum(codebook.codes.size(), 0.0);
  std::vector<int> count(codebook.codes.size(), 0);
  for (const auto& rec : records)
    for (int idx : rec.code_set.indices) {
      sum[idx] += rec.d;
      count[idx] += 1;
    }
  std::vector<double> out(codebook.codes.size(), std::numeric_limits<double>::quiet_NaN());
  for (std::size_t k = 0; k < sum.size(); ++k)
    if (count[k] > 0) out[k] = sum[k] / count[k];
  return out;
}

RefineOutput refine_step(const Codebook& codebook, const std::vector<DistortionRecord>& records,
                         const std::vector<double>& usage, const OptimizerConfig& cfg,
                         Gateway& gateway) {
  if (usage.size() != codebook.codes.size())
    throw Error(ErrorCode::invalid_argument, "refine_step: usage length mismatch");
  RefineOutput out;
  out.codebook = codebook;
  Codebook& cb = out.codebook;

  const std::size_t K = cb.codes.size();
  double mean = std::accumulate(usage.begin(), usage.end(), 0.0) / K;
  double var = 0.0;
  for (double u : usage) var += (u - mean) * (u - mean);
  double sd = std::sqrt(var / K);
  if (sd == 0.0) return out;  // flagged: no refinement possible

  std::vector<double> z(K);
  for (std::size_t k = 0; k < K; ++k) z[k] = (usage[k] - mean) / sd;

  (void)records;  // per-code distortion has already been folded into histories

  // --- splits: overutilized codes whose distortion stopped improving ---
  std::vector<std::size_t> split_targets;
  for (std::size_t k = 0; k < K; ++k) {
    if (z[k] <= cfg.over_z) continue;
    const auto& hist = cb.codes[k].distortion_history;
    if (hist.size() < 2) continue;  // too young to judge stagnation
    double prev = hist[hist.size() - 2], cur = hist.back();
    if (std::isnan(prev) || std::isnan(cur)) continue;
    double improvement = (prev - cur) / std::max(std::abs(prev), 1e-12);
    if (improvement <= cfg.split_improvement && cb.codes[k].members.size() >= 2)
      split_targets.push_back(k);
  }

  // --- merges: underutilized codes into their nearest-centroid neighbor ---
  std::vector<std::size_t> merge_order;
  for (std::size_t k = 0; k < K; ++k)
    if (z[k] < cfg.under_z) merge_order.push_back(k);
  std::stable_sort(merge_order.begin(), merge_order.end(),
                   [&](std::size_t a, std::size_t b) { return z[a] < z[b]; });

  std::vector<bool> dissolved(K, false);
  std::set<std::size_t> renamed;  // codes needing a fresh name

  for (std::size_t k : merge_order) {
    if (dissolved[k]) continue;
    double best = -2.0;
    std::size_t target = K;
    for (std::size_t j = 0; j < K; ++j) {
      if (j == k || dissolved[j]) continue;
      double s = cosine_similarity(cb.codes[k].centroid, cb.codes[j].centroid);
      if (s > best) {
        best = s;
        target = j;
      }
    }
    if (target == K) break;  // nothing left to merge into
    auto& dst = cb.codes[target];
    auto& src = cb.codes[k];
    out.actions.push_back("merge: '" + src.name + "' -> '" + dst.name + "'");
    dst.members.insert(dst.members.end(), src.members.begin(), src.members.end());
    dst.centroid = mean_embedding(dst.members);
    dst.distortion_history.clear();
    dst.name.clear();  // empty name marks the code for renaming below
    dissolved[k] = true;
    renamed.insert(target);
    out.refined = true;
  }

  // Apply splits (skip codes that were just dissolved or absorbed a merge).
  std::vector<ValueCode> fresh;
  for (std::size_t k : split_targets) {
    if (dissolved[k] || renamed.count(k)) continue;
    auto& code = cb.codes[k];
    Eigen::MatrixXd pts = to_matrix(code.members);
    auto [left, right] = two_means(pts);
    if (left.empty() || right.empty()) continue;
    ValueCode a, b;
    for (int i : left) a.members.push_back(code.members[i]);
    for (int i : right) b.members.push_back(code.members[i]);
    a.centroid = mean_embedding(a.members);
    b.centroid = mean_embedding(b.members);
    out.actions.push_back("split: '" + code.name + "'");
    dissolved[k] = true;
    fresh.push_back(std::move(a));
    fresh.push_back(std::move(b));
    out.refined = true;
  }

  std::vector<ValueCode> next;
  for (std::size_t k = 0; k < K; ++k)
    if (!dissolved[k]) next.push_back(std::move(cb.codes[k]));
  for (auto& c : fresh) next.push_back(std::move(c));
  cb.codes = std::move(next);

  // Name every new or merged code; reset usage counters everywhere.
  for (auto& code : cb.codes) {
    if (code.name.empty()) code.name = gateway.name_code(central_members(code));
    code.usage = 0.0;
  }

  recompute_centroids(cb);
  recompact_ids(cb);
  cb.iteration = codebook.iteration;
  return out;
}

OptimizeResult optimize(const CodedCorpus& corpus, const OptimizerConfig& cfg, Gateway& gateway,
                        const std::string& checkpoint_dir) {
  namespace fs = std::filesystem;
  OptimizeResult result;
  int start_iter = 0;
  bool have_state = false;

  if (!checkpoint_dir.empty()) {
    fs::create_directories(checkpoint_dir);
    auto latest = latest_checkpoint(checkpoint_dir);
    if (latest) {
      auto loaded = load_checkpoint(*latest);
      if (loaded.stopped) {
        result.codebook = std::move(loaded.codebook);
        result.scores = std::move(loaded.scores);
        return result;
      }
      result.codebook = std::move(loaded.codebook);
      result.scores = std::move(loaded.scores);
      start_iter = loaded.iteration;
      have_state = true;
    }
  }

  if (!have_state) {
    std::vector<ValueExpression> all;
    for (const auto& cd : corpus)
      all.insert(all.end(), cd.expressions.begin(), cd.expressions.end());
    result.codebook = init_codebook(all, cfg, gateway);
    result.codebook.iteration = 0;
    if (!checkpoint_dir.empty())
      save_checkpoint(checkpoint_dir + "/iter_0000.json", result.codebook, cfg, result.scores,
                      false);
  }

  // Checkpoints hold the state entering the NEXT iteration (post-refinement),
  // so a resumed run replays exactly what an uninterrupted one would do. The
  // final checkpoint (stopped = true) keeps the scored codebook instead.
  for (int t = start_iter + 1; t <= cfg.T; ++t) {
    Codebook before = result.codebook;
    try {
      auto step = reconstruction_step(corpus, result.codebook, cfg, gateway, t);
      result.skipped_docs = step.skipped_docs;
      auto code_d = per_code_distortion(result.codebook, step.records);
      for (std::size_t k = 0; k < result.codebook.codes.size(); ++k) {
        result.codebook.codes[k].usage = step.usage[k];
        result.codebook.codes[k].distortion_history.push_back(code_d[k]);
      }
      result.codebook.score_history.push_back(step.score.total);
      result.codebook.iteration = t;
      result.scores.push_back(step.score);

      char name[32];
      std::snprintf(name, sizeof(name), "/iter_%04d.json", t);
      if (step.score.total > cfg.tau1 || t == cfg.T) {
        if (!checkpoint_dir.empty())
          save_checkpoint(checkpoint_dir + name, result.codebook, cfg, result.scores, true);
        break;
      }

      auto refined = refine_step(result.codebook, step.records, step.usage, cfg, gateway);
      result.codebook = std::move(refined.codebook);
      result.codebook.iteration = t;
      if (!checkpoint_dir.empty())
        save_checkpoint(checkpoint_dir + name, result.codebook, cfg, result.scores, false);
    } catch (...) {
      result.codebook = std::move(before);  // restore the last good state
      throw;
    }
  }
  return result;
}

}  // namespace valign
