#include "pipeline/pipeline.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <set>

#include "codebook/checkpoint.hpp"
#include "core/error.hpp"
#include "core/rng.hpp"
#include "pipeline/corpus_io.hpp"
#include "pipeline/report.hpp"
#include "recognizer/recognizer.hpp"
#include "uot/metric.hpp"

namespace valign {

using nlohmann::json;
namespace fs = std::filesystem;

namespace {

std::vector<std::string> groups_or_all(const std::vector<std::string>& requested,
                                       const std::map<std::string, std::string>& corpora) {
  if (!requested.empty()) return requested;
  std::vector<std::string> all;
  for (const auto& [g, _] : corpora) all.push_back(g);
  return all;
}

}  // namespace

// Seeded subset of the configured topics (sorted input, shuffled prefix,
// re-sorted output) so robustness studies are reproducible.
std::vector<std::string> select_topics(const RunConfig& cfg) {
  std::vector<std::string> topics = cfg.topics;
  std::sort(topics.begin(), topics.end());
  if (cfg.topic_fraction >= 1.0 || topics.empty()) return topics;
  std::size_t keep = static_cast<std::size_t>(
      std::ceil(cfg.topic_fraction * static_cast<double>(topics.size())));
  keep = std::max<std::size_t>(1, std::min(keep, topics.size()));
  Rng rng(derive_seed(cfg.seed, "topic-subset"));
  for (std::size_t i = topics.size() - 1; i > 0; --i) {
    std::size_t j = rng.uniform_index(i + 1);
    std::swap(topics[i], topics[j]);
  }
  topics.resize(keep);
  std::sort(topics.begin(), topics.end());
  return topics;
}

namespace {

RecognizerParams effective_params(const RunConfig& cfg, const Codebook& codebook) {
  RecognizerParams params = cfg.recognizer;
  if (params.sigma2 <= 0.0) {
    double sigma = estimate_sigma(codebook);
    params.sigma2 = sigma * sigma;
  }
  return params;
}

struct SideData {
  std::string label;
  std::vector<std::vector<double>> doc_dists;
  std::vector<std::string> doc_topics;
  std::vector<std::string> doc_ids;
  ValueHistogram hist;
  int skipped = 0;
};

// Per-document coding record: codes above the reporting floor, strongest
// first.
nlohmann::json coding_record(const std::string& label, const std::string& doc_id,
                             const std::vector<double>& dist, const Codebook& codebook,
                             double min_code_prob) {
  std::vector<std::pair<double, std::size_t>> order;
  for (std::size_t k = 0; k < dist.size(); ++k)
    if (dist[k] >= min_code_prob) order.emplace_back(-dist[k], k);
  std::sort(order.begin(), order.end());
  json codes = json::array();
  for (const auto& [neg_p, k] : order)
    codes.push_back({{"name", codebook.codes[k].name}, {"p", -neg_p}});
  return {{"corpus", label}, {"doc_id", doc_id}, {"codes", std::move(codes)}};
}

ValueHistogram histogram_of(const std::vector<std::vector<double>>& dists,
                            const std::vector<std::string>& topics, bool topic_weighted) {
  if (!topic_weighted) return corpus_histogram(dists);
  std::map<std::string, std::vector<std::size_t>> by_topic;
  for (std::size_t i = 0; i < dists.size(); ++i) by_topic[topics[i]].push_back(i);
  std::vector<std::vector<double>> topic_means;
  for (const auto& [topic, idxs] : by_topic) {
    std::vector<std::vector<double>> rows;
    for (auto i : idxs) rows.push_back(dists[i]);
    topic_means.push_back(corpus_histogram(rows).mass);
  }
  return corpus_histogram(topic_means);
}

SideData map_corpus(const std::string& label, const Corpus& corpus, const Codebook& codebook,
                    const RecognizerParams& params, Gateway& gateway, bool topic_weighted) {
  SideData side;
  side.label = label;
  CodedCorpus coded = code_corpus(corpus, gateway);
  for (const auto& cd : coded) {
    if (cd.expressions.empty()) {
      ++side.skipped;
      continue;
    }
    side.doc_dists.push_back(document_distribution(cd.expressions, codebook, params));
    side.doc_topics.push_back(cd.doc.topic_id);
    side.doc_ids.push_back(cd.doc.id);
  }
  if (side.doc_dists.empty())
    throw Error(ErrorCode::degenerate,
                "corpus '" + label + "' produced no documents with value content");
  side.hist = histogram_of(side.doc_dists, side.doc_topics, topic_weighted);
  return side;
}

}  // namespace

BuildOutput cmd_build_codebook(const RunConfig& cfg) {
  auto started = std::chrono::steady_clock::now();
  fs::create_directories(cfg.output_dir);
  {
    std::ofstream echo(cfg.output_dir + "/config_echo.json", std::ios::trunc);
    echo << cfg.raw.dump(2) << '\n';
  }
  auto gateway = make_gateway(cfg.gateway);

  CodedCorpus training;
  for (const auto& group : groups_or_all(cfg.training_groups, cfg.corpora)) {
    auto it = cfg.corpora.find(group);
    if (it == cfg.corpora.end())
      throw Error(ErrorCode::invalid_argument, "training group '" + group + "' has no corpus");
    auto ingested = ingest_corpus(it->second, group);
    auto coded = code_corpus(ingested.corpus, *gateway);
    for (auto& cd : coded) training.push_back(std::move(cd));
  }

  const std::string checkpoint_dir = cfg.output_dir + "/checkpoints";
  OptimizeResult result;
  try {
    result = optimize(training, cfg.optimizer, *gateway, checkpoint_dir);
  } catch (const Error& e) {
    throw Error(e.code(), std::string(e.what()) + " (completed iterations are checkpointed in " +
                              checkpoint_dir + "; re-run build-codebook to resume)");
  }

  BuildOutput out;
  out.checkpoint_path = cfg.output_dir + "/codebook.json";
  save_checkpoint(out.checkpoint_path, result.codebook, cfg.optimizer, result.scores, true);
  out.codebook_id = codebook_content_id(result.codebook);
  out.iterations = result.codebook.iteration;
  out.K = static_cast<int>(result.codebook.size());
  out.final_score = result.scores.empty() ? 0.0 : result.scores.back().total;

  std::vector<json> log;
  std::string hash = cfg.config_hash();
  for (std::size_t i = 0; i < result.scores.size(); ++i) {
    const auto& s = result.scores[i];
    log.push_back({{"iteration", i + 1},
                   {"distortion_term", s.distortion_term},
                   {"per_doc_entropy_term", s.per_doc_entropy_term},
                   {"global_entropy_term", s.global_entropy_term},
                   {"total", s.total},
                   {"skipped_docs", result.skipped_docs.size()},
                   {"codebook_id", out.codebook_id},
                   {"config_hash", hash},
                   {"seed", cfg.seed}});
  }
  write_jsonl(cfg.output_dir + "/scores.jsonl", log);

  // wall-clock goes to stderr only; report files stay byte-reproducible
  double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
  std::fprintf(stderr, "build-codebook: K=%d after %d iteration(s), S=%.6f, %.2fs\n", out.K,
               out.iterations, out.final_score, secs);
  return out;
}

std::string cmd_extract(const RunConfig& cfg, const std::string& out_path) {
  auto gateway = make_gateway(cfg.gateway);
  std::vector<json> lines;
  auto run_one = [&](const std::string& label, const std::string& path, bool enforce_group) {
    auto ingested = ingest_corpus(path, label, enforce_group);
    for (const auto& doc : ingested.corpus.documents) {
      auto exprs = gateway->extract_value_expressions(doc);
      for (const auto& e : exprs)
        lines.push_back({{"group", label},
                         {"doc_id", e.doc_id},
                         {"code_name_hint", e.code_name_hint},
                         {"text", e.text}});
    }
  };
  for (const auto& [group, path] : cfg.corpora) run_one(group, path, true);
  for (const auto& [label, path] : cfg.examinee_corpora) run_one(label, path, false);
  write_jsonl(out_path, lines);
  return out_path;
}

EvaluationReport cmd_evaluate(const RunConfig& cfg, const std::string& codebook_path,
                              const std::string& out_report_path) {
  auto started = std::chrono::steady_clock::now();
  auto checkpoint = load_checkpoint(codebook_path);
  const Codebook& codebook = checkpoint.codebook;
  const std::string codebook_id = codebook_content_id(codebook);
  const std::string config_hash = cfg.config_hash();
  auto gateway = make_gateway(cfg.gateway);
  RecognizerParams params = effective_params(cfg, codebook);

  // Reference side: histograms + a cost matrix per reference group.
  std::vector<SideData> references;
  std::vector<CostMatrix> costs;
  for (const auto& group : groups_or_all(cfg.reference_groups, cfg.corpora)) {
    auto it = cfg.corpora.find(group);
    if (it == cfg.corpora.end())
      throw Error(ErrorCode::invalid_argument, "reference group '" + group + "' has no corpus");
    auto ingested = ingest_corpus(it->second, group);
    references.push_back(
        map_corpus(group, ingested.corpus, codebook, params, *gateway, cfg.topic_weighted));
    costs.push_back(cost_matrix(codebook, references.back().doc_dists, cfg.metric));
  }

  // Examinee side: provided corpora plus generated documents.
  std::vector<SideData> examinees;
  for (const auto& [label, path] : cfg.examinee_corpora) {
    auto ingested = ingest_corpus(path, label, /*enforce_group=*/false);
    examinees.push_back(
        map_corpus(label, ingested.corpus, codebook, params, *gateway, cfg.topic_weighted));
  }
  if (!cfg.examinee_generation.empty()) {
    auto topics = select_topics(cfg);
    if (topics.empty())
      throw Error(ErrorCode::invalid_argument,
                  "examinee generation requested but no topics configured");
    for (const auto& spec : cfg.examinee_generation) {
      Corpus generated;
      generated.group = spec.label;
      for (const auto& topic : topics)
        for (int i = 0; i < spec.docs_per_topic; ++i) {
          Document d = gateway->generate_examinee_document(topic, spec.role, i);
          d.group = spec.label;
          d.id = spec.label + "-" + std::to_string(generated.documents.size());
          generated.documents.push_back(std::move(d));
        }
      examinees.push_back(
          map_corpus(spec.label, generated, codebook, params, *gateway, cfg.topic_weighted));
    }
  }
  if (examinees.empty())
    throw Error(ErrorCode::invalid_argument,
                "nothing to evaluate: no examinee corpora or generation specs");

  // Resume manifest: completed pairs survive a crashed run.
  const std::string manifest_path = out_report_path + ".manifest";
  std::map<std::pair<std::string, std::string>, json> done;
  if (fs::exists(manifest_path)) {
    for (const auto& rec : read_jsonl(manifest_path))
      done[{rec.at("examinee"), rec.at("reference")}] = rec;
  }

  EvaluationReport report;
  std::vector<json> lines;
  for (const auto& exam : examinees) {
    for (std::size_t gi = 0; gi < references.size(); ++gi) {
      const auto& ref = references[gi];
      json rec;
      auto key = std::make_pair(exam.label, ref.label);
      if (auto it = done.find(key); it != done.end()) {
        rec = it->second;
      } else {
        TransportPlan cross = unbalanced_sinkhorn(ref.hist, exam.hist, costs[gi], cfg.metric);
        double d_ab = uot_objective(cross.pi, ref.hist.mass, exam.hist.mass, costs[gi], cfg.metric);
        TransportPlan self_a = unbalanced_sinkhorn(ref.hist, ref.hist, costs[gi], cfg.metric);
        TransportPlan self_b = unbalanced_sinkhorn(exam.hist, exam.hist, costs[gi], cfg.metric);
        double d_aa =
            uot_objective(self_a.pi, ref.hist.mass, ref.hist.mass, costs[gi], cfg.metric);
        double d_bb =
            uot_objective(self_b.pi, exam.hist.mass, exam.hist.mass, costs[gi], cfg.metric);
        auto result = alignment_score(d_ab - 0.5 * d_aa - 0.5 * d_bb);
        rec = {{"examinee", exam.label},
               {"reference", ref.label},
               {"K", codebook.size()},
               {"epsilon", cfg.metric.epsilon},
               {"gamma", cfg.metric.gamma},
               {"d_uot", result.d_uot},
               {"r", result.r},
               {"r_display", result.r_display},
               {"converged", cross.converged && self_a.converged && self_b.converged},
               {"iters_used",
                std::max({cross.iters_used, self_a.iters_used, self_b.iters_used})},
               {"skipped_examinee_docs", exam.skipped},
               {"skipped_reference_docs", ref.skipped},
               {"codebook_id", codebook_id},
               {"config_hash", config_hash},
               {"seed", cfg.seed}};
        done[key] = rec;
        // flush progress
        std::vector<json> partial;
        for (const auto& [k, v] : done) partial.push_back(v);
        write_jsonl(manifest_path, partial);
      }
      lines.push_back(rec);
      EvaluationRecord r;
      r.examinee = exam.label;
      r.reference = ref.label;
      r.K = rec.at("K").get<int>();
      r.epsilon = rec.at("epsilon").get<double>();
      r.gamma = rec.at("gamma").get<double>();
      r.d_uot = rec.at("d_uot").get<double>();
      r.r = rec.at("r").get<double>();
      r.r_display = rec.at("r_display").get<double>();
      r.converged = rec.at("converged").get<bool>();
      r.iters_used = rec.at("iters_used").get<int>();
      r.skipped_examinee_docs = rec.at("skipped_examinee_docs").get<int>();
      r.skipped_reference_docs = rec.at("skipped_reference_docs").get<int>();
      r.codebook_id = codebook_id;
      r.config_hash = config_hash;
      report.records.push_back(std::move(r));
    }
  }

  write_jsonl(out_report_path, lines);
  {
    std::ofstream table(out_report_path + ".txt", std::ios::binary | std::ios::trunc);
    table << render_table(lines);
  }
  {
    std::ofstream echo(out_report_path + ".config.json", std::ios::trunc);
    echo << cfg.raw.dump(2) << '\n';
  }
  // per-document value coding, floored at recognizer.min_code_prob
  {
    std::vector<json> coding;
    for (const auto* side_list : {&references, &examinees})
      for (const auto& side : *side_list)
        for (std::size_t i = 0; i < side.doc_dists.size(); ++i)
          coding.push_back(coding_record(side.label, side.doc_ids[i], side.doc_dists[i],
                                         codebook, params.min_code_prob));
    write_jsonl(out_report_path + ".coding.jsonl", coding);
  }
  std::error_code ec;
  fs::remove(manifest_path, ec);
  report.report_path = out_report_path;
  double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
  std::fprintf(stderr, "evaluate: %zu pair(s) scored, %.2fs\n", report.records.size(), secs);
  return report;
}

namespace {

ScoreCube load_cube(const std::string& path) {
  ScoreCube cube;
  for (const auto& rec : read_jsonl(path)) {
    try {
      cube.set(rec.at("method").get<std::string>(), rec.at("group").get<std::string>(),
               rec.at("model").get<std::string>(), rec.at("score").get<double>());
    } catch (const json::exception& e) {
      throw Error(ErrorCode::parse,
                  "score cube " + path + ": record missing field: " + e.what());
    }
  }
  return cube;
}

}  // namespace

std::string cmd_validate(const RunConfig& cfg, const std::string& cube_path,
                         const std::string& out_report_path) {
  ScoreCube cube = load_cube(cube_path);
  const std::string config_hash = cfg.config_hash();
  std::vector<json> lines;

  auto push_error = [&](json rec, const std::string& message) {
    rec["error"] = message;
    lines.push_back(std::move(rec));
  };

  // Convergent validity per method.
  for (const auto& method : cube.methods) {
    json rec = {{"stat", "convergent_validity"}, {"method", method}};
    try {
      auto res = convergent_validity(cube, method, cfg.validate.fisher_z);
      rec["value"] = res.value;
      rec["used"] = res.used;
      rec["skipped"] = res.skipped;
      lines.push_back(std::move(rec));
    } catch (const Error& e) {
      push_error(std::move(rec), e.what());
    }
  }

  // Discriminant validity per method (when pair sets are configured).
  if (!cfg.validate.pairs.similar.empty() || !cfg.validate.pairs.distinct.empty()) {
    for (const auto& method : cube.methods) {
      json rec = {{"stat", "discriminant_validity"}, {"method", method}};
      try {
        auto res = discriminant_validity(cube, method, cfg.validate.pairs, cfg.validate.fisher_z);
        rec["value"] = res.value;
        rec["used"] = res.used;
        rec["skipped"] = res.skipped;
        lines.push_back(std::move(rec));
      } catch (const Error& e) {
        push_error(std::move(rec), e.what());
      }
    }
  }

  // Priming deltas against the control model label.
  const std::string& control = cfg.validate.control_label;
  if (cube.models.count(control)) {
    for (const auto& method : cube.methods)
      for (const auto& group : cube.groups) {
        auto r_control = cube.at(method, group, control);
        if (!r_control) continue;
        for (const auto& model : cube.models) {
          if (model == control) continue;
          auto r_steered = cube.at(method, group, model);
          if (!r_steered) continue;
          json rec = {{"stat", "priming_delta"},
                      {"method", method},
                      {"group", group},
                      {"model", model}};
          try {
            double delta = priming_delta(*r_control, *r_steered);
            rec["value"] = delta;
            rec["percent"] = delta * 100.0;
            lines.push_back(std::move(rec));
          } catch (const Error& e) {
            push_error(std::move(rec), e.what());
          }
        }
      }
  }

  // Reliability over repeated measurements (Cronbach's alpha + CV).
  if (!cfg.validate.retest_cubes.empty()) {
    std::vector<ScoreCube> trials{cube};
    for (const auto& path : cfg.validate.retest_cubes) trials.push_back(load_cube(path));
    for (const auto& method : cube.methods) {
      json rec = {{"stat", "reliability"}, {"method", method}};
      try {
        std::vector<std::vector<double>> matrix;  // subjects x trials
        std::vector<double> cvs;
        for (const auto& group : cube.groups)
          for (const auto& model : cube.models) {
            std::vector<double> row;
            for (const auto& t : trials) {
              auto v = t.at(method, group, model);
              if (!v) break;
              row.push_back(*v);
            }
            if (row.size() != trials.size()) continue;  // incomplete subject
            matrix.push_back(row);
          }
        if (matrix.size() < 2)
          throw Error(ErrorCode::degenerate, "fewer than 2 complete subjects across trials");
        rec["alpha"] = cronbach_alpha(matrix);
        for (const auto& row : matrix) cvs.push_back(coefficient_of_variation(row));
        double cv = 0.0;
        for (double c : cvs) cv += c;
        rec["cv"] = cv / cvs.size();
        rec["subjects"] = matrix.size();
        rec["trials"] = trials.size();
        lines.push_back(std::move(rec));
      } catch (const Error& e) {
        push_error(std::move(rec), e.what());
      }
    }
  }

  // Inter-annotator agreement from a labels file.
  if (!cfg.validate.labels_file.empty() && fs::exists(cfg.validate.labels_file)) {
    json rec = {{"stat", "cohen_kappa"}};
    try {
      std::map<std::string, std::map<std::string, std::string>> by_annotator;
      std::set<std::string> items;
      for (const auto& l : read_jsonl(cfg.validate.labels_file)) {
        by_annotator[l.at("annotator").get<std::string>()][l.at("item").get<std::string>()] =
            l.at("label").get<std::string>();
        items.insert(l.at("item").get<std::string>());
      }
      std::vector<std::string> annotators;
      for (const auto& [a, _] : by_annotator) annotators.push_back(a);
      if (annotators.size() < 2)
        throw Error(ErrorCode::invalid_argument, "need at least two annotators");
      std::vector<double> kappas;
      for (std::size_t i = 0; i < annotators.size(); ++i)
        for (std::size_t j = i + 1; j < annotators.size(); ++j) {
          std::vector<std::string> la, lb;
          for (const auto& item : items) {
            auto ia = by_annotator[annotators[i]].find(item);
            auto ib = by_annotator[annotators[j]].find(item);
            if (ia == by_annotator[annotators[i]].end() ||
                ib == by_annotator[annotators[j]].end())
              continue;
            la.push_back(ia->second);
            lb.push_back(ib->second);
          }
          if (!la.empty()) kappas.push_back(cohen_kappa(la, lb));
        }
      if (kappas.empty()) throw Error(ErrorCode::degenerate, "no overlapping annotations");
      double mean = 0.0;
      for (double k : kappas) mean += k;
      mean /= kappas.size();
      rec["value"] = mean;
      rec["band"] = kappa_band(mean);
      rec["pairs"] = kappas.size();
      lines.push_back(std::move(rec));
    } catch (const Error& e) {
      push_error(std::move(rec), e.what());
    }
  }

  for (auto& l : lines) {
    l["config_hash"] = config_hash;
    l["seed"] = cfg.seed;
  }
  write_jsonl(out_report_path, lines);
  {
    std::ofstream table(out_report_path + ".txt", std::ios::binary | std::ios::trunc);
    table << render_table(lines);
  }
  return out_report_path;
}

}  // namespace valign
