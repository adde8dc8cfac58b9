#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <map>
#include <set>

#include "codebook/builder.hpp"
#include "codebook/checkpoint.hpp"
#include "core/error.hpp"
#include "core/math.hpp"
#include "core/rng.hpp"
#include "recognizer/recognizer.hpp"
#include "support/planted.hpp"
#include "test_util.hpp"

using namespace valign;

namespace {

// Fully scripted gateway for exact-arithmetic distortion tests. Embeddings
// come from a lookup; reconstructions are synthesized keyed by trial.
class ScriptedGateway : public Gateway {
 public:
  std::map<std::string, std::vector<double>> embeddings;
  bool echo_reconstruction = false;  // reconstruct returns the doc text itself
  std::string doc_text;              // used when echoing

  std::vector<ValueExpression> extract_value_expressions(const Document& doc) override {
    auto it = planted.find(doc.id);
    if (it == planted.end()) return {};
    return it->second;
  }
  std::string reconstruct_document(const std::string& topic,
                                   const std::vector<std::pair<std::string, double>>& codes,
                                   std::uint64_t trial) override {
    if (echo_reconstruction) return doc_text;
    std::string names;
    for (const auto& [n, p] : codes) names += n + ",";
    return "recon:" + topic + ":" + names + ":" + std::to_string(trial);
  }
  std::string name_code(const std::vector<ValueExpression>& members) override {
    return members.empty() ? "none" : members.front().code_name_hint;
  }
  Document generate_examinee_document(const std::string& topic,
                                      const std::optional<GroupId>& role,
                                      std::uint64_t index) override {
    (void)topic;
    (void)role;
    (void)index;
    return {};
  }
  std::vector<Embedding> embed_texts(const std::vector<std::string>& texts) override {
    std::vector<Embedding> out;
    for (const auto& t : texts) {
      auto it = embeddings.find(t);
      if (it == embeddings.end())
        throw Error(ErrorCode::internal, "scripted gateway missing embedding for: " + t);
      out.push_back(Embedding{it->second});
    }
    return out;
  }
  std::uint64_t provider_calls() const override { return 0; }

  std::map<std::string, std::vector<ValueExpression>> planted;
};

Embedding unit_axis(std::size_t dim, std::size_t axis) {
  Embedding e;
  e.values.assign(dim, 0.0);
  e.values[axis] = 1.0;
  return e;
}

ValueCode simple_code(int id, const std::string& name, const Embedding& centroid,
                      int members, double wobble = 0.0) {
  ValueCode code;
  code.id = id;
  code.name = name;
  code.centroid = centroid;
  Rng rng(id + 100);
  for (int i = 0; i < members; ++i) {
    Embedding e = centroid;
    if (wobble > 0)
      for (double& v : e.values) v += wobble * rng.normal();
    ValueExpression expr;
    expr.text = name + " member " + std::to_string(i);
    expr.code_name_hint = name;
    expr.embedding = std::move(e);
    code.members.push_back(std::move(expr));
  }
  if (!code.members.empty()) {
    Embedding mean;
    mean.values.assign(centroid.dim(), 0.0);
    for (const auto& m : code.members)
      for (std::size_t j = 0; j < mean.values.size(); ++j)
        mean.values[j] += m.embedding->values[j];
    for (double& v : mean.values) v /= code.members.size();
    code.centroid = mean;
  }
  return code;
}

}  // namespace

TEST_CASE("init_codebook recovers planted clusters") {
  test::PlantedSpec spec;
  spec.code_phrases = {"filial devotion", "personal autonomy", "environmental stewardship"};
  spec.docs = 50;
  spec.phrases_per_doc = 3;
  spec.seed = 21;
  auto corpus = test::make_planted_corpus(spec);
  auto gateway = make_gateway(test::planted_mock_profiles(21));
  auto planted = test::extract_planted(corpus, spec, *gateway);

  OptimizerConfig cfg;
  auto cb = init_codebook(planted.expressions, cfg, *gateway);
  CHECK(cb.size() == 3);

  // member partition: every expression lands in exactly one code
  std::size_t member_total = 0;
  for (const auto& code : cb.codes) member_total += code.members.size();
  CHECK(member_total == planted.expressions.size());

  // purity by majority phrase
  std::size_t correct = 0;
  for (const auto& code : cb.codes) {
    std::map<std::string, int> votes;
    for (const auto& m : code.members) {
      for (const auto& phrase : spec.code_phrases)
        if (m.text.find(phrase) != std::string::npos) votes[phrase]++;
    }
    int best = 0;
    for (auto& [_, n] : votes) best = std::max(best, n);
    correct += best;
  }
  CHECK(double(correct) / member_total >= 0.95);

  // centroid consistency after init
  for (const auto& code : cb.codes) {
    Embedding mean;
    mean.values.assign(code.centroid.dim(), 0.0);
    for (const auto& m : code.members)
      for (std::size_t j = 0; j < mean.values.size(); ++j)
        mean.values[j] += m.embedding->values[j];
    for (double& v : mean.values) v /= code.members.size();
    for (std::size_t j = 0; j < mean.values.size(); ++j)
      CHECK(std::abs(mean.values[j] - code.centroid.values[j]) <= 1e-9);
  }

  // ids contiguous, names assigned
  for (std::size_t k = 0; k < cb.codes.size(); ++k) {
    CHECK(cb.codes[k].id == int(k));
    CHECK_FALSE(cb.codes[k].name.empty());
  }
}

TEST_CASE("init_codebook merges near-duplicate clusters") {
  // two tight clusters whose centroids have cosine ~0.95 (> merge_sim 0.9)
  std::size_t dim = 8;
  std::vector<ValueExpression> exprs;
  Rng rng(4);
  double angle_cos = 0.95, angle_sin = std::sqrt(1 - 0.95 * 0.95);
  for (int cluster = 0; cluster < 2; ++cluster) {
    for (int i = 0; i < 10; ++i) {
      Embedding e;
      e.values.assign(dim, 0.0);
      if (cluster == 0) {
        e.values[0] = 1.0;
      } else {
        e.values[0] = angle_cos;
        e.values[1] = angle_sin;
      }
      for (std::size_t d2 = 2; d2 < dim; ++d2) e.values[d2] = 0.01 * rng.normal();
      ValueExpression v;
      v.text = "cluster " + std::to_string(cluster) + " member " + std::to_string(i);
      v.code_name_hint = cluster == 0 ? "alpha" : "beta";
      v.embedding = std::move(e);
      exprs.push_back(std::move(v));
    }
  }
  ScriptedGateway gw;
  OptimizerConfig cfg;
  cfg.min_cluster_size = 5;
  auto cb = init_codebook(exprs, cfg, gw);
  CHECK(cb.size() == 1);
  CHECK(cb.codes[0].members.size() == 20);
}

TEST_CASE("init_codebook degenerate fallback: tiny input becomes singletons") {
  std::vector<ValueExpression> exprs;
  for (int i = 0; i < 4; ++i) {
    ValueExpression v;
    v.text = "lonely " + std::to_string(i);
    v.code_name_hint = "lonely";
    v.embedding = unit_axis(6, i);
    exprs.push_back(std::move(v));
  }
  ScriptedGateway gw;
  OptimizerConfig cfg;  // min_cluster_size 5 > 4 inputs
  auto cb = init_codebook(exprs, cfg, gw);
  CHECK(cb.size() <= 4);
  CHECK(cb.size() >= 1);
  std::size_t members = 0;
  for (const auto& c : cb.codes) members += c.members.size();
  CHECK(members == 4);

  CHECK_THROWS_AS(init_codebook({}, cfg, gw), Error);
}

TEST_CASE("distortion mean-cosine arithmetic") {
  std::size_t dim = 4;
  Codebook cb;
  cb.codes.push_back(simple_code(0, "alpha", unit_axis(dim, 0), 2));

  Document doc;
  doc.id = "d0";
  doc.topic_id = "t";
  doc.text = "original text";

  OptimizerConfig cfg;
  cfg.N2 = 3;

  CodeIndexSet set;
  set.indices = {0};

  SUBCASE("perfect reconstruction") {
    ScriptedGateway gw;
    gw.echo_reconstruction = true;
    gw.doc_text = doc.text;
    gw.embeddings[doc.text] = {1, 0, 0, 0};
    CHECK(distortion(doc, set, cb, cfg, gw) == doctest::Approx(-1.0));
  }

  SUBCASE("orthogonal reconstructions") {
    ScriptedGateway gw;
    gw.embeddings[doc.text] = {1, 0, 0, 0};
    for (int trial = 0; trial < 3; ++trial)
      gw.embeddings["recon:t:alpha,:" + std::to_string(trial)] = {0, 1, 0, 0};
    CHECK(distortion(doc, set, cb, cfg, gw) == doctest::Approx(0.0));
  }

  SUBCASE("mean of cosines 0.8, 0.6, 0.7") {
    ScriptedGateway gw;
    gw.embeddings[doc.text] = {1, 0, 0, 0};
    auto with_cos = [&](double c) -> std::vector<double> {
      return {c, std::sqrt(1 - c * c), 0, 0};
    };
    gw.embeddings["recon:t:alpha,:0"] = with_cos(0.8);
    gw.embeddings["recon:t:alpha,:1"] = with_cos(0.6);
    gw.embeddings["recon:t:alpha,:2"] = with_cos(0.7);
    CHECK(distortion(doc, set, cb, cfg, gw) == doctest::Approx(-0.7).epsilon(1e-12));
  }

  SUBCASE("bad code index") {
    ScriptedGateway gw;
    CodeIndexSet bad;
    bad.indices = {5};
    CHECK_THROWS_AS(distortion(doc, bad, cb, cfg, gw), Error);
  }
}

TEST_CASE("reconstruction_step: degenerate single-code pipeline gives S = 1") {
  std::size_t dim = 4;
  Codebook cb;
  cb.codes.push_back(simple_code(0, "alpha", unit_axis(dim, 0), 2));

  Document doc;
  doc.id = "d0";
  doc.topic_id = "t";
  doc.text = "original";

  ScriptedGateway gw;
  gw.echo_reconstruction = true;
  gw.doc_text = doc.text;
  gw.embeddings[doc.text] = {1, 0, 0, 0};
  ValueExpression expr;
  expr.text = "expr";
  expr.code_name_hint = "alpha";
  expr.embedding = unit_axis(dim, 0);
  gw.planted[doc.id] = {expr};

  CodedCorpus corpus;
  corpus.push_back({doc, gw.planted[doc.id]});

  OptimizerConfig cfg;
  cfg.N1 = 1;
  cfg.N2 = 2;
  cfg.M = 1;
  cfg.beta1 = 0.0;
  cfg.beta2 = 0.0;
  auto out = reconstruction_step(corpus, cb, cfg, gw);
  CHECK(out.score.total == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(out.score.distortion_term == doctest::Approx(-1.0).epsilon(1e-12));
  CHECK(out.records.size() == 1);
  CHECK(out.usage[0] == doctest::Approx(1.0));
  CHECK(out.skipped_docs.empty());
}

TEST_CASE("reconstruction_step matches a straight-line score oracle") {
  // planted two-cluster corpus through the real mock gateway
  test::PlantedSpec spec;
  spec.code_phrases = {"filial devotion", "personal autonomy", "frugality", "open dialogue"};
  spec.docs = 20;
  spec.phrases_per_doc = 2;
  spec.seed = 77;
  auto corpus_raw = test::make_planted_corpus(spec);
  auto gateway = make_gateway(test::planted_mock_profiles(77));
  auto coded = code_corpus(corpus_raw, *gateway);

  OptimizerConfig cfg;
  cfg.M = 2;
  cfg.N1 = 2;
  cfg.N2 = 2;
  cfg.seed = 7;
  cfg.workers = 3;
  std::vector<ValueExpression> all;
  for (const auto& cd : coded) all.insert(all.end(), cd.expressions.begin(), cd.expressions.end());
  auto cb = init_codebook(all, cfg, *gateway);

  auto out = reconstruction_step(coded, cb, cfg, *gateway, 1);

  // independent re-implementation of the score from the step's raw pieces
  RecognizerParams params;
  params.sigma2 = std::pow(estimate_sigma(cb), 2);
  double n_docs = 0, dist_sum = 0, entropy_sum = 0;
  std::vector<double> usage(cb.size(), 0.0);
  std::map<std::string, std::vector<const DistortionRecord*>> by_doc;
  for (const auto& rec : out.records) by_doc[rec.doc_id].push_back(&rec);
  for (const auto& cd : coded) {
    if (cd.expressions.empty()) continue;
    n_docs += 1;
    auto q = document_distribution(cd.expressions, cb, params);
    entropy_sum += shannon_entropy(q);
    for (std::size_t k = 0; k < q.size(); ++k) usage[k] += q[k];
    for (const auto* rec : by_doc[cd.doc.id]) dist_sum += rec->q_weight * rec->d;
  }
  std::vector<double> global(usage);
  for (double& v : global) v /= n_docs;
  double oracle = -(dist_sum / n_docs - cfg.beta1 * cfg.M * (entropy_sum / n_docs)) -
                  cfg.beta2 * cfg.M * shannon_entropy(global);
  CHECK(out.score.total == doctest::Approx(oracle).epsilon(1e-9));

  // breakdown reconstructs from its own terms
  double recombined =
      -(out.score.distortion_term - cfg.beta1 * cfg.M * out.score.per_doc_entropy_term) -
      cfg.beta2 * cfg.M * out.score.global_entropy_term;
  CHECK(out.score.total == doctest::Approx(recombined).epsilon(1e-12));

  // per-doc kept-set weights sum to one
  std::map<std::string, double> weight_sums;
  for (const auto& rec : out.records) weight_sums[rec.doc_id] += rec.q_weight;
  for (const auto& [doc, sum] : weight_sums) CHECK(sum == doctest::Approx(1.0).epsilon(1e-9));
}

TEST_CASE("reconstruction_step skips empty documents and reports them") {
  std::size_t dim = 4;
  Codebook cb;
  cb.codes.push_back(simple_code(0, "alpha", unit_axis(dim, 0), 2));
  ScriptedGateway gw;
  gw.echo_reconstruction = true;
  gw.doc_text = "text";
  gw.embeddings["text"] = {1, 0, 0, 0};

  Document with, without;
  with.id = "with";
  with.topic_id = "t";
  with.text = "text";
  without.id = "without";
  without.topic_id = "t";
  without.text = "text";
  ValueExpression expr;
  expr.text = "e";
  expr.code_name_hint = "alpha";
  expr.embedding = unit_axis(dim, 0);

  CodedCorpus corpus;
  corpus.push_back({with, {expr}});
  corpus.push_back({without, {}});

  OptimizerConfig cfg;
  cfg.N1 = 1;
  cfg.N2 = 1;
  cfg.M = 1;
  auto out = reconstruction_step(corpus, cb, cfg, gw);
  REQUIRE(out.skipped_docs.size() == 1);
  CHECK(out.skipped_docs[0] == "without");
}

TEST_CASE("refine_step: zero-variance usage means no refinement") {
  std::size_t dim = 6;
  Codebook cb;
  for (int k = 0; k < 3; ++k)
    cb.codes.push_back(simple_code(k, "code" + std::to_string(k), unit_axis(dim, k), 3, 0.05));
  ScriptedGateway gw;
  OptimizerConfig cfg;
  auto out = refine_step(cb, {}, {10, 10, 10}, cfg, gw);
  CHECK_FALSE(out.refined);
  CHECK(out.codebook.size() == 3);
}

TEST_CASE("refine_step splits an overutilized stagnant code") {
  std::size_t dim = 8;
  Codebook cb;
  // code 0: heavy usage, flat distortion history, spread-out members
  auto big = simple_code(0, "big", unit_axis(dim, 0), 12, 0.4);
  big.distortion_history = {-0.5, -0.5};
  cb.codes.push_back(big);
  for (int k = 1; k < 12; ++k) {
    auto code = simple_code(k, "code" + std::to_string(k), unit_axis(dim, k % dim), 3, 0.02);
    code.distortion_history = {-0.6, -0.7};  // improving
    cb.codes.push_back(code);
  }
  std::vector<double> usage{100};
  for (int k = 1; k < 12; ++k) usage.push_back(1.0);

  ScriptedGateway gw;
  OptimizerConfig cfg;
  auto out = refine_step(cb, {}, usage, cfg, gw);
  CHECK(out.refined);
  CHECK(out.codebook.size() == 13);  // 12 - 1 + 2, no merges fire at these z-scores

  // conservation: member multiset preserved
  std::multiset<std::string> before, after;
  for (const auto& c : cb.codes)
    for (const auto& m : c.members) before.insert(m.text);
  for (const auto& c : out.codebook.codes)
    for (const auto& m : c.members) after.insert(m.text);
  CHECK(before == after);

  // ids recompacted, usage reset
  for (std::size_t k = 0; k < out.codebook.codes.size(); ++k) {
    CHECK(out.codebook.codes[k].id == int(k));
    CHECK(out.codebook.codes[k].usage == 0.0);
  }
}

TEST_CASE("refine_step leaves young overutilized codes alone") {
  std::size_t dim = 8;
  Codebook cb;
  auto big = simple_code(0, "big", unit_axis(dim, 0), 12, 0.4);
  big.distortion_history = {-0.5};  // only one iteration of history
  cb.codes.push_back(big);
  for (int k = 1; k < 12; ++k)
    cb.codes.push_back(simple_code(k, "code" + std::to_string(k), unit_axis(dim, k % dim), 3));
  std::vector<double> usage{100};
  for (int k = 1; k < 12; ++k) usage.push_back(1.0);
  ScriptedGateway gw;
  OptimizerConfig cfg;
  auto out = refine_step(cb, {}, usage, cfg, gw);
  CHECK(out.codebook.size() == 12);
}

TEST_CASE("refine_step merges underutilized codes into their nearest neighbor") {
  std::size_t dim = 6;
  Codebook cb;
  cb.codes.push_back(simple_code(0, "anchor", unit_axis(dim, 0), 4, 0.02));
  cb.codes.push_back(simple_code(1, "other", unit_axis(dim, 1), 4, 0.02));
  // code 2 sits close to code 0 and is starved
  Embedding near;
  near.values.assign(dim, 0.0);
  near.values[0] = 0.97;
  near.values[2] = std::sqrt(1 - 0.97 * 0.97);
  cb.codes.push_back(simple_code(2, "starved", near, 2, 0.02));

  ScriptedGateway gw;
  OptimizerConfig cfg;
  auto out = refine_step(cb, {}, {10.0, 9.0, 0.5}, cfg, gw);
  CHECK(out.refined);
  REQUIRE(out.codebook.size() == 2);
  // absorbed into the nearest (code 0): its member count grew
  std::size_t total = 0;
  bool found_merged = false;
  for (const auto& c : out.codebook.codes) {
    total += c.members.size();
    if (c.members.size() == 6) found_merged = true;
  }
  CHECK(total == 10);
  CHECK(found_merged);
}

TEST_CASE("per_code_distortion averages records touching each code") {
  Codebook cb;
  for (int k = 0; k < 3; ++k)
    cb.codes.push_back(simple_code(k, "c" + std::to_string(k), unit_axis(4, k), 1));
  std::vector<DistortionRecord> records;
  DistortionRecord a;
  a.doc_id = "d";
  a.code_set.indices = {0, 1};
  a.d = -0.4;
  DistortionRecord b;
  b.doc_id = "d";
  b.code_set.indices = {0};
  b.d = -0.8;
  records.push_back(a);
  records.push_back(b);
  auto d = per_code_distortion(cb, records);
  CHECK(d[0] == doctest::Approx(-0.6));
  CHECK(d[1] == doctest::Approx(-0.4));
  CHECK(std::isnan(d[2]));
}

TEST_CASE("optimize stops early when the initial codebook already scores above tau1") {
  test::PlantedSpec spec;
  spec.code_phrases = {"filial devotion", "personal autonomy", "frugality"};
  spec.docs = 15;
  spec.phrases_per_doc = 2;
  spec.seed = 5;
  auto corpus_raw = test::make_planted_corpus(spec);
  auto gateway = make_gateway(test::planted_mock_profiles(5));
  auto coded = code_corpus(corpus_raw, *gateway);

  OptimizerConfig cfg;
  cfg.M = 2;
  cfg.N1 = 2;
  cfg.N2 = 2;
  cfg.T = 5;
  cfg.tau1 = 0.2;  // reachable on the first pass for anchored reconstructions
  cfg.beta1 = 0.0;
  cfg.beta2 = 0.0;
  cfg.seed = 5;
  auto result = optimize(coded, cfg, *gateway);
  CHECK(result.scores.size() == 1);
  CHECK(result.scores[0].total > cfg.tau1);
  CHECK(result.codebook.iteration == 1);
}

TEST_CASE("optimize runs exactly T reconstruction steps when tau1 is unreachable") {
  test::PlantedSpec spec;
  spec.code_phrases = {"filial devotion", "personal autonomy", "frugality"};
  spec.docs = 10;
  spec.phrases_per_doc = 2;
  spec.seed = 6;
  auto corpus_raw = test::make_planted_corpus(spec);
  auto gateway = make_gateway(test::planted_mock_profiles(6));
  auto coded = code_corpus(corpus_raw, *gateway);

  OptimizerConfig cfg;
  cfg.M = 2;
  cfg.N1 = 1;
  cfg.N2 = 1;
  cfg.T = 2;
  cfg.tau1 = 100.0;
  cfg.seed = 6;
  auto result = optimize(coded, cfg, *gateway);
  CHECK(result.scores.size() == 2);
  CHECK(result.codebook.iteration == 2);
}

TEST_CASE("optimize is deterministic and checkpoints round-trip") {
  test::PlantedSpec spec;
  spec.code_phrases = {"filial devotion", "personal autonomy", "frugality", "mutual trust"};
  spec.docs = 12;
  spec.phrases_per_doc = 2;
  spec.seed = 9;
  auto corpus_raw = test::make_planted_corpus(spec);

  auto run = [&](const std::string& dir) {
    auto gateway = make_gateway(test::planted_mock_profiles(9));
    auto coded = code_corpus(corpus_raw, *gateway);
    OptimizerConfig cfg;
    cfg.M = 2;
    cfg.N1 = 1;
    cfg.N2 = 1;
    cfg.T = 2;
    cfg.tau1 = 100.0;
    cfg.seed = 9;
    return optimize(coded, cfg, *gateway, dir);
  };

  test::TempDir dir_a("valign-opt-a");
  test::TempDir dir_b("valign-opt-b");
  auto ra = run(dir_a.str());
  auto rb = run(dir_b.str());
  CHECK(codebook_content_id(ra.codebook) == codebook_content_id(rb.codebook));
  REQUIRE(ra.scores.size() == rb.scores.size());
  for (std::size_t i = 0; i < ra.scores.size(); ++i)
    CHECK(ra.scores[i].total == doctest::Approx(rb.scores[i].total).epsilon(1e-15));

  // resume from the finished checkpoint directory returns the same codebook
  auto gateway = make_gateway(test::planted_mock_profiles(9));
  OptimizerConfig cfg;
  cfg.seed = 9;
  auto resumed = optimize({}, cfg, *gateway, dir_a.str());
  CHECK(codebook_content_id(resumed.codebook) == codebook_content_id(ra.codebook));

  // checkpoint file round-trip preserves content identity
  auto latest = latest_checkpoint(dir_a.str());
  REQUIRE(latest.has_value());
  auto loaded = load_checkpoint(*latest);
  CHECK(codebook_content_id(loaded.codebook) == codebook_content_id(ra.codebook));
}

namespace {

// Delegates to a real gateway but fails one reconstruction call, to exercise
// checkpoint restore and resume.
class FlakyGateway : public Gateway {
 public:
  FlakyGateway(std::shared_ptr<Gateway> inner, int fail_on_call)
      : inner_(std::move(inner)), fail_on_call_(fail_on_call) {}

  std::vector<ValueExpression> extract_value_expressions(const Document& d) override {
    return inner_->extract_value_expressions(d);
  }
  std::string reconstruct_document(const std::string& topic,
                                   const std::vector<std::pair<std::string, double>>& codes,
                                   std::uint64_t trial) override {
    if (++calls_ == fail_on_call_)
      throw Error(ErrorCode::transport, "injected provider outage");
    return inner_->reconstruct_document(topic, codes, trial);
  }
  std::string name_code(const std::vector<ValueExpression>& m) override {
    return inner_->name_code(m);
  }
  Document generate_examinee_document(const std::string& t, const std::optional<GroupId>& r,
                                      std::uint64_t i) override {
    return inner_->generate_examinee_document(t, r, i);
  }
  std::vector<Embedding> embed_texts(const std::vector<std::string>& t) override {
    return inner_->embed_texts(t);
  }
  std::uint64_t provider_calls() const override { return inner_->provider_calls(); }
  int reconstruct_calls() const { return calls_.load(); }

 private:
  std::shared_ptr<Gateway> inner_;
  int fail_on_call_;
  std::atomic<int> calls_{0};
};

}  // namespace

TEST_CASE("optimize survives a mid-iteration failure via checkpoints") {
  test::PlantedSpec spec;
  spec.code_phrases = {"filial devotion", "personal autonomy", "frugality", "mutual trust"};
  spec.docs = 10;
  spec.phrases_per_doc = 2;
  spec.seed = 33;
  auto corpus_raw = test::make_planted_corpus(spec);

  OptimizerConfig cfg;
  cfg.M = 2;
  cfg.N1 = 1;
  cfg.N2 = 1;
  cfg.T = 2;
  cfg.tau1 = 100.0;  // force both iterations
  cfg.seed = 33;
  cfg.workers = 1;

  // uninterrupted reference run, counting iteration-1 reconstruct calls
  auto clean_inner = make_gateway(test::planted_mock_profiles(33));
  FlakyGateway counting(clean_inner, /*fail_on_call=*/-1);
  auto coded = code_corpus(corpus_raw, counting);
  test::TempDir probe_dir("valign-restore-probe");
  OptimizerConfig probe_cfg = cfg;
  probe_cfg.T = 1;
  optimize(coded, probe_cfg, counting, probe_dir.str());
  int iter1_calls = counting.reconstruct_calls();
  REQUIRE(iter1_calls > 0);

  auto clean_gateway = make_gateway(test::planted_mock_profiles(33));
  test::TempDir ref_dir("valign-restore-ref");
  auto reference = optimize(coded, cfg, *clean_gateway, ref_dir.str());

  // crashing run: fail a couple of calls into the second iteration
  test::TempDir crash_dir("valign-restore-crash");
  {
    auto inner = make_gateway(test::planted_mock_profiles(33));
    FlakyGateway flaky(inner, iter1_calls + 2);
    auto coded2 = code_corpus(corpus_raw, flaky);
    CHECK_THROWS_AS(optimize(coded2, cfg, flaky, crash_dir.str()), Error);
    // iteration 1 made it to disk before the outage
    auto latest = latest_checkpoint(crash_dir.str());
    REQUIRE(latest.has_value());
    CHECK(load_checkpoint(*latest).iteration >= 1);
  }

  // resuming with a healthy provider completes to the same artifact
  auto resume_gateway = make_gateway(test::planted_mock_profiles(33));
  auto coded3 = code_corpus(corpus_raw, *resume_gateway);
  auto resumed = optimize(coded3, cfg, *resume_gateway, crash_dir.str());
  CHECK(codebook_content_id(resumed.codebook) == codebook_content_id(reference.codebook));
  CHECK(resumed.codebook.iteration == reference.codebook.iteration);
}

TEST_CASE("global_entropy_sign flips the coverage term") {
  test::PlantedSpec spec;
  spec.code_phrases = {"filial devotion", "personal autonomy", "frugality"};
  spec.docs = 10;
  spec.phrases_per_doc = 2;
  spec.seed = 55;
  auto corpus_raw = test::make_planted_corpus(spec);
  auto gateway = make_gateway(test::planted_mock_profiles(55));
  auto coded = code_corpus(corpus_raw, *gateway);

  OptimizerConfig cfg;
  cfg.M = 2;
  cfg.N1 = 1;
  cfg.N2 = 1;
  cfg.seed = 55;
  std::vector<ValueExpression> all;
  for (const auto& cd : coded) all.insert(all.end(), cd.expressions.begin(), cd.expressions.end());
  auto cb = init_codebook(all, cfg, *gateway);

  auto plus = reconstruction_step(coded, cb, cfg, *gateway, 1);
  OptimizerConfig flipped = cfg;
  flipped.global_entropy_sign = -1;
  auto minus = reconstruction_step(coded, cb, flipped, *gateway, 1);
  CHECK(minus.score.global_entropy_term ==
        doctest::Approx(plus.score.global_entropy_term).epsilon(1e-12));
  CHECK(minus.score.total - plus.score.total ==
        doctest::Approx(2 * cfg.beta2 * cfg.M * plus.score.global_entropy_term).epsilon(1e-9));
}

TEST_CASE("init_codebook reducer is configurable") {
  test::PlantedSpec spec;
  spec.code_phrases = {"filial devotion", "personal autonomy", "frugality"};
  spec.docs = 30;
  spec.phrases_per_doc = 2;
  spec.seed = 61;
  auto corpus = test::make_planted_corpus(spec);
  auto gateway = make_gateway(test::planted_mock_profiles(61));
  auto planted = test::extract_planted(corpus, spec, *gateway);

  OptimizerConfig cfg;
  cfg.reducer = "none";  // cluster in the full embedding space
  auto cb = init_codebook(planted.expressions, cfg, *gateway);
  CHECK(cb.size() == 3);

  cfg.reducer = "bogus";
  CHECK_THROWS_AS(init_codebook(planted.expressions, cfg, *gateway), Error);
}
