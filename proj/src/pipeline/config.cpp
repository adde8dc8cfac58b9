#include "pipeline/config.hpp"

#include <filesystem>
#include <fstream>
#include <sstream>

#include "core/error.hpp"
#include "core/rng.hpp"

namespace valign {

using nlohmann::json;
namespace fs = std::filesystem;

namespace {

json default_profile(const char* role) {
  return {{"provider", "mock"},
          {"endpoint", ""},
          {"model", std::string("mock-") + role},
          {"api_key_env", ""},
          {"max_retries", 2},
          {"request_timeout", 60.0},
          {"max_parallel", 4},
          {"cache_dir", ""},
          {"temperature", std::string(role) == "decoder" ? 1.0 : 0.0},
          {"backoff_ms", 250},
          {"seed", nullptr},  // null = derive from the top-level seed
          {"embed_dim", 64},
          {"anchor_weight", 0.85},
          {"mock_pools", json::object()}};
}

json default_config() {
  return {{"seed", 0},
          {"output_dir", "out"},
          {"corpora", json::object()},
          {"examinee_corpora", json::object()},
          {"training_groups", json::array()},
          {"reference_groups", json::array()},
          {"topics", json::array()},
          {"topic_fraction", 1.0},
          {"topic_weighted", false},
          {"examinee_generation", json::array()},
          {"gateway",
           {{"extractor", default_profile("extractor")},
            {"decoder", default_profile("decoder")},
            {"namer", default_profile("namer")},
            {"embedder", default_profile("embedder")},
            {"examinee", default_profile("examinee")}}},
          {"optimizer",
           {{"N1", 3},
            {"N2", 3},
            {"M", 3},
            {"T", 10},
            {"beta1", 0.3},
            {"beta2", 0.08},
            {"tau1", 1.0},
            {"tau2", 0.9},
            {"merge_sim", 0.9},
            {"min_cluster_size", 5},
            {"under_z", -0.5},
            {"over_z", 1.0},
            {"split_improvement", 0.01},
            {"reduce_dim", 5},
            {"reducer", "pca"},
            {"global_entropy_sign", 1},
            {"sampling_floor", 0.01},
            {"workers", 4}}},
          {"metric",
           {{"epsilon", 0.01},
            {"gamma", 0.5},
            {"eps2", 1e-8},
            {"sinkhorn_max_iters", 1000},
            {"eps0", 1e-12},
            {"eps1", 1e-6}}},
          {"recognizer", {{"sigma2", 0.0}, {"min_code_prob", 0.01}}},
          {"validate",
           {{"similar_pairs", json::array()},
            {"distinct_pairs", json::array()},
            {"control_label", "control"},
            {"fisher_z", false},
            {"retest_cubes", json::array()},
            {"labels_file", ""}}}};
}

void deep_merge(json& base, const json& over) {
  if (!over.is_object() || !base.is_object()) {
    base = over;
    return;
  }
  for (auto it = over.begin(); it != over.end(); ++it) {
    if (base.contains(it.key()) && base[it.key()].is_object() && it.value().is_object())
      deep_merge(base[it.key()], it.value());
    else
      base[it.key()] = it.value();
  }
}

std::string resolve_path(const std::string& base_dir, const std::string& path) {
  if (path.empty() || fs::path(path).is_absolute()) return path;
  return (fs::path(base_dir) / path).lexically_normal().string();
}

GatewayConfig profile_from(const json& j, std::uint64_t top_seed, const char* role,
                           const std::string& base_dir) {
  GatewayConfig cfg;
  std::string provider = j.value("provider", "mock");
  if (provider == "mock") cfg.provider_kind = ProviderKind::mock;
  else if (provider == "remote_chat") cfg.provider_kind = ProviderKind::remote_chat;
  else if (provider == "remote_embed") cfg.provider_kind = ProviderKind::remote_embed;
  else throw Error(ErrorCode::invalid_argument, "unknown provider kind: " + provider);
  cfg.endpoint = j.value("endpoint", "");
  cfg.model_name = j.value("model", "");
  cfg.api_key_env = j.value("api_key_env", "");
  cfg.max_retries = j.value("max_retries", 2);
  cfg.request_timeout = j.value("request_timeout", 60.0);
  cfg.max_parallel = std::max(1, j.value("max_parallel", 4));
  cfg.cache_dir = resolve_path(base_dir, j.value("cache_dir", ""));
  cfg.temperature = j.value("temperature", 0.0);
  cfg.backoff_ms = j.value("backoff_ms", 250);
  cfg.seed = j.contains("seed") && !j["seed"].is_null()
                 ? j["seed"].get<std::uint64_t>()
                 : derive_seed(top_seed, std::string("gateway.") + role);
  cfg.embed_dim = j.value("embed_dim", std::size_t{64});
  cfg.anchor_weight = j.value("anchor_weight", 0.85);
  if (j.contains("mock_pools"))
    for (auto it = j["mock_pools"].begin(); it != j["mock_pools"].end(); ++it)
      cfg.mock_pools[it.key()] = it.value().get<std::vector<std::string>>();
  if (cfg.max_retries < 0)
    throw Error(ErrorCode::invalid_argument, "max_retries must be >= 0");
  return cfg;
}

void derive_fields(RunConfig& cfg, const std::string& base_dir) {
  const json& j = cfg.raw;
  cfg.seed = j.at("seed").get<std::uint64_t>();
  cfg.output_dir = resolve_path(base_dir, j.at("output_dir").get<std::string>());
  cfg.corpora.clear();
  for (auto it = j.at("corpora").begin(); it != j.at("corpora").end(); ++it)
    cfg.corpora[it.key()] = resolve_path(base_dir, it.value().get<std::string>());
  cfg.examinee_corpora.clear();
  for (auto it = j.at("examinee_corpora").begin(); it != j.at("examinee_corpora").end(); ++it)
    cfg.examinee_corpora[it.key()] = resolve_path(base_dir, it.value().get<std::string>());
  cfg.training_groups = j.at("training_groups").get<std::vector<std::string>>();
  cfg.reference_groups = j.at("reference_groups").get<std::vector<std::string>>();
  cfg.topics = j.at("topics").get<std::vector<std::string>>();
  cfg.topic_fraction = j.at("topic_fraction").get<double>();
  cfg.topic_weighted = j.at("topic_weighted").get<bool>();
  cfg.examinee_generation.clear();
  for (const auto& g : j.at("examinee_generation")) {
    ExamineeGenSpec spec;
    spec.label = g.at("label").get<std::string>();
    if (g.contains("role") && !g["role"].is_null()) spec.role = g["role"].get<std::string>();
    spec.docs_per_topic = g.value("docs_per_topic", 1);
    cfg.examinee_generation.push_back(std::move(spec));
  }

  const json& gw = j.at("gateway");
  cfg.gateway.extractor = profile_from(gw.at("extractor"), cfg.seed, "extractor", base_dir);
  cfg.gateway.decoder = profile_from(gw.at("decoder"), cfg.seed, "decoder", base_dir);
  cfg.gateway.namer = profile_from(gw.at("namer"), cfg.seed, "namer", base_dir);
  cfg.gateway.embedder = profile_from(gw.at("embedder"), cfg.seed, "embedder", base_dir);
  cfg.gateway.examinee = profile_from(gw.at("examinee"), cfg.seed, "examinee", base_dir);

  const json& opt = j.at("optimizer");
  OptimizerConfig& o = cfg.optimizer;
  o.N1 = opt.at("N1").get<int>();
  o.N2 = opt.at("N2").get<int>();
  o.M = opt.at("M").get<int>();
  o.T = opt.at("T").get<int>();
  o.beta1 = opt.at("beta1").get<double>();
  o.beta2 = opt.at("beta2").get<double>();
  o.tau1 = opt.at("tau1").get<double>();
  o.tau2 = opt.at("tau2").get<double>();
  o.merge_sim = opt.at("merge_sim").get<double>();
  o.min_cluster_size = opt.at("min_cluster_size").get<int>();
  o.under_z = opt.at("under_z").get<double>();
  o.over_z = opt.at("over_z").get<double>();
  o.split_improvement = opt.at("split_improvement").get<double>();
  o.reduce_dim = opt.at("reduce_dim").get<int>();
  o.reducer = opt.at("reducer").get<std::string>();
  o.global_entropy_sign = opt.at("global_entropy_sign").get<int>();
  o.sampling_floor = opt.at("sampling_floor").get<double>();
  o.workers = opt.at("workers").get<int>();
  o.seed = cfg.seed;
  if (o.N1 < 1 || o.N2 < 1 || o.M < 1 || o.T < 1)
    throw Error(ErrorCode::invalid_argument, "optimizer: N1, N2, M, T must all be >= 1");
  if (!(o.tau2 > 0.0 && o.tau2 <= 1.0))
    throw Error(ErrorCode::invalid_argument, "optimizer: tau2 must be in (0, 1]");
  if (o.global_entropy_sign != 1 && o.global_entropy_sign != -1)
    throw Error(ErrorCode::invalid_argument, "optimizer: global_entropy_sign must be +1 or -1");

  const json& met = j.at("metric");
  cfg.metric.epsilon = met.at("epsilon").get<double>();
  cfg.metric.gamma = met.at("gamma").get<double>();
  cfg.metric.eps2 = met.at("eps2").get<double>();
  cfg.metric.sinkhorn_max_iters = met.at("sinkhorn_max_iters").get<int>();
  cfg.metric.eps0 = met.at("eps0").get<double>();
  cfg.metric.eps1 = met.at("eps1").get<double>();

  cfg.recognizer.sigma2 = j.at("recognizer").at("sigma2").get<double>();
  cfg.recognizer.min_code_prob = j.at("recognizer").at("min_code_prob").get<double>();

  const json& val = j.at("validate");
  cfg.validate.pairs.similar.clear();
  cfg.validate.pairs.distinct.clear();
  for (const auto& p : val.at("similar_pairs"))
    cfg.validate.pairs.similar.emplace_back(p.at(0).get<std::string>(),
                                            p.at(1).get<std::string>());
  for (const auto& p : val.at("distinct_pairs"))
    cfg.validate.pairs.distinct.emplace_back(p.at(0).get<std::string>(),
                                             p.at(1).get<std::string>());
  cfg.validate.control_label = val.at("control_label").get<std::string>();
  cfg.validate.fisher_z = val.at("fisher_z").get<bool>();
  cfg.validate.retest_cubes.clear();
  for (const auto& p : val.at("retest_cubes"))
    cfg.validate.retest_cubes.push_back(resolve_path(base_dir, p.get<std::string>()));
  cfg.validate.labels_file = resolve_path(base_dir, val.at("labels_file").get<std::string>());

  // Referenced inputs must exist up front.
  for (const auto& [group, path] : cfg.corpora)
    if (!fs::exists(path))
      throw Error(ErrorCode::io, "corpus for group '" + group + "' not found: " + path);
  for (const auto& [label, path] : cfg.examinee_corpora)
    if (!fs::exists(path))
      throw Error(ErrorCode::io, "examinee corpus '" + label + "' not found: " + path);
}

}  // namespace

std::string RunConfig::config_hash() const {
  std::string c = raw.dump();
  char buf[36];
  std::snprintf(buf, sizeof(buf), "%016llx%016llx", (unsigned long long)fnv1a64(c),
                (unsigned long long)fnv1a64(c, 0x6c62272e07bb0142ULL));
  return buf;
}

RunConfig parse_run_config(const std::string& text, const std::string& base_dir) {
  json file;
  try {
    file = json::parse(text);
  } catch (const json::exception& e) {
    throw Error(ErrorCode::parse, std::string("bad run config: ") + e.what());
  }
  RunConfig cfg;
  cfg.raw = default_config();
  deep_merge(cfg.raw, file);
  cfg.base_dir = base_dir.empty() ? "." : base_dir;
  derive_fields(cfg, cfg.base_dir);
  return cfg;
}

RunConfig load_run_config(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::io, "cannot open run config " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_run_config(ss.str(), fs::path(path).parent_path().string());
}

void apply_override(RunConfig& cfg, const std::string& dotted_key, const std::string& value) {
  json parsed;
  try {
    parsed = json::parse(value);
  } catch (const json::exception&) {
    parsed = value;  // bare words become strings
  }
  json* node = &cfg.raw;
  std::size_t start = 0;
  for (;;) {
    auto dot = dotted_key.find('.', start);
    std::string part = dotted_key.substr(start, dot - start);
    if (part.empty())
      throw Error(ErrorCode::invalid_argument, "bad override key: " + dotted_key);
    if (dot == std::string::npos) {
      (*node)[part] = parsed;
      break;
    }
    node = &(*node)[part];
    start = dot + 1;
  }
  derive_fields(cfg, cfg.base_dir);
}

}  // namespace valign
