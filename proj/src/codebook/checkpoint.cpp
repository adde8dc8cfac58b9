#include "codebook/checkpoint.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <limits>

#include "core/error.hpp"
#include "core/rng.hpp"

namespace valign {

using nlohmann::json;
namespace fs = std::filesystem;

namespace {

json codes_to_json(const Codebook& cb) {
  json codes = json::array();
  for (const auto& c : cb.codes) {
    json members = json::array();
    for (const auto& m : c.members) {
      json jm = {{"text", m.text}, {"hint", m.code_name_hint}, {"doc_id", m.doc_id}};
      if (m.embedding) jm["embedding"] = m.embedding->values;
      members.push_back(std::move(jm));
    }
    json hist = json::array();
    for (double d : c.distortion_history) {
      if (std::isnan(d))
        hist.push_back(nullptr);
      else
        hist.push_back(d);
    }
    codes.push_back({{"id", c.id},
                     {"name", c.name},
                     {"centroid", c.centroid.values},
                     {"usage", c.usage},
                     {"distortion_history", hist},
                     {"members", std::move(members)}});
  }
  return codes;
}

json config_to_json(const OptimizerConfig& cfg) {
  return {{"N1", cfg.N1},
          {"N2", cfg.N2},
          {"M", cfg.M},
          {"T", cfg.T},
          {"beta1", cfg.beta1},
          {"beta2", cfg.beta2},
          {"tau1", cfg.tau1},
          {"tau2", cfg.tau2},
          {"merge_sim", cfg.merge_sim},
          {"min_cluster_size", cfg.min_cluster_size},
          {"under_z", cfg.under_z},
          {"over_z", cfg.over_z},
          {"split_improvement", cfg.split_improvement},
          {"reduce_dim", cfg.reduce_dim},
          {"reducer", cfg.reducer},
          {"global_entropy_sign", cfg.global_entropy_sign},
          {"sampling_floor", cfg.sampling_floor},
          {"seed", cfg.seed}};
}

}  // namespace

std::string codebook_content_id(const Codebook& cb) {
  std::string payload = codes_to_json(cb).dump();
  char buf[36];
  std::snprintf(buf, sizeof(buf), "%016llx%016llx",
                (unsigned long long)fnv1a64(payload),
                (unsigned long long)fnv1a64(payload, 0x6c62272e07bb0142ULL));
  return buf;
}

void save_checkpoint(const std::string& path, const Codebook& cb, const OptimizerConfig& cfg,
                     const std::vector<ScoreBreakdown>& scores, bool stopped) {
  json j;
  j["format"] = "valign-codebook/1";
  j["iteration"] = cb.iteration;
  j["stopped"] = stopped;
  j["config"] = config_to_json(cfg);
  j["score_history"] = cb.score_history;
  json sc = json::array();
  for (const auto& s : scores)
    sc.push_back({{"distortion_term", s.distortion_term},
                  {"per_doc_entropy_term", s.per_doc_entropy_term},
                  {"global_entropy_term", s.global_entropy_term},
                  {"total", s.total}});
  j["scores"] = std::move(sc);
  j["codes"] = codes_to_json(cb);
  j["codebook_id"] = codebook_content_id(cb);

  std::string tmp = path + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error(ErrorCode::io, "cannot write checkpoint " + tmp);
    out << j.dump(2) << '\n';
  }
  std::error_code ec;
  fs::rename(tmp, path, ec);
  if (ec) throw Error(ErrorCode::io, "checkpoint rename failed: " + ec.message());
}

CheckpointData load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::io, "cannot open checkpoint " + path);
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw Error(ErrorCode::parse, "bad checkpoint " + path + ": " + e.what());
  }
  if (!j.contains("format") || j["format"] != "valign-codebook/1")
    throw Error(ErrorCode::parse, "unrecognized checkpoint format in " + path);

  CheckpointData data;
  try {
    data.iteration = j.value("iteration", 0);
    data.stopped = j.value("stopped", false);
    data.codebook.iteration = data.iteration;
    data.codebook.score_history = j.value("score_history", std::vector<double>{});
    for (const auto& s : j.value("scores", json::array())) {
      ScoreBreakdown b;
      b.distortion_term = s.value("distortion_term", 0.0);
      b.per_doc_entropy_term = s.value("per_doc_entropy_term", 0.0);
      b.global_entropy_term = s.value("global_entropy_term", 0.0);
      b.total = s.value("total", 0.0);
      data.scores.push_back(b);
    }
    for (const auto& c : j.at("codes")) {
      ValueCode code;
      code.id = c.at("id").get<int>();
      code.name = c.at("name").get<std::string>();
      code.centroid.values = c.at("centroid").get<std::vector<double>>();
      code.usage = c.value("usage", 0.0);
      for (const auto& d : c.value("distortion_history", json::array())) {
        code.distortion_history.push_back(
            d.is_null() ? std::numeric_limits<double>::quiet_NaN() : d.get<double>());
      }
      for (const auto& m : c.value("members", json::array())) {
        ValueExpression e;
        e.text = m.at("text").get<std::string>();
        e.code_name_hint = m.value("hint", "");
        e.doc_id = m.value("doc_id", "");
        if (m.contains("embedding")) {
          Embedding emb;
          emb.values = m["embedding"].get<std::vector<double>>();
          e.embedding = std::move(emb);
        }
        code.members.push_back(std::move(e));
      }
      data.codebook.codes.push_back(std::move(code));
    }
  } catch (const json::exception& e) {
    throw Error(ErrorCode::parse, "malformed checkpoint " + path + ": " + e.what());
  }
  return data;
}

std::optional<std::string> latest_checkpoint(const std::string& dir) {
  if (!fs::exists(dir)) return std::nullopt;
  std::vector<std::string> names;
  for (const auto& entry : fs::directory_iterator(dir)) {
    std::string name = entry.path().filename().string();
    if (name.rfind("iter_", 0) == 0 && name.size() > 5 && entry.path().extension() == ".json")
      names.push_back(entry.path().string());
  }
  if (names.empty()) return std::nullopt;
  std::sort(names.begin(), names.end());
  return names.back();
}

}  // namespace valign
