// Deterministic mock backend. Every reply is a pure function of
// (request, seed) and uses the same structured formats as remote providers.
//
// Planted-value convention used across the synthetic fixtures: a document or
// generated text carries sentences of the form
//
//   The author values <phrase> (<variant>).
//
// The mock extractor returns one expression per such sentence; the mock
// embedder anchors any text containing such phrases to per-phrase unit
// vectors (mixed with a token-hash vector), so expressions of one planted
// code form a tight cluster and reconstructions from the right codes land
// near the original document.

#include <json.hpp>

#include <algorithm>
#include <cctype>
#include <map>
#include <mutex>
#include <sstream>
#include <unordered_map>

#include "core/error.hpp"
#include "core/rng.hpp"
#include "gateway/gateway.hpp"

namespace valign {

using nlohmann::json;

namespace {

std::string lower(std::string s) {
  std::transform(s.begin(), s.end(), s.begin(),
                 [](unsigned char c) { return std::tolower(c); });
  return s;
}

std::string collapse_ws(const std::string& s) {
  std::string out;
  bool prev_space = true;
  for (char c : s) {
    if (std::isspace(static_cast<unsigned char>(c))) {
      if (!prev_space) out += ' ';
      prev_space = true;
    } else {
      out += c;
      prev_space = false;
    }
  }
  while (!out.empty() && out.back() == ' ') out.pop_back();
  return out;
}

struct PlantedSentence {
  std::string sentence;  // full matched sentence, original casing
  std::string phrase;    // normalized lowercase phrase
  std::string variant;
};

// Scans for "the author values <phrase> (<variant>)." sentences.
std::vector<PlantedSentence> find_planted(const std::string& text) {
  static const std::string kMarker = "the author values ";
  std::vector<PlantedSentence> out;
  std::string low = lower(text);
  std::size_t pos = 0;
  while ((pos = low.find(kMarker, pos)) != std::string::npos) {
    std::size_t phrase_start = pos + kMarker.size();
    std::size_t paren = low.find('(', phrase_start);
    std::size_t dot = low.find('.', phrase_start);
    if (paren == std::string::npos || (dot != std::string::npos && dot < paren)) {
      pos = phrase_start;
      continue;
    }
    std::size_t close = low.find(')', paren);
    if (close == std::string::npos) break;
    PlantedSentence p;
    p.phrase = collapse_ws(lower(text.substr(phrase_start, paren - phrase_start)));
    p.variant = text.substr(paren + 1, close - paren - 1);
    std::size_t sent_end = low.find('.', close);
    std::size_t end = (sent_end == std::string::npos) ? close + 1 : sent_end + 1;
    p.sentence = text.substr(pos, end - pos);
    // restore leading capital lost by searching on the lowercase copy
    if (!p.sentence.empty()) p.sentence[0] = static_cast<char>(std::toupper(p.sentence[0]));
    if (!p.phrase.empty()) out.push_back(std::move(p));
    pos = end;
  }
  return out;
}

std::string title_case(const std::string& s) {
  std::string out = lower(s);
  bool start = true;
  for (char& c : out) {
    if (start && std::isalpha(static_cast<unsigned char>(c)))
      c = static_cast<char>(std::toupper(c));
    start = (c == ' ' || c == '-');
  }
  return out;
}

std::vector<std::string> first_words(const std::string& s, std::size_t n) {
  std::istringstream in(s);
  std::vector<std::string> words;
  std::string w;
  while (words.size() < n && in >> w) words.push_back(w);
  return words;
}

class MockSource : public ReplySource {
 public:
  explicit MockSource(const GatewayConfig& cfg) : cfg_(cfg) {}

  std::string fetch(const GatewayRequest& req) override {
    if (req.op == "extract") return extract(req);
    if (req.op == "reconstruct") return reconstruct(req);
    if (req.op == "name") return name(req);
    if (req.op == "generate") return generate(req);
    if (req.op == "embed") return embed(req);
    throw Error(ErrorCode::internal, "mock source: unknown op " + req.op);
  }

 private:
  std::string extract(const GatewayRequest& req) const {
    auto planted = find_planted(req.fields.at("document"));
    json arr = json::array();
    for (const auto& p : planted) {
      auto words = first_words(p.phrase, 3);
      std::string hint;
      for (const auto& w : words) hint += (hint.empty() ? "" : " ") + w;
      arr.push_back({{"code_name", hint}, {"description", p.sentence}});
    }
    return "```python\n" + arr.dump(4) + "\n```";
  }

  std::string reconstruct(const GatewayRequest& req) const {
    json values = json::parse(req.fields.at("values"));
    const std::string& topic = req.fields.at("topic");
    std::vector<std::string> names;
    for (const auto& v : values) names.push_back(v["name"].get<std::string>());
    // stable hash order
    std::sort(names.begin(), names.end(), [](const std::string& a, const std::string& b) {
      auto ha = fnv1a64(lower(a)), hb = fnv1a64(lower(b));
      return ha != hb ? ha < hb : a < b;
    });
    std::ostringstream text;
    text << "Some thoughts on " << topic << ".";
    for (const auto& n : names) {
      std::uint64_t h = splitmix64(cfg_.seed ^ fnv1a64(lower(n)) ^
                                   splitmix64(fnv1a64(topic) + req.nonce));
      text << " The author values " << lower(n) << " (aspect " << (h % 1000) << ").";
    }
    json reply = {{"text", text.str()}};
    return reply.dump();
  }

  std::string name(const GatewayRequest& req) const {
    json texts = json::parse(req.fields.at("expressions"));
    json hints = json::parse(req.fields.at("hints"));
    std::map<std::string, int> votes;
    for (std::size_t i = 0; i < texts.size(); ++i) {
      auto planted = find_planted(texts[i].get<std::string>());
      std::string label = !planted.empty() ? planted.front().phrase
                          : i < hints.size() ? lower(hints[i].get<std::string>())
                                             : std::string();
      if (!label.empty()) votes[label]++;
    }
    std::string best = "unnamed value";
    int best_votes = 0;
    for (const auto& [label, n] : votes) {  // map order makes ties lexicographic
      if (n > best_votes) {
        best = label;
        best_votes = n;
      }
    }
    json reply = {{"code_name", title_case(best)}};
    return reply.dump();
  }

  std::string generate(const GatewayRequest& req) const {
    const std::string& topic = req.fields.at("topic");
    auto role_it = req.fields.find("role");
    const std::vector<std::string>* pool = nullptr;
    std::vector<std::string> merged;
    if (role_it != req.fields.end()) {
      auto it = cfg_.mock_pools.find(role_it->second);
      if (it != cfg_.mock_pools.end()) pool = &it->second;
    }
    if (!pool) {
      auto star = cfg_.mock_pools.find("*");
      if (star != cfg_.mock_pools.end()) {
        pool = &star->second;
      } else {
        for (const auto& [g, phrases] : cfg_.mock_pools)
          merged.insert(merged.end(), phrases.begin(), phrases.end());
        pool = &merged;
      }
    }
    std::string role_key = role_it != req.fields.end() ? role_it->second : "";
    Rng rng(derive_seed(cfg_.seed, "examinee",
                        splitmix64(fnv1a64(topic) ^ fnv1a64(req.model) ^ fnv1a64(role_key)) +
                            req.nonce));
    std::ostringstream text;
    text << "A short piece on " << topic << ".";
    if (pool->empty()) {
      text << " Nothing of note (plain " << rng.uniform_index(1000) << ").";
    } else {
      for (int s = 0; s < 3; ++s) {
        const std::string& phrase = (*pool)[rng.uniform_index(pool->size())];
        text << " The author values " << lower(phrase) << " (aspect " << rng.uniform_index(1000)
             << ").";
      }
    }
    json reply = {{"text", text.str()}};
    return reply.dump();
  }

  std::string embed(const GatewayRequest& req) {
    json data = json::array();
    for (const auto& text : req.texts)
      data.push_back({{"embedding", embed_one(text)}});
    json reply = {{"data", data}};
    return reply.dump();
  }

  std::vector<double> embed_one(const std::string& text) {
    const std::size_t dim = cfg_.embed_dim;
    std::vector<double> base(dim, 0.0);
    // token-multiset hash vector
    std::string low = lower(text);
    std::size_t i = 0;
    while (i < low.size()) {
      while (i < low.size() && !std::isalnum(static_cast<unsigned char>(low[i]))) ++i;
      std::size_t j = i;
      while (j < low.size() && std::isalnum(static_cast<unsigned char>(low[j]))) ++j;
      if (j > i) {
        const auto& tv = token_vec(fnv1a64(std::string_view(low).substr(i, j - i)));
        for (std::size_t d = 0; d < dim; ++d) base[d] += tv[d];
      }
      i = j;
    }
    normalize(base);

    auto planted = find_planted(text);
    if (!planted.empty()) {
      std::vector<double> anchor(dim, 0.0);
      for (const auto& p : planted) {
        auto av = unit_vec(derive_seed(cfg_.seed, "anchor", fnv1a64(p.phrase)));
        for (std::size_t d = 0; d < dim; ++d) anchor[d] += av[d];
      }
      normalize(anchor);
      double w = cfg_.anchor_weight;
      for (std::size_t d = 0; d < dim; ++d)
        base[d] = w * anchor[d] + (1.0 - w) * base[d];
      normalize(base);
    }
    return base;
  }

  const std::vector<double>& token_vec(std::uint64_t token_hash) {
    std::lock_guard<std::mutex> lock(mutex_);
    auto it = token_cache_.find(token_hash);
    if (it != token_cache_.end()) return it->second;
    auto [ins, _] =
        token_cache_.emplace(token_hash, unit_vec(derive_seed(cfg_.seed, "token", token_hash)));
    return ins->second;
  }

  std::vector<double> unit_vec(std::uint64_t seed) const {
    Rng rng(seed);
    std::vector<double> v(cfg_.embed_dim);
    for (double& x : v) x = rng.normal();
    normalize(v);
    return v;
  }

  static void normalize(std::vector<double>& v) {
    double n = 0.0;
    for (double x : v) n += x * x;
    n = std::sqrt(n);
    if (n > 0)
      for (double& x : v) x /= n;
  }

  GatewayConfig cfg_;
  std::mutex mutex_;
  std::unordered_map<std::uint64_t, std::vector<double>> token_cache_;
};

}  // namespace

std::unique_ptr<ReplySource> make_mock_source(const GatewayConfig& cfg) {
  return std::make_unique<MockSource>(cfg);
}

}  // namespace valign
