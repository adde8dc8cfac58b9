#pragma once

// Pluggable client layer over text-generation and embedding providers.
//
// Every operation is modeled as a canonical Request whose reply is a raw
// structured string (JSON). Remote backends render a prompt, call the
// provider with retry/backoff, and return the body; the mock backend
// synthesizes the same structured replies deterministically from
// (inputs, seed). A content-hash cache sits between the operation and the
// backend, so cached runs are byte-identical to uncached ones.

#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "core/types.hpp"

namespace valign {

enum class ProviderKind { remote_chat, remote_embed, mock };

struct GatewayConfig {
  ProviderKind provider_kind = ProviderKind::mock;
  std::string endpoint;          // e.g. https://host/v1/chat/completions
  std::string model_name;
  std::string api_key_env;       // env var holding the key; value is never logged
  int max_retries = 2;
  double request_timeout = 60.0; // seconds
  int max_parallel = 4;
  std::string cache_dir;         // empty = no cache
  double temperature = 0.0;      // extraction/naming default; decoder profiles use 1.0
  int backoff_ms = 250;          // base for exponential backoff

  // Mock-only knobs.
  std::uint64_t seed = 0;
  std::size_t embed_dim = 64;
  double anchor_weight = 0.85;   // planted-cluster anchor vs token-hash mix
  // Phrase pools for mock examinee generation, keyed by group id; "*" is the
  // default pool used when no role is set.
  std::map<std::string, std::vector<std::string>> mock_pools;
};

// One profile per pipeline role.
struct GatewayProfiles {
  GatewayConfig extractor;  // value-expression extraction
  GatewayConfig decoder;    // document reconstruction
  GatewayConfig namer;      // code naming
  GatewayConfig embedder;
  GatewayConfig examinee;   // evaluated model
};

enum class TemplateId {
  extract_values,
  reconstruct_document,
  name_code,
  generate_document,
  role_primed_generate,
  filter_topic_match,
};

struct PromptTemplate {
  TemplateId template_id;
  std::string body;  // named {placeholders}

  // Substitutes placeholders; throws if any remain unfilled.
  std::string render(const std::map<std::string, std::string>& values) const;
};

const PromptTemplate& prompt_template(TemplateId id);

// Operation-level client. Implementations must be shareable across threads.
class Gateway {
 public:
  virtual ~Gateway() = default;

  // Returns M' >= 0 expressions parsed from the provider's structured list
  // reply; the description sentence becomes the ValueExpression text.
  virtual std::vector<ValueExpression> extract_value_expressions(const Document& doc) = 0;

  // Generates text that implicitly embodies the given (name, probability)
  // codes without naming them. `trial` distinguishes repeated samples.
  virtual std::string reconstruct_document(
      const std::string& topic, const std::vector<std::pair<std::string, double>>& codes,
      std::uint64_t trial = 0) = 0;

  // Members must be ordered by centrality (ascending distance to centroid).
  virtual std::string name_code(const std::vector<ValueExpression>& members) = 0;

  // Plain instruction when role_group is absent; role-priming preamble
  // otherwise. Returns a Document with origin=model.
  virtual Document generate_examinee_document(const std::string& topic,
                                              const std::optional<GroupId>& role_group,
                                              std::uint64_t index = 0) = 0;

  virtual std::vector<Embedding> embed_texts(const std::vector<std::string>& texts) = 0;

  // Number of calls that actually reached a provider (cache misses).
  virtual std::uint64_t provider_calls() const = 0;
};

std::shared_ptr<Gateway> make_gateway(const GatewayProfiles& profiles);

// --- internals shared by backends/tests ---

struct GatewayRequest {
  std::string op;          // "extract" | "reconstruct" | "name" | "generate" | "embed"
  std::string model;
  double temperature = 0.0;
  std::uint64_t nonce = 0; // trial / generation index
  std::map<std::string, std::string> fields;
  std::vector<std::string> texts;  // embed batch

  std::string canonical() const;   // stable serialized form for hashing
  std::string content_hash() const;
};

// Raw-reply producer: remote HTTP or deterministic mock.
class ReplySource {
 public:
  virtual ~ReplySource() = default;
  virtual std::string fetch(const GatewayRequest& req) = 0;
};

std::unique_ptr<ReplySource> make_mock_source(const GatewayConfig& cfg);
std::unique_ptr<ReplySource> make_remote_source(const GatewayConfig& cfg);

// Parsers for structured replies (throw Error{parse} with the raw payload
// attached on failure).
struct ExtractedExpression {
  std::string code_name;
  std::string description;
};
std::vector<ExtractedExpression> parse_expression_list(const std::string& raw);
std::string parse_code_name(const std::string& raw);
std::string parse_generated_text(const std::string& raw);
std::vector<std::vector<double>> parse_embedding_batch(const std::string& raw);

// Runs fn up to max_retries+1 times, backing off exponentially on transport
// errors. Exposed for the retry-bound tests.
std::string retry_with_backoff(int max_retries, int backoff_ms,
                               const std::function<std::string()>& fn);

}  // namespace valign
