// HTTP backends for chat-completion-style and embedding-style endpoints.
// Bodies follow the common {model, messages|input, ...} schema; the API key
// is read from the env var named in the profile and never logged.

// CPPHTTPLIB_OPENSSL_SUPPORT comes from the build when OpenSSL is available.
#include <httplib.h>
#include <json.hpp>

#include <condition_variable>
#include <cstdlib>
#include <mutex>
#include <sstream>

#include "core/error.hpp"
#include "gateway/gateway.hpp"
#include "gateway/remote.hpp"

namespace valign {

using nlohmann::json;

EndpointParts split_endpoint(const std::string& endpoint) {
  auto scheme_end = endpoint.find("://");
  if (scheme_end == std::string::npos)
    throw Error(ErrorCode::invalid_argument, "endpoint missing scheme: " + endpoint);
  auto path_start = endpoint.find('/', scheme_end + 3);
  if (path_start == std::string::npos) return {endpoint, "/"};
  return {endpoint.substr(0, path_start), endpoint.substr(path_start)};
}

namespace {

// Runtime-sized counting semaphore bounding in-flight requests.
class Semaphore {
 public:
  explicit Semaphore(int count) : count_(count) {}
  void acquire() {
    std::unique_lock<std::mutex> lock(m_);
    cv_.wait(lock, [&] { return count_ > 0; });
    --count_;
  }
  void release() {
    {
      std::lock_guard<std::mutex> lock(m_);
      ++count_;
    }
    cv_.notify_one();
  }

 private:
  std::mutex m_;
  std::condition_variable cv_;
  int count_;
};

struct SemaphoreGuard {
  Semaphore& s;
  explicit SemaphoreGuard(Semaphore& sem) : s(sem) { s.acquire(); }
  ~SemaphoreGuard() { s.release(); }
};

std::string render_prompt(const GatewayRequest& req) {
  if (req.op == "extract") {
    std::string p = prompt_template(TemplateId::extract_values)
                        .render({{"document", req.fields.at("document")}});
    auto it = req.fields.find("reformat");
    if (it != req.fields.end()) p += "\n\n" + it->second;
    return p;
  }
  if (req.op == "reconstruct") {
    json values = json::parse(req.fields.at("values"));
    std::ostringstream list;
    for (const auto& v : values)
      list << "- " << v["name"].get<std::string>() << " [" << v["probability"].get<double>()
           << "]\n";
    return prompt_template(TemplateId::reconstruct_document)
        .render({{"values", list.str()}, {"topic", req.fields.at("topic")}});
  }
  if (req.op == "name") {
    json texts = json::parse(req.fields.at("expressions"));
    std::ostringstream list;
    int i = 1;
    for (const auto& t : texts) list << i++ << ". " << t.get<std::string>() << "\n";
    std::string p =
        prompt_template(TemplateId::name_code).render({{"expressions", list.str()}});
    auto it = req.fields.find("reformat");
    if (it != req.fields.end()) p += "\n\n" + it->second;
    return p;
  }
  if (req.op == "generate") {
    auto role = req.fields.find("role");
    if (role != req.fields.end())
      return prompt_template(TemplateId::role_primed_generate)
          .render({{"role", role->second}, {"topic", req.fields.at("topic")}});
    return prompt_template(TemplateId::generate_document)
        .render({{"topic", req.fields.at("topic")}});
  }
  throw Error(ErrorCode::internal, "remote source: no prompt for op " + req.op);
}

class RemoteSource : public ReplySource {
 public:
  explicit RemoteSource(const GatewayConfig& cfg)
      : cfg_(cfg), parts_(split_endpoint(cfg.endpoint)), semaphore_(std::max(1, cfg.max_parallel)) {}

  std::string fetch(const GatewayRequest& req) override {
    SemaphoreGuard guard(semaphore_);
    json body;
    if (req.op == "embed") {
      body["model"] = cfg_.model_name;
      body["input"] = req.texts;
    } else {
      body["model"] = cfg_.model_name;
      body["messages"] = json::array({{{"role", "user"}, {"content", render_prompt(req)}}});
      body["temperature"] = req.temperature;
      if (req.nonce != 0) body["seed"] = req.nonce;
    }

    httplib::Client client(parts_.base);
    client.set_connection_timeout(static_cast<int>(cfg_.request_timeout), 0);
    client.set_read_timeout(static_cast<int>(cfg_.request_timeout), 0);
    httplib::Headers headers;
    if (!cfg_.api_key_env.empty()) {
      const char* key = std::getenv(cfg_.api_key_env.c_str());
      if (key && *key) headers.emplace("Authorization", std::string("Bearer ") + key);
    }

    auto res = client.Post(parts_.path, headers, body.dump(), "application/json");
    if (!res)
      throw Error(ErrorCode::transport,
                  "request to " + parts_.base + " failed: " + httplib::to_string(res.error()));
    if (res->status < 200 || res->status >= 300)
      throw Error(ErrorCode::transport,
                  "provider returned HTTP " + std::to_string(res->status) + ": " + res->body);

    if (req.op == "embed") return res->body;
    return extract_content(res->body);
  }

 private:
  static std::string extract_content(const std::string& body) {
    try {
      json j = json::parse(body);
      if (j.contains("choices") && !j["choices"].empty())
        return j["choices"][0]["message"]["content"].get<std::string>();
    } catch (const json::exception&) {
    }
    return body;
  }

  GatewayConfig cfg_;
  EndpointParts parts_;
  Semaphore semaphore_;
};

}  // namespace

std::unique_ptr<ReplySource> make_remote_source(const GatewayConfig& cfg) {
  return std::make_unique<RemoteSource>(cfg);
}

}  // namespace valign
