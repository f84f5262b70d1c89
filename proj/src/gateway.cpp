#include "ifkit/gateway.hpp"

#include <cmath>
#include <cstdlib>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <sstream>
#include <thread>

#include <openssl/evp.h>

#include <httplib.h>
#include <json.hpp>

#include "ifkit/error.hpp"
#include "ifkit/text.hpp"

namespace ifkit {

using nlohmann::json;

std::string_view role_name(Role role) {
  switch (role) {
    case Role::system: return "system";
    case Role::user: return "user";
    case Role::assistant: return "assistant";
  }
  return "user";
}

std::string sha256_hex(std::string_view data) {
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  EVP_Digest(data.data(), data.size(), digest, &len, EVP_sha256(), nullptr);
  std::ostringstream os;
  for (unsigned int i = 0; i < len; ++i) os << std::hex << std::setw(2) << std::setfill('0') << static_cast<int>(digest[i]);
  return os.str();
}

// HttpProvider -------------------------------------------------------------

namespace {
std::atomic<std::size_t> g_http_instances{0};

json request_body(const ChatRequest& request) {
  json messages = json::array();
  for (const auto& m : request.messages) messages.push_back({{"role", role_name(m.role)}, {"content", m.content}});
  return {{"model", request.model},
          {"messages", messages},
          {"temperature", request.temperature},
          {"max_tokens", request.max_tokens}};
}
}  // namespace

HttpProvider::HttpProvider(std::string base_url, std::string api_key, std::chrono::seconds timeout)
    : api_key_(std::move(api_key)), timeout_(timeout) {
  ++g_http_instances;
  while (!base_url.empty() && base_url.back() == '/') base_url.pop_back();
  const auto scheme_end = base_url.find("://");
  if (scheme_end == std::string::npos) throw GatewayError("LLM base URL must include a scheme: " + base_url);
  const auto path_start = base_url.find('/', scheme_end + 3);
  origin_ = base_url.substr(0, path_start);
  path_prefix_ = path_start == std::string::npos ? "" : base_url.substr(path_start);
}

std::size_t HttpProvider::instances_created() { return g_http_instances.load(); }

ChatResponse HttpProvider::send(const ChatRequest& request) {
  httplib::Client client(origin_);
  client.set_connection_timeout(timeout_);
  client.set_read_timeout(timeout_);
  client.set_write_timeout(timeout_);
  httplib::Headers headers;
  if (!api_key_.empty()) headers.emplace("Authorization", "Bearer " + api_key_);

  const auto res = client.Post(path_prefix_ + "/chat/completions", headers, request_body(request).dump(), "application/json");
  if (!res) throw TransientError("HTTP request failed: " + httplib::to_string(res.error()));
  if (res->status == 429 || res->status >= 500)
    throw TransientError("HTTP " + std::to_string(res->status) + ": " + res->body.substr(0, 200));
  if (res->status != 200)
    throw GatewayError("HTTP " + std::to_string(res->status) + ": " + res->body.substr(0, 500), res->status);

  ChatResponse out;
  try {
    const auto body = json::parse(res->body);
    const auto& content = body.at("choices").at(0).at("message").at("content");
    out.text = content.is_null() ? std::string() : content.get<std::string>();
    if (auto usage = body.find("usage"); usage != body.end() && usage->is_object()) {
      out.prompt_tokens = usage->value("prompt_tokens", std::int64_t{0});
      out.completion_tokens = usage->value("completion_tokens", std::int64_t{0});
      out.usage_reported = true;
    }
  } catch (const json::exception& e) {
    throw GatewayError(std::string("unexpected response body: ") + e.what(), res->status);
  }
  return out;
}

std::shared_ptr<Provider> make_echo_provider() {
  return std::make_shared<FunctionProvider>([](const ChatRequest& req) {
    ChatResponse r;
    for (auto it = req.messages.rbegin(); it != req.messages.rend(); ++it) {
      if (it->role == Role::user) {
        r.text = it->content;
        break;
      }
    }
    return r;
  });
}

std::shared_ptr<Provider> make_provider_from_env() {
  const char* base = std::getenv("LLM_BASE_URL");
  if (base == nullptr || *base == '\0') throw GatewayError("LLM_BASE_URL is not set");
  const char* key = std::getenv("LLM_API_KEY");
  return std::make_shared<HttpProvider>(base, key ? key : "");
}

// Gateway ------------------------------------------------------------------

Gateway::Gateway(std::shared_ptr<Provider> provider, GatewayOptions options)
    : provider_(std::move(provider)),
      options_(std::move(options)),
      in_flight_(std::clamp(options_.max_in_flight, 1, 1024)) {
  if (!provider_) throw GatewayError("gateway needs a provider");
  if (options_.max_attempts < 1) options_.max_attempts = 1;
  if (!options_.sleep) options_.sleep = [](std::chrono::milliseconds d) { std::this_thread::sleep_for(d); };
  if (options_.cache_dir) std::filesystem::create_directories(*options_.cache_dir);
}

std::string Gateway::cache_key(const ChatRequest& request) { return sha256_hex(request_body(request).dump()); }

std::vector<std::string> Gateway::warnings() const {
  std::lock_guard lock(warn_mutex_);
  return warnings_;
}

void Gateway::warn(std::string message) {
  std::cerr << "warning: " << message << '\n';
  std::lock_guard lock(warn_mutex_);
  warnings_.push_back(std::move(message));
}

std::optional<ChatResponse> Gateway::cache_lookup(const std::string& key) {
  const auto path = *options_.cache_dir / (key + ".json");
  std::error_code ec;
  if (!std::filesystem::exists(path, ec)) return std::nullopt;
  try {
    std::ifstream in(path, std::ios::binary);
    const auto j = json::parse(in);
    if (j.at("key").get<std::string>() != key) throw std::runtime_error("key mismatch");
    ChatResponse r;
    r.text = j.at("text").get<std::string>();
    r.prompt_tokens = j.at("prompt_tokens").get<std::int64_t>();
    r.completion_tokens = j.at("completion_tokens").get<std::int64_t>();
    r.usage_reported = j.at("usage_reported").get<bool>();
    r.cached = true;
    return r;
  } catch (const std::exception& e) {
    warn("cache entry " + path.string() + " is corrupt (" + e.what() + "); bypassing cache");
    return std::nullopt;
  }
}

void Gateway::cache_store(const std::string& key, const ChatResponse& response) {
  const json j = {{"key", key},
                  {"text", response.text},
                  {"prompt_tokens", response.prompt_tokens},
                  {"completion_tokens", response.completion_tokens},
                  {"usage_reported", response.usage_reported}};
  std::lock_guard lock(cache_mutex_);
  const auto path = *options_.cache_dir / (key + ".json");
  const auto tmp = *options_.cache_dir / (key + ".json.tmp");
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    out << j.dump();
    if (!out) {
      warn("could not write cache entry " + tmp.string());
      return;
    }
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) warn("could not commit cache entry " + path.string() + ": " + ec.message());
}

ChatResponse Gateway::send_with_retry(const ChatRequest& request) {
  auto delay = options_.initial_backoff;
  std::string last_error;
  for (int attempt = 1; attempt <= options_.max_attempts; ++attempt) {
    try {
      in_flight_.acquire();
      struct Release {
        std::counting_semaphore<1024>& s;
        ~Release() { s.release(); }
      } release{in_flight_};
      ++provider_calls_;
      return provider_->send(request);
    } catch (const TransientError& e) {
      last_error = e.what();
    }
    if (attempt < options_.max_attempts) {
      options_.sleep(delay);
      delay = std::chrono::milliseconds(static_cast<std::int64_t>(std::llround(delay.count() * options_.backoff_factor)));
    }
  }
  throw GatewayError("gave up after " + std::to_string(options_.max_attempts) + " attempts: " + last_error);
}

ChatResponse Gateway::complete(const ChatRequest& request) {
  if (request.messages.empty()) throw GatewayError("chat request has no messages");
  if (!(request.temperature >= 0.0)) throw GatewayError("temperature must be >= 0");
  if (request.max_tokens <= 0) throw GatewayError("max_tokens must be positive");
  ++completions_;

  std::string key;
  if (options_.cache_dir) {
    key = cache_key(request);
    if (auto hit = cache_lookup(key)) return *hit;
  }
  const auto start = std::chrono::steady_clock::now();
  auto response = send_with_retry(request);
  response.latency_ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count();
  response.cached = false;
  if (options_.cache_dir) cache_store(key, response);
  return response;
}

// Segmentation -------------------------------------------------------------

std::optional<std::size_t> find_line_marker(std::string_view s, std::string_view marker, std::size_t from) {
  for (const auto start : text::line_starts(s)) {
    if (start < from) continue;
    std::size_t i = start;
    while (i < s.size() && (s[i] == ' ' || s[i] == '\t')) ++i;
    if (s.substr(i).starts_with(marker)) return i;
  }
  return std::nullopt;
}

CotSegments segment_cot(std::string_view completion) {
  const auto answer_at = find_line_marker(completion, "ANSWER:");
  if (!answer_at) return {"", std::string(text::trim(completion)), false};

  const auto before = completion.substr(0, *answer_at);
  std::string_view think = before;
  if (const auto think_at = find_line_marker(before, "THINK:")) think = before.substr(*think_at + 6);
  const auto answer = completion.substr(*answer_at + 7);
  return {std::string(text::trim(think)), std::string(text::trim(answer)), true};
}

}  // namespace ifkit
