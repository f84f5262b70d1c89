#pragma once

#include <atomic>
#include <chrono>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <semaphore>
#include <string>
#include <string_view>
#include <vector>

namespace ifkit {

enum class Role { system, user, assistant };

std::string_view role_name(Role role);

struct Message {
  Role role = Role::user;
  std::string content;

  bool operator==(const Message&) const = default;
};

struct ChatRequest {
  std::string model;
  std::vector<Message> messages;
  double temperature = 0.0;
  int max_tokens = 4096;
};

struct ChatResponse {
  std::string text;
  std::int64_t prompt_tokens = 0;
  std::int64_t completion_tokens = 0;
  bool usage_reported = false;
  double latency_ms = 0.0;
  bool cached = false;
};

/// Throws TransientError for retryable failures and GatewayError otherwise.
class Provider {
 public:
  virtual ~Provider() = default;
  virtual ChatResponse send(const ChatRequest& request) = 0;
};

/// Chat-completions over HTTP(S): POST {base_url}/chat/completions.
class HttpProvider final : public Provider {
 public:
  HttpProvider(std::string base_url, std::string api_key, std::chrono::seconds timeout = std::chrono::seconds(120));
  ChatResponse send(const ChatRequest& request) override;

  /// Number of HttpProvider objects ever constructed in this process.
  static std::size_t instances_created();

 private:
  std::string origin_;
  std::string path_prefix_;
  std::string api_key_;
  std::chrono::seconds timeout_;
};

/// Wraps a callable; used for mocks and in-process fixtures.
class FunctionProvider final : public Provider {
 public:
  using Fn = std::function<ChatResponse(const ChatRequest&)>;
  explicit FunctionProvider(Fn fn) : fn_(std::move(fn)) {}
  ChatResponse send(const ChatRequest& request) override { return fn_(request); }

 private:
  Fn fn_;
};

/// Replies with the content of the last user message.
std::shared_ptr<Provider> make_echo_provider();

struct GatewayOptions {
  std::optional<std::filesystem::path> cache_dir;
  int max_attempts = 5;
  std::chrono::milliseconds initial_backoff{500};
  double backoff_factor = 2.0;
  int max_in_flight = 4;
  /// Replaceable so tests do not actually wait.
  std::function<void(std::chrono::milliseconds)> sleep;
};

class Gateway {
 public:
  explicit Gateway(std::shared_ptr<Provider> provider, GatewayOptions options = {});

  ChatResponse complete(const ChatRequest& request);

  /// Lowercase hex SHA-256 of the canonical JSON form of the request.
  static std::string cache_key(const ChatRequest& request);

  std::size_t provider_calls() const { return provider_calls_.load(); }
  std::size_t completions() const { return completions_.load(); }
  std::vector<std::string> warnings() const;

 private:
  std::optional<ChatResponse> cache_lookup(const std::string& key);
  void cache_store(const std::string& key, const ChatResponse& response);
  ChatResponse send_with_retry(const ChatRequest& request);
  void warn(std::string message);

  std::shared_ptr<Provider> provider_;
  GatewayOptions options_;
  std::counting_semaphore<1024> in_flight_;
  std::mutex cache_mutex_;
  mutable std::mutex warn_mutex_;
  std::vector<std::string> warnings_;
  std::atomic<std::size_t> provider_calls_{0};
  std::atomic<std::size_t> completions_{0};
};

/// Reads LLM_BASE_URL and LLM_API_KEY; throws GatewayError when unset.
std::shared_ptr<Provider> make_provider_from_env();

std::string sha256_hex(std::string_view data);

// Prompt templates ---------------------------------------------------------

enum class TemplateId { cot, few_shot, self_reflection, selective_gate, span_extraction, judge };

std::string_view template_name(TemplateId id);
std::optional<TemplateId> parse_template_id(std::string_view name);
/// Shipped template body, byte-for-byte as in assets/templates/<name>.txt.
std::string_view template_text(TemplateId id);
/// Hash over all shipped templates, recorded in run configs.
std::string templates_hash();

using Bindings = std::map<std::string, std::string, std::less<>>;

/// Substitutes {name} placeholders in one pass. Throws TemplateError naming
/// the first unbound placeholder.
std::string render_template(std::string_view body, const Bindings& bindings);
std::string render_prompt(TemplateId id, const Bindings& bindings);
std::vector<std::string> template_placeholders(std::string_view body);

// THINK / ANSWER segmentation ---------------------------------------------

struct CotSegments {
  std::string think;
  std::string answer;
  bool clean = false;

  bool operator==(const CotSegments&) const = default;
};

/// Splits at the first line-initial "ANSWER:". Without that marker the whole
/// (trimmed) text is the answer and clean is false.
CotSegments segment_cot(std::string_view completion);

/// Byte offset of the first line-initial occurrence of `marker`, allowing
/// leading spaces or tabs on the line.
std::optional<std::size_t> find_line_marker(std::string_view s, std::string_view marker, std::size_t from = 0);

}  // namespace ifkit
