#pragma once

#include <chrono>
#include <cstdint>
#include <map>
#include <memory>
#include <mutex>
#include <string>

#include <json.hpp>

#include "aspect/semantics.hpp"

namespace aspect {

struct RetryPolicy {
  int max_attempts = 3;
  std::chrono::milliseconds initial_backoff{500};
  std::chrono::seconds request_timeout{30};
};

struct RemoteOperatorConfig {
  std::string base_url;                      // e.g. "http://127.0.0.1:8080"
  std::string path = "/v1/chat/completions";
  std::string model;
  std::string credential_env = "ASPECT_LLM_KEY";  // never serialized
  std::string cache_file;                    // empty = in-memory cache only
  int max_in_flight = 4;
  RetryPolicy retry;
};

nlohmann::json remote_config_to_json(const RemoteOperatorConfig& config);
RemoteOperatorConfig remote_config_from_json(const nlohmann::json& j);

/// Fixed instructions sent as the system message with every request.
const std::string& operator_system_prompt();

/// The four-part user message: environment brief, source task, target task,
/// and the current observation caption.
std::string build_user_message(const OperatorContext& ctx);

/// Key under which an exchange is cached: a hash of everything except the
/// caption, plus the caption text itself. Changing any task field invalidates
/// the entry.
std::string cache_key(const RemoteOperatorConfig& config,
                      const OperatorContext& ctx);

/// Client for a remote semantic operator speaking a chat-style wire protocol:
/// POST {model, messages:[{role:"system",...},{role:"user",...}]} and read the
/// first text payload of the response, which must satisfy the OperatorResult
/// schema. Responses are cached by (context hash, caption); failed validation
/// is retried up to the policy limit with exponential backoff. Thread-safe;
/// at most max_in_flight requests run concurrently.
class RemoteOperator {
 public:
  explicit RemoteOperator(RemoteOperatorConfig config);
  ~RemoteOperator();

  OperatorResult operator()(const OperatorContext& ctx);

  /// Number of HTTP requests actually sent (cache hits send none).
  std::uint64_t requests_sent() const;

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

/// Pulls the first text payload out of a chat-style response body: either
/// choices[0].message.content, content[0].text, or the body itself when it
/// already matches the OperatorResult schema. Throws SchemaError otherwise.
std::string extract_text_payload(const std::string& body);

}  // namespace aspect
