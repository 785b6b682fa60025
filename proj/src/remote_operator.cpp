#include "aspect/remote_operator.hpp"

#include <algorithm>
#include <atomic>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <semaphore>
#include <thread>

#include <httplib.h>

#include "aspect/rng.hpp"

namespace aspect {

nlohmann::json remote_config_to_json(const RemoteOperatorConfig& c) {
  return nlohmann::json{
      {"base_url", c.base_url},
      {"path", c.path},
      {"model", c.model},
      {"credential_env", c.credential_env},
      {"cache_file", c.cache_file},
      {"max_in_flight", c.max_in_flight},
      {"retry",
       {{"max_attempts", c.retry.max_attempts},
        {"initial_backoff_ms", c.retry.initial_backoff.count()},
        {"request_timeout_s", c.retry.request_timeout.count()}}}};
}

RemoteOperatorConfig remote_config_from_json(const nlohmann::json& j) {
  RemoteOperatorConfig c;
  c.base_url = j.at("base_url").get<std::string>();
  if (j.contains("path")) c.path = j.at("path").get<std::string>();
  if (j.contains("model")) c.model = j.at("model").get<std::string>();
  if (j.contains("credential_env")) {
    c.credential_env = j.at("credential_env").get<std::string>();
  }
  if (j.contains("cache_file")) c.cache_file = j.at("cache_file").get<std::string>();
  if (j.contains("max_in_flight")) c.max_in_flight = j.at("max_in_flight").get<int>();
  if (j.contains("retry")) {
    const auto& r = j.at("retry");
    if (r.contains("max_attempts")) c.retry.max_attempts = r.at("max_attempts").get<int>();
    if (r.contains("initial_backoff_ms")) {
      c.retry.initial_backoff = std::chrono::milliseconds(r.at("initial_backoff_ms").get<long>());
    }
    if (r.contains("request_timeout_s")) {
      c.retry.request_timeout = std::chrono::seconds(r.at("request_timeout_s").get<long>());
    }
  }
  return c;
}

const std::string& operator_system_prompt() {
  static const std::string prompt =
      "You are an imagination reasoning assistant for a reinforcement-learning "
      "agent that reuses skills it already masters. The user message has four "
      "parts:\n"
      "1. A brief about the environment.\n"
      "2. What the agent knows (its source task).\n"
      "3. What the target task is.\n"
      "4. A description of the current observation.\n"
      "Rewrite the observation so the target task becomes solvable with the "
      "source skill: substitute an object only when the two objects afford the "
      "same action, keep spatial layout and wording intact, and change nothing "
      "that is not necessary. Never invent objects that are not present.\n"
      "After reasoning, always output only valid JSON in this format:\n"
      "{\"imagine\": true | false, \"description\": \"<rewritten or unchanged "
      "scene description>\"}\n"
      "Set \"imagine\" to true if you altered the scene and false otherwise. "
      "Do not include extra commentary, code, or markdown after the JSON.";
  return prompt;
}

std::string build_user_message(const OperatorContext& ctx) {
  return "1. Environment brief:\n" + ctx.environment_brief +
         "\n2. What the agent knows: " + ctx.source_task.describe() +
         "\n3. Target task: " + ctx.target_task.describe() +
         "\n4. Current observation: " + ctx.observation_caption.text;
}

namespace {

std::uint64_t fnv1a(const std::string& text, std::uint64_t h) {
  for (unsigned char c : text) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  h ^= 0xfe;  // field separator
  h *= 0x100000001b3ULL;
  return h;
}

std::uint64_t context_hash(const RemoteOperatorConfig& config,
                           const OperatorContext& ctx) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  h = fnv1a(config.base_url, h);
  h = fnv1a(config.model, h);
  h = fnv1a(ctx.environment_brief, h);
  for (const TaskSpec* task : {&ctx.source_task, &ctx.target_task}) {
    h = fnv1a(task->reward_object, h);
    h = fnv1a(task->distractor_object, h);
    for (const auto& d : task->environment_descriptors) h = fnv1a(d, h);
  }
  return h;
}

}  // namespace

std::string cache_key(const RemoteOperatorConfig& config,
                      const OperatorContext& ctx) {
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx",
                static_cast<unsigned long long>(context_hash(config, ctx)));
  return std::string(buf) + "\n" + ctx.observation_caption.text;
}

std::string extract_text_payload(const std::string& body) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(body);
  } catch (const nlohmann::json::exception&) {
    throw SchemaError("response body is not JSON", body);
  }
  if (j.is_object() && j.contains("choices") && j["choices"].is_array() &&
      !j["choices"].empty()) {
    const auto& c0 = j["choices"][0];
    if (c0.contains("message") && c0["message"].is_object() &&
        c0["message"].contains("content") && c0["message"]["content"].is_string()) {
      return c0["message"]["content"].get<std::string>();
    }
    if (c0.contains("text") && c0["text"].is_string()) {
      return c0["text"].get<std::string>();
    }
  }
  if (j.is_object() && j.contains("content") && j["content"].is_array() &&
      !j["content"].empty() && j["content"][0].contains("text") &&
      j["content"][0]["text"].is_string()) {
    return j["content"][0]["text"].get<std::string>();
  }
  // A bare OperatorResult body is accepted as its own payload.
  if (j.is_object() && j.contains("imagine") && j.contains("description")) {
    return body;
  }
  throw SchemaError("response carries no text payload", body);
}

struct RemoteOperator::Impl {
  RemoteOperatorConfig config;
  mutable std::mutex cache_mutex;
  std::map<std::string, OperatorResult> cache;
  std::counting_semaphore<64> in_flight;
  std::atomic<std::uint64_t> requests{0};

  explicit Impl(RemoteOperatorConfig cfg)
      : config(std::move(cfg)),
        in_flight(std::max(1, std::min(64, config.max_in_flight))) {
    load_cache();
  }

  void load_cache() {
    if (config.cache_file.empty()) return;
    std::ifstream in(config.cache_file);
    if (!in) return;
    nlohmann::json j;
    try {
      in >> j;
      for (const auto& item : j.items()) {
        cache[item.key()] = {item.value().at("imagine").get<bool>(),
                             item.value().at("description").get<std::string>()};
      }
    } catch (const nlohmann::json::exception&) {
      // Unreadable cache files are ignored and rewritten on the next insert.
      cache.clear();
    }
  }

  void persist_cache_locked() {
    if (config.cache_file.empty()) return;
    nlohmann::json j = nlohmann::json::object();
    for (const auto& [key, result] : cache) {
      j[key] = {{"imagine", result.imagine}, {"description", result.description}};
    }
    std::ofstream out(config.cache_file, std::ios::binary);
    if (out) out << j.dump(2) << "\n";
  }

  OperatorResult request_once(const OperatorContext& ctx) {
    httplib::Client client(config.base_url);
    const auto timeout = config.retry.request_timeout;
    client.set_connection_timeout(timeout);
    client.set_read_timeout(timeout);
    client.set_write_timeout(timeout);

    httplib::Headers headers;
    if (const char* key = std::getenv(config.credential_env.c_str())) {
      headers.emplace("Authorization", std::string("Bearer ") + key);
    }

    nlohmann::json body = {
        {"model", config.model},
        {"messages",
         {{{"role", "system"}, {"content", operator_system_prompt()}},
          {{"role", "user"}, {"content", build_user_message(ctx)}}}}};

    requests.fetch_add(1);
    httplib::Result res =
        client.Post(config.path, headers, body.dump(), "application/json");
    if (!res) {
      if (res.error() == httplib::Error::ConnectionTimeout) {
        throw RequestTimeoutError("request to " + config.base_url +
                                  " timed out");
      }
      throw TransportError("request to " + config.base_url +
                           " failed: " + httplib::to_string(res.error()));
    }
    if (res->status != 200) {
      throw TransportError("request to " + config.base_url +
                           " returned HTTP " + std::to_string(res->status));
    }
    return validate_operator_output(extract_text_payload(res->body));
  }

  OperatorResult query(const OperatorContext& ctx) {
    const std::string key = cache_key(config, ctx);
    {
      std::lock_guard lock(cache_mutex);
      auto it = cache.find(key);
      if (it != cache.end()) return it->second;
    }

    in_flight.acquire();
    struct Release {
      std::counting_semaphore<64>& sem;
      ~Release() { sem.release(); }
    } release{in_flight};

    std::exception_ptr last;
    for (int attempt = 0; attempt < std::max(1, config.retry.max_attempts);
         ++attempt) {
      if (attempt > 0) {
        std::this_thread::sleep_for(config.retry.initial_backoff * (1 << (attempt - 1)));
      }
      try {
        OperatorResult result = request_once(ctx);
        std::lock_guard lock(cache_mutex);
        cache[key] = result;
        persist_cache_locked();
        return result;
      } catch (const OperatorError&) {
        last = std::current_exception();
      }
    }
    std::rethrow_exception(last);
  }
};

RemoteOperator::RemoteOperator(RemoteOperatorConfig config)
    : impl_(std::make_unique<Impl>(std::move(config))) {}

RemoteOperator::~RemoteOperator() = default;

OperatorResult RemoteOperator::operator()(const OperatorContext& ctx) {
  return impl_->query(ctx);
}

std::uint64_t RemoteOperator::requests_sent() const {
  return impl_->requests.load();
}

}  // namespace aspect
