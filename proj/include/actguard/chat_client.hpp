#pragma once

#include <chrono>
#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

namespace actguard {

struct ContentPart {
  enum class Kind { Text, Image } kind = Kind::Text;
  std::string text;
  std::vector<std::uint8_t> image;  // encoded PNG/PPM bytes
};

struct ChatMessage {
  std::string role;
  std::vector<ContentPart> content;
};

/// Builds a message from text containing kImageSlot; the image is placed at the slot.
ChatMessage make_message(std::string role, const std::string& text_with_slot,
                         const std::vector<std::uint8_t>& image);

struct ChatRequest {
  std::string model;
  std::vector<ChatMessage> messages;
  std::optional<double> temperature;
  std::optional<int> top_k;
  std::optional<double> top_p;
  int max_tokens = 512;
  bool logprobs = false;
};

struct TokenLogprob {
  std::string token;
  double logprob = 0.0;
};

struct ChatResponse {
  std::string text;
  std::vector<TokenLogprob> tokens;
};

nlohmann::json request_to_json(const ChatRequest& req);
// Throws Error{ProtocolError} when the body does not look like a chat completion.
ChatResponse response_from_json(const nlohmann::json& body);

struct EndpointConfig {
  std::string base_url;  // scheme://host[:port]
  std::string path = "/v1/chat/completions";
  std::string model;
  std::string api_key;   // taken from the environment, never from config files
  std::chrono::milliseconds timeout{60'000};
  bool operator==(const EndpointConfig&) const = default;
};

struct RetryPolicy {
  int max_attempts = 3;
  std::chrono::milliseconds base_delay{500};
  double multiplier = 2.0;
  bool operator==(const RetryPolicy&) const = default;
};

/// Runs `op` with exponential backoff while it throws a retryable Error.
template <typename F>
auto with_retries(const RetryPolicy& policy, F&& op) -> decltype(op());

/// Chat-completions client over HTTP(S). Thread-safe; each call opens its own connection.
class ChatClient {
 public:
  ChatClient(EndpointConfig endpoint, RetryPolicy retry = {});

  // Throws Error{BackendUnavailable} once retries are exhausted.
  ChatResponse complete(const ChatRequest& req) const;

  const EndpointConfig& endpoint() const { return endpoint_; }
  const RetryPolicy& retry_policy() const { return retry_; }

 private:
  ChatResponse complete_once(const ChatRequest& req) const;

  EndpointConfig endpoint_;
  RetryPolicy retry_;
};

}  // namespace actguard

#include "actguard/chat_client_impl.hpp"
