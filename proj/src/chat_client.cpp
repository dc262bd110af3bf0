#include "actguard/chat_client.hpp"

#define CPPHTTPLIB_OPENSSL_SUPPORT
#include <httplib.h>

#include "actguard/digest.hpp"
#include "actguard/image.hpp"
#include "actguard/prompts.hpp"

namespace actguard {

using json = nlohmann::json;

ChatMessage make_message(std::string role, const std::string& text_with_slot,
                         const std::vector<std::uint8_t>& image) {
  ChatMessage m;
  m.role = std::move(role);
  const auto slot = text_with_slot.find(kImageSlot);
  if (slot == std::string::npos || image.empty()) {
    m.content.push_back({ContentPart::Kind::Text, text_with_slot, {}});
    return m;
  }
  const std::string before = text_with_slot.substr(0, slot);
  const std::string after = text_with_slot.substr(slot + kImageSlot.size());
  if (!before.empty()) m.content.push_back({ContentPart::Kind::Text, before, {}});
  m.content.push_back({ContentPart::Kind::Image, {}, image});
  if (!after.empty()) m.content.push_back({ContentPart::Kind::Text, after, {}});
  return m;
}

json request_to_json(const ChatRequest& req) {
  json messages = json::array();
  for (const auto& m : req.messages) {
    json parts = json::array();
    for (const auto& p : m.content) {
      if (p.kind == ContentPart::Kind::Text) {
        parts.push_back({{"type", "text"}, {"text", p.text}});
      } else {
        const bool png = sniff_format(p.image) == ImageFormat::Png;
        const std::string url = std::string("data:") + (png ? "image/png" : "image/x-portable-pixmap") +
                                ";base64," + base64_encode(p.image);
        parts.push_back({{"type", "image_url"}, {"image_url", {{"url", url}}}});
      }
    }
    messages.push_back({{"role", m.role}, {"content", parts}});
  }
  json body = {{"model", req.model}, {"messages", messages}, {"max_tokens", req.max_tokens}};
  if (req.temperature) body["temperature"] = *req.temperature;
  if (req.top_k) body["top_k"] = *req.top_k;
  if (req.top_p) body["top_p"] = *req.top_p;
  if (req.logprobs) {
    body["logprobs"] = true;
    body["top_logprobs"] = 1;
  }
  return body;
}

ChatResponse response_from_json(const json& body) {
  auto bad = [](const std::string& why) { return Error(ErrorCode::ProtocolError, "chat response: " + why); };
  if (!body.is_object()) throw bad("body is not an object");
  auto choices = body.find("choices");
  if (choices == body.end() || !choices->is_array() || choices->empty()) throw bad("missing choices");
  const json& choice = (*choices)[0];
  ChatResponse out;
  if (auto msg = choice.find("message"); msg != choice.end() && msg->is_object()) {
    if (auto c = msg->find("content"); c != msg->end()) {
      if (c->is_string()) {
        out.text = c->get<std::string>();
      } else if (c->is_array()) {
        for (const auto& part : *c) {
          if (part.is_object() && part.value("type", "") == "text") out.text += part.value("text", "");
        }
      }
    }
  } else if (auto t = choice.find("text"); t != choice.end() && t->is_string()) {
    out.text = t->get<std::string>();
  } else {
    throw bad("choice has neither message nor text");
  }
  if (auto lp = choice.find("logprobs"); lp != choice.end() && lp->is_object()) {
    if (auto content = lp->find("content"); content != lp->end() && content->is_array()) {
      for (const auto& tok : *content) {
        if (!tok.is_object() || !tok.contains("token") || !tok.contains("logprob")) continue;
        if (!tok["token"].is_string() || !tok["logprob"].is_number()) continue;
        out.tokens.push_back({tok["token"].get<std::string>(), tok["logprob"].get<double>()});
      }
    }
  }
  return out;
}

ChatClient::ChatClient(EndpointConfig endpoint, RetryPolicy retry)
    : endpoint_(std::move(endpoint)), retry_(retry) {
  if (endpoint_.base_url.empty()) throw Error(ErrorCode::ConfigError, "endpoint base_url is empty");
  if (retry_.max_attempts < 1) throw Error(ErrorCode::ConfigError, "retry max_attempts must be >= 1");
}

ChatResponse ChatClient::complete(const ChatRequest& req) const {
  return with_retries(retry_, [&] { return complete_once(req); });
}

ChatResponse ChatClient::complete_once(const ChatRequest& req) const {
  httplib::Client cli(endpoint_.base_url);
  const auto secs = std::chrono::duration_cast<std::chrono::seconds>(endpoint_.timeout);
  const auto usecs = std::chrono::duration_cast<std::chrono::microseconds>(endpoint_.timeout - secs);
  cli.set_connection_timeout(secs.count(), usecs.count());
  cli.set_read_timeout(secs.count(), usecs.count());
  httplib::Headers headers;
  if (!endpoint_.api_key.empty()) headers.emplace("Authorization", "Bearer " + endpoint_.api_key);
  const std::string payload = request_to_json(req).dump();
  auto res = cli.Post(endpoint_.path, headers, payload, "application/json");
  if (!res) {
    throw Error(ErrorCode::BackendUnavailable,
                "request to " + endpoint_.base_url + " failed: " + httplib::to_string(res.error()));
  }
  if (res->status == 429 || res->status >= 500) {
    throw Error(ErrorCode::BackendUnavailable, "endpoint returned HTTP " + std::to_string(res->status));
  }
  if (res->status < 200 || res->status >= 300) {
    throw Error(ErrorCode::ConfigError, "endpoint rejected the request with HTTP " + std::to_string(res->status));
  }
  json body = json::parse(res->body, nullptr, false);
  if (body.is_discarded()) throw Error(ErrorCode::ProtocolError, "chat response is not JSON");
  return response_from_json(body);
}

}  // namespace actguard
