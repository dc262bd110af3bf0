#include "actguard/critic.hpp"

#include <cctype>

#include "actguard/error.hpp"
#include "actguard/prompts.hpp"
#include "actguard/rng.hpp"

namespace actguard {

std::size_t select_best_of_n(std::span<const Judgment> judgments) {
  if (judgments.empty()) throw Error(ErrorCode::EmptyCandidates, "best-of-N needs at least one candidate");
  std::optional<std::size_t> best;
  for (std::size_t i = 0; i < judgments.size(); ++i) {
    if (judgments[i].label != Label::Correct) continue;
    if (!best || judgments[i].confidence > judgments[*best].confidence) best = i;
  }
  return best.value_or(0);
}

GateDecision gate(const Judgment& j, double threshold) {
  return j.label == Label::Correct && j.confidence >= threshold ? GateDecision::Accept : GateDecision::Reject;
}

void validate(const ScriptedCriticConfig& cfg) {
  if (!(cfg.accuracy >= 0.0 && cfg.accuracy <= 1.0)) {
    throw Error(ErrorCode::InvalidArgument, "scripted critic accuracy must be in [0, 1]");
  }
  if (cfg.confidence_model == ConfidenceModel::Calibrated && cfg.accuracy < 0.5) {
    throw Error(ErrorCode::InvalidArgument, "calibrated confidences need accuracy >= 0.5");
  }
}

ScriptedCritic::ScriptedCritic(ScriptedCriticConfig cfg, std::string id) : cfg_(cfg), id_(std::move(id)) {
  validate(cfg_);
}

Judgment ScriptedCritic::judge(const JudgeRequest& req) const {
  if (!req.hidden_truth) throw Error(ErrorCode::InvalidArgument, "scripted critic needs the hidden ground truth");
  const MatchConfig match = req.match ? *req.match : MatchConfig{};
  const bool truth = match_step(req.action, *req.hidden_truth, match).step_ok;
  Rng rng(derive_seed(cfg_.seed, {req.key.episode, req.key.step, req.key.candidate}));
  const bool agree = rng.bernoulli(cfg_.accuracy);
  const bool says_correct = agree ? truth : !truth;
  Judgment j;
  j.label = says_correct ? Label::Correct : Label::Wrong;
  if (cfg_.confidence_model == ConfidenceModel::Calibrated) {
    j.confidence = says_correct ? cfg_.accuracy : 1.0 - cfg_.accuracy;
  } else {
    const double u = rng.uniform();
    j.confidence = says_correct ? 0.5 + 0.5 * u : 0.5 * u;
  }
  return j;
}

std::unique_ptr<CriticBackend> make_oracle_critic(std::string id) {
  return std::make_unique<ScriptedCritic>(ScriptedCriticConfig{1.0, 0, ConfidenceModel::Calibrated}, std::move(id));
}

std::optional<DecisionToken> find_decision_token(std::span<const TokenLogprob> tokens) {
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    std::string t;
    for (char c : tokens[i].token) {
      if (std::isspace(static_cast<unsigned char>(c)) || c == '[' || c == ']' || c == '"' || c == '\'' ||
          c == '.') {
        continue;
      }
      t += static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    }
    if (t == "correct") return DecisionToken{Label::Correct, tokens[i].logprob, i};
    if (t == "wrong") return DecisionToken{Label::Wrong, tokens[i].logprob, i};
  }
  return std::nullopt;
}

Judgment judgment_from_completion(const ChatResponse& response) {
  const auto tok = find_decision_token(response.tokens);
  if (!tok) throw Error(ErrorCode::ProtocolError, "critic completion has no correct/wrong token");
  Judgment j;
  j.label = tok->label;
  j.confidence = tok->score;
  std::string answer;
  for (char c : response.text) {
    if (!std::isspace(static_cast<unsigned char>(c)) && c != '[' && c != ']' && c != '"' && c != '\'' && c != '.') {
      answer += static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    }
  }
  if (answer != "correct" && answer != "wrong") {
    // Free-form answers are not trusted as acceptances.
    j.protocol_deviation = true;
    j.label = Label::Wrong;
  }
  return j;
}

RemoteCritic::RemoteCritic(EndpointConfig endpoint, RetryPolicy retry, SomStyle style, std::string id)
    : client_(std::move(endpoint), RetryPolicy{1, std::chrono::milliseconds{0}, 1.0}), retry_(retry), style_(style), id_(std::move(id)) {
  validate(style_);
}

ChatRequest RemoteCritic::build_request(const StepContext& ctx, const Action& a,
                                        const std::vector<std::uint8_t>& som) const {
  ChatRequest req;
  req.model = client_.endpoint().model;
  req.messages.push_back(make_message("user", build_critic_prompt(ctx, a), som));
  req.temperature = 0.0;
  req.max_tokens = 16;
  req.logprobs = true;
  return req;
}

Judgment RemoteCritic::judge(const JudgeRequest& req) const {
  std::vector<std::uint8_t> som(req.som_image.begin(), req.som_image.end());
  if (som.empty() && !req.context.screenshot.path.empty()) {
    som = annotate_som_bytes(read_bytes(req.context.screenshot.path), req.action, style_);
  }
  const ChatRequest chat = build_request(req.context, req.action, som);
  return with_retries(retry_, [&] { return judgment_from_completion(client_.complete(chat)); });
}

Judgment judge_or_reject(const CriticBackend& backend, const JudgeRequest& req) {
  try {
    return backend.judge(req);
  } catch (const Error&) {
    Judgment j;
    j.label = Label::Wrong;
    j.failed = true;
    return j;
  }
}

}  // namespace actguard
