#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "actguard/action.hpp"
#include "actguard/chat_client.hpp"
#include "actguard/image.hpp"
#include "actguard/oracle.hpp"

namespace actguard {

/// A critic verdict. `confidence` lives on the backend's own scale: a
/// probability of "correct" for scripted/reference critics, the raw
/// decision-token score for remote ones.
struct Judgment {
  Label label = Label::Wrong;
  double confidence = 0.0;
  bool protocol_deviation = false;  // remote answer was not exactly correct/wrong
  bool failed = false;              // no verdict could be obtained; counted as wrong
  bool operator==(const Judgment&) const = default;
};

/// Best-of-N choice: highest confidence among candidates labeled correct
/// (lowest index on ties); index 0 when none is. Throws Error{EmptyCandidates}.
std::size_t select_best_of_n(std::span<const Judgment> judgments);

enum class GateDecision { Accept, Reject };
GateDecision gate(const Judgment& j, double threshold);

struct CandidateKey {
  std::uint64_t episode = 0;
  std::uint64_t step = 0;
  std::uint64_t candidate = 0;
};

struct JudgeRequest {
  const StepContext& context;
  const Action& action;
  // Hidden ground truth; only simulation backends may look at it.
  const GroundTruth* hidden_truth = nullptr;
  const MatchConfig* match = nullptr;
  CandidateKey key;
  // Set-of-mark screenshot for image-consuming backends (empty = load from context).
  std::span<const std::uint8_t> som_image;
};

class CriticBackend {
 public:
  virtual ~CriticBackend() = default;
  virtual const std::string& id() const = 0;
  virtual bool deterministic() const = 0;
  virtual bool wants_image() const { return false; }
  // Implementations must be safe to call concurrently.
  virtual Judgment judge(const JudgeRequest& req) const = 0;
};

enum class ConfidenceModel { Calibrated, Uniform };

struct ScriptedCriticConfig {
  double accuracy = 1.0;  // probability of agreeing with the oracle label
  std::uint64_t seed = 0;
  ConfidenceModel confidence_model = ConfidenceModel::Calibrated;
  bool operator==(const ScriptedCriticConfig&) const = default;
};

void validate(const ScriptedCriticConfig& cfg);

/// Simulation critic that agrees with the hidden oracle label with the
/// configured accuracy. Calibrated confidence is the posterior P(correct)
/// given its own accuracy; uniform confidence is random on the label's half
/// of [0, 1].
class ScriptedCritic final : public CriticBackend {
 public:
  ScriptedCritic(ScriptedCriticConfig cfg, std::string id = "scripted");

  const std::string& id() const override { return id_; }
  bool deterministic() const override { return true; }
  Judgment judge(const JudgeRequest& req) const override;

 private:
  ScriptedCriticConfig cfg_;
  std::string id_;
};

std::unique_ptr<CriticBackend> make_oracle_critic(std::string id = "oracle");

/// First completion token whose text is "correct" or "wrong" (ignoring
/// whitespace, brackets and quotes), with its score.
struct DecisionToken {
  Label label;
  double score;
  std::size_t index;
};

std::optional<DecisionToken> find_decision_token(std::span<const TokenLogprob> tokens);

/// Throws Error{ProtocolError} when no decision token is present.
Judgment judgment_from_completion(const ChatResponse& response);

/// Critic behind a chat-completions endpoint that exposes token log-probabilities.
class RemoteCritic final : public CriticBackend {
 public:
  RemoteCritic(EndpointConfig endpoint, RetryPolicy retry = {}, SomStyle style = {},
               std::string id = "remote-critic");

  const std::string& id() const override { return id_; }
  bool deterministic() const override { return false; }
  bool wants_image() const override { return true; }
  // Throws Error{BackendUnavailable} or Error{ProtocolError} after retries.
  Judgment judge(const JudgeRequest& req) const override;

  ChatRequest build_request(const StepContext& ctx, const Action& a, const std::vector<std::uint8_t>& som) const;

 private:
  ChatClient client_;
  RetryPolicy retry_;
  SomStyle style_;
  std::string id_;
};

/// Calls the backend with the fail-safe policy: any error becomes a failed
/// "wrong" judgment so the candidate keeps its index.
Judgment judge_or_reject(const CriticBackend& backend, const JudgeRequest& req);

}  // namespace actguard
