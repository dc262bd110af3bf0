#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "actguard/action.hpp"
#include "actguard/chat_client.hpp"
#include "actguard/critic.hpp"
#include "actguard/episode.hpp"
#include "actguard/flywheel.hpp"
#include "actguard/image.hpp"
#include "actguard/oracle.hpp"
#include "actguard/parser.hpp"
#include "actguard/prompts.hpp"
#include "actguard/sim_agent.hpp"

namespace actguard {

struct SamplingParams {
  int n = 8;
  double temperature = 1.0;
  int top_k = 30;
  double top_p = 0.8;
  bool operator==(const SamplingParams&) const = default;
};

void validate(const SamplingParams& p);

struct AgentCall {
  const StepContext& context;
  TaskLevel level = TaskLevel::High;
  SamplingParams params;
  // Only simulation agents read the hidden ground truth.
  const GroundTruth* hidden_truth = nullptr;
  std::uint64_t episode_key = 0;
  std::uint64_t step = 0;
};

class AgentBackend {
 public:
  virtual ~AgentBackend() = default;
  virtual const std::string& id() const = 0;
  virtual const DialectConfig& dialect() const = 0;
  /// params.n raw completions in issue order. Implementations must be safe to
  /// call concurrently. Throws Error{BackendUnavailable} once retries run out.
  virtual std::vector<std::string> complete_n(const AgentCall& call) const = 0;
};

class SimAgentBackend final : public AgentBackend {
 public:
  explicit SimAgentBackend(SimAgentConfig cfg, std::string id = "sim-agent");

  const std::string& id() const override { return id_; }
  const DialectConfig& dialect() const override { return cfg_.dialect; }
  std::vector<std::string> complete_n(const AgentCall& call) const override;

 private:
  SimAgentConfig cfg_;
  std::string id_;
};

/// Agent behind a chat-completions endpoint. n > 1 issues n sampled requests;
/// n = 1 decodes greedily.
class RemoteAgent final : public AgentBackend {
 public:
  RemoteAgent(EndpointConfig endpoint, DialectConfig dialect, RetryPolicy retry = {}, std::string id = "remote-agent");

  const std::string& id() const override { return id_; }
  const DialectConfig& dialect() const override { return dialect_; }
  std::vector<std::string> complete_n(const AgentCall& call) const override;

  ChatRequest build_request(const StepContext& ctx, TaskLevel level, const SamplingParams& params,
                            const std::vector<std::uint8_t>& image) const;

 private:
  ChatClient client_;
  DialectConfig dialect_;
  std::string id_;
};

/// One sampled candidate: the completion, its normalized action or the parse error.
struct Candidate {
  std::string text;
  std::optional<ParsedOutput> parsed;
  std::optional<Action> action;  // normalized into screen pixels
  std::optional<std::string> parse_error;
  bool operator==(const Candidate&) const = default;
};

/// Samples params.n candidates; parse failures stay in place.
std::vector<Candidate> sample_n(const AgentBackend& agent, const AgentCall& call);

struct CandidateTrace {
  Candidate candidate;
  std::optional<Judgment> judgment;  // absent in critic-free runs
  bool oracle_ok = false;
};

struct StepResult {
  std::string episode_id;
  std::size_t step = 0;  // 1-based
  std::vector<CandidateTrace> candidates;
  int chosen_index = -1;  // -1 when the step failed before any candidate existed
  std::optional<Action> chosen;
  StepJudgment step_judgment;
  std::vector<bool> pass_at_n_flags;  // [k-1]: any of the first k candidates oracle-correct
  std::optional<std::string> error;
};

struct StepInput {
  const StepContext& context;
  const GroundTruth& truth;
  std::string episode_id;
  std::size_t step = 1;
  TaskLevel level = TaskLevel::High;
};

/// Sample, judge every candidate, select best-of-N, then score the choice
/// against the ground truth. Without a critic the first candidate is taken.
StepResult run_guided_step(const AgentBackend& agent, const CriticBackend* critic, const StepInput& in,
                           const SamplingParams& params, const MatchConfig& match, const SomStyle& som = {});

struct BenchmarkOptions {
  TaskLevel level = TaskLevel::High;
  std::size_t workers = 1;
  SomStyle som;
  bool greedy_without_critic = true;  // false keeps params.n for data collection
};

struct BenchmarkResult {
  MetricsReport report;
  std::vector<StepResult> steps;  // episode order, then step order
  std::size_t failed_steps = 0;
};

/// Base run (no critic: n = 1, greedy) or guided run over offline episodes.
BenchmarkResult run_benchmark(std::span<const OfflineEpisode> episodes, const AgentBackend& agent,
                              const CriticBackend* critic, const SamplingParams& params, const MatchConfig& match,
                              const BenchmarkOptions& opts = {});

/// Pass@N over step results for each N <= n in {1, 2, 4, 8} and N = n.
std::map<int, double> pass_at_n(std::span<const StepResult> steps, int n);

nlohmann::json to_json(const Judgment& j);
Judgment judgment_from_json(const nlohmann::json& j);
nlohmann::json to_json(const StepResult& s);
StepResult step_result_from_json(const nlohmann::json& j);

std::string traces_to_jsonl(std::span<const StepResult> steps);
// Throws SchemaViolation{line_no, reason}.
std::vector<StepResult> parse_traces(const std::string& content);
std::vector<StepResult> load_traces(const std::string& path);

/// Pairs every parsed candidate in the traces with its episode step for
/// labeling. With accepted_only, keeps only candidates the critic judged
/// correct. Throws Error{InvalidArgument} for steps missing from `episodes`.
std::vector<LabelingStep> labeling_steps_from_traces(std::span<const StepResult> traces,
                                                     std::span<const OfflineEpisode> episodes, bool accepted_only);

/// Runs fn(i) for i in [0, n) on `workers` threads. Exceptions are rethrown.
void parallel_for(std::size_t n, std::size_t workers, const std::function<void(std::size_t)>& fn);

}  // namespace actguard
