#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "actguard/chat_client.hpp"
#include "actguard/critic.hpp"
#include "actguard/image.hpp"
#include "actguard/oracle.hpp"
#include "actguard/prompts.hpp"
#include "actguard/reference_critic.hpp"
#include "actguard/rollout.hpp"
#include "actguard/sim_agent.hpp"

namespace actguard {

inline constexpr int kConfigVersion = 1;

// Endpoint settings as written in a config file. Credentials are never part of it.
struct EndpointSpec {
  std::string base_url;
  std::string path = "/v1/chat/completions";
  std::string model;
  int timeout_ms = 60'000;
  bool operator==(const EndpointSpec&) const = default;
};

enum class AgentKind { Sim, Remote };
enum class CriticKind { Scripted, Reference, Remote };

struct AgentSpec {
  std::string id;
  AgentKind kind = AgentKind::Sim;
  DialectConfig dialect;
  SimAgentConfig sim;  // kind == Sim; the seed comes from the command line
  std::optional<EndpointSpec> endpoint;
  bool operator==(const AgentSpec&) const = default;
};

struct CriticSpec {
  std::string id;
  CriticKind kind = CriticKind::Scripted;
  ScriptedCriticConfig scripted;  // kind == Scripted; the seed comes from the command line
  std::optional<std::string> params_path;
  std::optional<EndpointSpec> endpoint;
  bool operator==(const CriticSpec&) const = default;
};

struct PipelineConfig {
  int config_version = kConfigVersion;
  std::vector<AgentSpec> agents;
  std::vector<CriticSpec> critics;
  SamplingParams sampling;
  MatchConfig match;
  SomStyle som;
  RetryPolicy retry;
  TrainHyper train;  // seed unused; taken from the command line
  TaskLevel level = TaskLevel::High;
  std::optional<std::string> episodes_path;
  std::string output_dir = "out";
  bool operator==(const PipelineConfig&) const = default;
};

// All parse and validation failures throw Error{ConfigError}.
PipelineConfig config_from_json(const std::string& text);
std::string config_to_json(const PipelineConfig& cfg);
PipelineConfig load_config(const std::string& path);
// Value checks; with check_paths, referenced input files must exist.
void validate(const PipelineConfig& cfg, bool check_paths);

const AgentSpec& find_agent(const PipelineConfig& cfg, const std::string& id);
const CriticSpec& find_critic(const PipelineConfig& cfg, const std::string& id);

/// Builds backends. API keys come from AGENT_API_KEY / CRITIC_API_KEY and
/// AGENT_BASE_URL / CRITIC_BASE_URL override configured endpoints.
std::unique_ptr<AgentBackend> make_agent(const PipelineConfig& cfg, const AgentSpec& spec, std::uint64_t seed);
std::unique_ptr<CriticBackend> make_critic(const PipelineConfig& cfg, const CriticSpec& spec, std::uint64_t seed);

}  // namespace actguard
