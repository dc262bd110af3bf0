#pragma once

#include <string>
#include <string_view>

#include "actguard/action.hpp"

namespace actguard {

enum class TaskLevel { High, Low };

std::string_view to_string(TaskLevel level);

// Marks where the screenshot goes; chat clients split the text here and
// attach the image as its own content part.
inline constexpr std::string_view kImageSlot = "<image>";

struct AgentPrompt {
  std::string system;
  std::string user;
};

/// System and user messages for the dialect's agent. The per-step plan is
/// included only for low-level tasks. Throws Error{MissingStepPlan}.
AgentPrompt build_agent_prompt(DialectId dialect, const StepContext& ctx, TaskLevel level);

/// Critic prompt for one candidate. Never includes the step plan.
std::string build_critic_prompt(const StepContext& ctx, const Action& action);

}  // namespace actguard
