#pragma once

#include <optional>
#include <span>
#include <string>
#include <vector>

#include "actguard/action.hpp"
#include "actguard/oracle.hpp"
#include "actguard/prompts.hpp"

namespace actguard {

std::optional<TaskLevel> task_level_from_string(std::string_view s);

struct EpisodeStep {
  StepContext context;
  GroundTruth truth;
  bool operator==(const EpisodeStep&) const = default;
};

/// A recorded episode judged step by step against its own contexts.
struct OfflineEpisode {
  std::string episode_id;
  std::vector<EpisodeStep> steps;
  std::string source_dataset;
  TaskLevel task_level = TaskLevel::High;
  bool operator==(const OfflineEpisode&) const = default;
};

/// History entry for step k (1-based) when the ground-truth action was taken.
std::string gt_history_entry(const Action& gt, int k);

// Throws Error{InvalidArgument}: low-level steps need a plan, history must be
// the renderings of the earlier ground-truth steps.
void validate(const OfflineEpisode& ep);

std::string episode_to_json_line(const OfflineEpisode& ep);
// One episode per line. Throws SchemaViolation{line_no, reason}.
std::vector<OfflineEpisode> parse_episodes(const std::string& content);
std::vector<OfflineEpisode> load_episodes(const std::string& path);
void save_episodes(const std::string& path, std::span<const OfflineEpisode> episodes);

}  // namespace actguard
