#pragma once

#include <string>

#include <nlohmann/json.hpp>

#include "actguard/action.hpp"
#include "actguard/oracle.hpp"

namespace actguard {

// Field names are part of the on-disk formats documented in docs/formats.md.

void write_context_fields(nlohmann::json& j, const StepContext& ctx);
// Throws std::invalid_argument naming the offending field.
StepContext read_context_fields(const nlohmann::json& j);

nlohmann::json to_json(const GroundTruth& gt);
GroundTruth ground_truth_from_json(const nlohmann::json& j);

nlohmann::json to_json(const StepJudgment& j);
StepJudgment step_judgment_from_json(const nlohmann::json& j);

nlohmann::json to_json(const MetricsReport& r);
MetricsReport metrics_from_json(const nlohmann::json& j);

nlohmann::json to_json(const MatchConfig& cfg);
MatchConfig match_config_from_json(const nlohmann::json& j);

/// Writes `content` to `path` via a temporary file and rename.
void write_file_atomic(const std::string& path, const std::string& content);
std::string read_file(const std::string& path);

/// Serializes one JSON value per line.
std::string dump_line(const nlohmann::json& j);

}  // namespace actguard
