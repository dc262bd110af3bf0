#include "actguard/episode.hpp"

#include <nlohmann/json.hpp>

#include "actguard/error.hpp"
#include "actguard/json_io.hpp"
#include "actguard/parser.hpp"

namespace actguard {

using json = nlohmann::json;

std::optional<TaskLevel> task_level_from_string(std::string_view s) {
  if (s == "high") return TaskLevel::High;
  if (s == "low") return TaskLevel::Low;
  return std::nullopt;
}

std::string gt_history_entry(const Action& gt, int k) {
  ParsedOutput p;
  p.action = gt;
  return render_history_entry(p, k);
}

void validate(const OfflineEpisode& ep) {
  if (ep.episode_id.empty()) throw Error(ErrorCode::InvalidArgument, "episode_id is empty");
  for (std::size_t i = 0; i < ep.steps.size(); ++i) {
    const auto& s = ep.steps[i];
    const std::string where = "episode " + ep.episode_id + " step " + std::to_string(i + 1);
    validate(s.context);
    validate(s.truth);
    if (ep.task_level == TaskLevel::Low && !s.context.step_plan) {
      throw Error(ErrorCode::InvalidArgument, where + ": low-level step without step_plan");
    }
    if (s.context.history.size() != i) {
      throw Error(ErrorCode::InvalidArgument, where + ": history must list the " + std::to_string(i) + " earlier steps");
    }
    for (std::size_t k = 0; k < i; ++k) {
      if (s.context.history[k] != gt_history_entry(ep.steps[k].truth.action, static_cast<int>(k + 1))) {
        throw Error(ErrorCode::InvalidArgument, where + ": history entry " + std::to_string(k + 1) +
                                                    " does not match the recorded step");
      }
    }
  }
}

std::string episode_to_json_line(const OfflineEpisode& ep) {
  json steps = json::array();
  for (const auto& s : ep.steps) {
    json js;
    write_context_fields(js, s.context);
    js["truth"] = to_json(s.truth);
    steps.push_back(std::move(js));
  }
  json j = {{"episode_id", ep.episode_id},
            {"source_dataset", ep.source_dataset},
            {"task_level", std::string(to_string(ep.task_level))},
            {"steps", std::move(steps)}};
  return dump_line(j);
}

std::vector<OfflineEpisode> parse_episodes(const std::string& content) {
  std::vector<OfflineEpisode> out;
  std::size_t line_no = 0;
  std::size_t start = 0;
  while (start < content.size()) {
    std::size_t end = content.find('\n', start);
    if (end == std::string::npos) end = content.size();
    const std::string line = content.substr(start, end - start);
    start = end + 1;
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      const json j = json::parse(line);
      OfflineEpisode ep;
      ep.episode_id = j.at("episode_id").get<std::string>();
      ep.source_dataset = j.value("source_dataset", "");
      const auto level = task_level_from_string(j.value("task_level", "high"));
      if (!level) throw std::invalid_argument("task_level must be 'high' or 'low'");
      ep.task_level = *level;
      for (const auto& js : j.at("steps")) {
        EpisodeStep s;
        s.context = read_context_fields(js);
        s.truth = ground_truth_from_json(js.at("truth"));
        ep.steps.push_back(std::move(s));
      }
      validate(ep);
      out.push_back(std::move(ep));
    } catch (const SchemaViolation&) {
      throw;
    } catch (const std::exception& e) {
      throw SchemaViolation(line_no, e.what());
    }
  }
  return out;
}

std::vector<OfflineEpisode> load_episodes(const std::string& path) { return parse_episodes(read_file(path)); }

void save_episodes(const std::string& path, std::span<const OfflineEpisode> episodes) {
  std::string content;
  for (const auto& ep : episodes) content += episode_to_json_line(ep);
  write_file_atomic(path, content);
}

}  // namespace actguard
