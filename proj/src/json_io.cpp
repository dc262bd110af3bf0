#include "actguard/json_io.hpp"

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <stdexcept>

#include "actguard/error.hpp"

namespace actguard {

using json = nlohmann::json;

namespace {

const json& field(const json& j, const char* key) {
  auto it = j.find(key);
  if (it == j.end()) throw std::invalid_argument(std::string("missing field '") + key + "'");
  return *it;
}

template <typename T>
T get_as(const json& j, const char* key) {
  const json& v = field(j, key);
  try {
    return v.get<T>();
  } catch (const json::exception&) {
    throw std::invalid_argument(std::string("field '") + key + "' has the wrong type");
  }
}

}  // namespace

void write_context_fields(json& j, const StepContext& ctx) {
  j["screenshot_path"] = ctx.screenshot.path;
  j["screenshot_sha256"] = ctx.screenshot.sha256;
  j["screen_w"] = ctx.screenshot.dims.width;
  j["screen_h"] = ctx.screenshot.dims.height;
  j["global_instruction"] = ctx.global_instruction;
  if (ctx.step_plan) j["step_plan"] = *ctx.step_plan;
  j["history"] = ctx.history;
}

StepContext read_context_fields(const json& j) {
  StepContext ctx;
  ctx.screenshot.path = get_as<std::string>(j, "screenshot_path");
  ctx.screenshot.sha256 = get_as<std::string>(j, "screenshot_sha256");
  ctx.screenshot.dims.width = get_as<int>(j, "screen_w");
  ctx.screenshot.dims.height = get_as<int>(j, "screen_h");
  ctx.global_instruction = get_as<std::string>(j, "global_instruction");
  if (auto it = j.find("step_plan"); it != j.end() && !it->is_null()) {
    if (!it->is_string()) throw std::invalid_argument("field 'step_plan' has the wrong type");
    ctx.step_plan = it->get<std::string>();
  }
  ctx.history = get_as<std::vector<std::string>>(j, "history");
  if (ctx.global_instruction.empty()) throw std::invalid_argument("field 'global_instruction' is empty");
  if (!ctx.screenshot.dims.valid()) throw std::invalid_argument("screen dimensions must be positive");
  return ctx;
}

json to_json(const GroundTruth& gt) {
  json j;
  j["action"] = canonical_serialize(gt.action);
  if (gt.bbox) j["bbox"] = {gt.bbox->x0, gt.bbox->y0, gt.bbox->x1, gt.bbox->y1};
  if (gt.text_norm) j["text_norm"] = *gt.text_norm;
  j["screen_w"] = gt.screen.width;
  j["screen_h"] = gt.screen.height;
  return j;
}

GroundTruth ground_truth_from_json(const json& j) {
  GroundTruth gt;
  try {
    gt.action = canonical_parse(get_as<std::string>(j, "action"));
  } catch (const Error& e) {
    throw std::invalid_argument(std::string("field 'action': ") + e.what());
  }
  if (auto it = j.find("bbox"); it != j.end() && !it->is_null()) {
    const auto v = get_as<std::vector<int>>(j, "bbox");
    if (v.size() != 4) throw std::invalid_argument("field 'bbox' must have four entries");
    gt.bbox = BBox{v[0], v[1], v[2], v[3]};
  }
  if (auto it = j.find("text_norm"); it != j.end() && !it->is_null()) gt.text_norm = it->get<std::string>();
  gt.screen.width = get_as<int>(j, "screen_w");
  gt.screen.height = get_as<int>(j, "screen_h");
  return gt;
}

json to_json(const StepJudgment& s) {
  json j;
  j["type_ok"] = s.type_ok;
  j["ground_ok"] = s.ground_ok ? json(*s.ground_ok) : json(nullptr);
  j["args_ok"] = s.args_ok;
  j["step_ok"] = s.step_ok;
  return j;
}

StepJudgment step_judgment_from_json(const json& j) {
  StepJudgment s;
  s.type_ok = get_as<bool>(j, "type_ok");
  if (auto it = j.find("ground_ok"); it != j.end() && !it->is_null()) s.ground_ok = it->get<bool>();
  s.args_ok = get_as<bool>(j, "args_ok");
  s.step_ok = get_as<bool>(j, "step_ok");
  return s;
}

json to_json(const MetricsReport& r) {
  json j;
  j["type_acc"] = r.type_acc;
  j["gr_acc"] = r.gr_acc ? json(*r.gr_acc) : json(nullptr);
  j["sr"] = r.sr;
  j["n_steps"] = r.n_steps;
  j["n_grounding_steps"] = r.n_grounding_steps;
  json pass = json::object();
  for (const auto& [n, v] : r.pass_at_n) pass[std::to_string(n)] = v;
  j["pass_at_n"] = pass;
  return j;
}

MetricsReport metrics_from_json(const json& j) {
  MetricsReport r;
  r.type_acc = get_as<double>(j, "type_acc");
  if (auto it = j.find("gr_acc"); it != j.end() && !it->is_null()) r.gr_acc = it->get<double>();
  r.sr = get_as<double>(j, "sr");
  r.n_steps = get_as<std::size_t>(j, "n_steps");
  r.n_grounding_steps = get_as<std::size_t>(j, "n_grounding_steps");
  if (auto it = j.find("pass_at_n"); it != j.end() && it->is_object()) {
    for (const auto& [k, v] : it->items()) r.pass_at_n[std::stoi(k)] = v.get<double>();
  }
  return r;
}

json to_json(const MatchConfig& cfg) {
  json j;
  j["click_rule"] = cfg.click_rule == ClickRule::BBoxMembership ? "bbox_membership" : "radius_fraction";
  j["radius_frac"] = cfg.radius_frac;
  j["text_rule"] = cfg.text_rule == TextRule::Exact ? "exact" : "normalized";
  return j;
}

MatchConfig match_config_from_json(const json& j) {
  MatchConfig cfg;
  if (auto it = j.find("click_rule"); it != j.end()) {
    const auto s = it->get<std::string>();
    if (s == "bbox_membership") cfg.click_rule = ClickRule::BBoxMembership;
    else if (s == "radius_fraction") cfg.click_rule = ClickRule::RadiusFraction;
    else throw std::invalid_argument("unknown click_rule '" + s + "'");
  }
  if (auto it = j.find("radius_frac"); it != j.end()) cfg.radius_frac = it->get<double>();
  if (auto it = j.find("text_rule"); it != j.end()) {
    const auto s = it->get<std::string>();
    if (s == "exact") cfg.text_rule = TextRule::Exact;
    else if (s == "normalized") cfg.text_rule = TextRule::Normalized;
    else throw std::invalid_argument("unknown text_rule '" + s + "'");
  }
  validate(cfg);
  return cfg;
}

void write_file_atomic(const std::string& path, const std::string& content) {
  namespace fs = std::filesystem;
  const fs::path target(path);
  if (target.has_parent_path()) fs::create_directories(target.parent_path());
  const fs::path tmp = target.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error(ErrorCode::IoError, "cannot write " + tmp.string());
    out.write(content.data(), static_cast<std::streamsize>(content.size()));
    if (!out) throw Error(ErrorCode::IoError, "short write to " + tmp.string());
  }
  std::error_code ec;
  fs::rename(tmp, target, ec);
  if (ec) throw Error(ErrorCode::IoError, "cannot rename to " + path + ": " + ec.message());
}

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::IoError, "cannot open " + path);
  return std::string((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
}

std::string dump_line(const json& j) { return j.dump(-1, ' ', false, json::error_handler_t::replace) + "\n"; }

}  // namespace actguard
