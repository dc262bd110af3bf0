#include "actguard/flywheel.hpp"

#include <algorithm>
#include <map>
#include <numeric>
#include <set>
#include <sstream>
#include <stdexcept>

#include <nlohmann/json.hpp>

#include "actguard/digest.hpp"
#include "actguard/error.hpp"
#include "actguard/json_io.hpp"
#include "actguard/rng.hpp"

namespace actguard {

using json = nlohmann::json;

std::string compute_record_id(const StepContext& ctx, const Action& action) {
  FieldHasher h;
  h.add(ctx.screenshot.sha256).add(ctx.global_instruction);
  h.add(std::to_string(ctx.history.size()));
  for (const auto& entry : ctx.history) h.add(entry);
  h.add(canonical_serialize(action));
  return h.hex();
}

DatasetManifest build_manifest(std::span<const FlywheelRecord> records) {
  std::map<std::pair<std::string, int>, ManifestEntry> groups;
  std::vector<std::string> ids;
  ids.reserve(records.size());
  DatasetManifest m;
  for (const auto& r : records) {
    auto& e = groups[{r.source_dataset, r.round}];
    e.source_dataset = r.source_dataset;
    e.round = r.round;
    if (r.label == Label::Correct) {
      ++e.positives;
      ++m.positives;
    } else {
      ++e.negatives;
      ++m.negatives;
    }
    ids.push_back(r.record_id);
  }
  for (auto& [key, e] : groups) m.entries.push_back(std::move(e));
  m.total = records.size();
  std::sort(ids.begin(), ids.end());
  FieldHasher h;
  for (const auto& id : ids) h.add(id);
  m.checksum = h.hex();
  return m;
}

DatasetManifest merge_manifests(const DatasetManifest& a, const DatasetManifest& b) {
  std::map<std::pair<std::string, int>, ManifestEntry> groups;
  for (const auto* m : {&a, &b}) {
    for (const auto& e : m->entries) {
      auto& g = groups[{e.source_dataset, e.round}];
      g.source_dataset = e.source_dataset;
      g.round = e.round;
      g.positives += e.positives;
      g.negatives += e.negatives;
    }
  }
  DatasetManifest out;
  for (auto& [key, e] : groups) out.entries.push_back(std::move(e));
  out.positives = a.positives + b.positives;
  out.negatives = a.negatives + b.negatives;
  out.total = a.total + b.total;
  return out;
}

Dataset make_dataset(std::vector<FlywheelRecord> records) {
  Dataset d;
  d.records = std::move(records);
  d.manifest = build_manifest(d.records);
  return d;
}

LabelingResult label_rollouts(std::span<const LabelingStep> steps, const MatchConfig& oracle_cfg,
                              const LabelingOptions& opts) {
  if (opts.round < 1) throw Error(ErrorCode::InvalidArgument, "round must be >= 1");
  if (opts.round >= 2 && !opts.guided_by) {
    throw Error(ErrorCode::InvalidArgument, "records from round 2 on need a guiding critic id");
  }
  LabelingResult out;
  out.records.reserve(steps.size());
  for (std::size_t i = 0; i < steps.size(); ++i) {
    const auto& step = steps[i];
    try {
      const StepJudgment j = match_step(step.action, step.truth, oracle_cfg);
      FlywheelRecord r;
      r.context = step.context;
      r.action = step.action;
      r.actor_set_text = actor_set(step.action);
      r.label = j.step_ok ? Label::Correct : Label::Wrong;
      r.source_agent = opts.source_agent;
      r.round = opts.round;
      r.source_dataset = opts.source_dataset;
      r.guided_by = opts.guided_by;
      r.record_id = compute_record_id(step.context, step.action);
      out.records.push_back(std::move(r));
    } catch (const Error& e) {
      out.rejects.push_back({i, e.what()});
    }
  }
  return out;
}

std::vector<FlywheelRecord> balance(std::span<const FlywheelRecord> records, std::uint64_t seed) {
  std::vector<std::size_t> order(records.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return records[a].record_id < records[b].record_id;
  });
  std::vector<std::size_t> pos, neg;
  for (auto i : order) (records[i].label == Label::Correct ? pos : neg).push_back(i);
  if (pos.empty() || neg.empty()) {
    throw Error(ErrorCode::OneClassOnly, "balance needs both correct and wrong records (have " +
                                             std::to_string(pos.size()) + " correct, " +
                                             std::to_string(neg.size()) + " wrong)");
  }
  auto& majority = pos.size() >= neg.size() ? pos : neg;
  const std::size_t keep = std::min(pos.size(), neg.size());
  // Partial Fisher-Yates: the first `keep` slots become a uniform sample.
  Rng rng(seed);
  for (std::size_t i = 0; i < keep; ++i) {
    const auto j = static_cast<std::size_t>(rng.uniform_int(static_cast<std::int64_t>(i),
                                                            static_cast<std::int64_t>(majority.size() - 1)));
    std::swap(majority[i], majority[j]);
  }
  majority.resize(keep);

  std::vector<std::size_t> chosen;
  chosen.reserve(2 * keep);
  chosen.insert(chosen.end(), pos.begin(), pos.end());
  chosen.insert(chosen.end(), neg.begin(), neg.end());
  std::stable_sort(chosen.begin(), chosen.end(), [&](std::size_t a, std::size_t b) {
    if (records[a].record_id != records[b].record_id) return records[a].record_id < records[b].record_id;
    return a < b;
  });
  std::vector<FlywheelRecord> out;
  out.reserve(chosen.size());
  for (auto i : chosen) out.push_back(records[i]);
  return out;
}

Dataset merge_rounds(const Dataset& base, std::span<const FlywheelRecord> delta, const MergeOptions& opts) {
  std::size_t pos = 0, neg = 0;
  for (const auto& r : delta) {
    if (r.round < 2) {
      throw Error(ErrorCode::RoundMismatch, "delta record " + r.record_id + " has round " + std::to_string(r.round));
    }
    if (!r.guided_by) throw Error(ErrorCode::InvalidArgument, "delta record " + r.record_id + " lacks guided_by");
    (r.label == Label::Correct ? pos : neg)++;
  }
  if (opts.require_balanced_delta && pos != neg) {
    throw Error(ErrorCode::UnbalancedDelta, "delta has " + std::to_string(pos) + " correct and " +
                                                std::to_string(neg) + " wrong records");
  }
  std::set<std::string> seen;
  for (const auto& r : base.records) seen.insert(r.record_id);
  std::vector<FlywheelRecord> merged = base.records;
  for (const auto& r : delta) {
    if (seen.insert(r.record_id).second) merged.push_back(r);
  }
  return make_dataset(std::move(merged));
}

namespace {

json record_to_json(const FlywheelRecord& r) {
  json j;
  j["record_id"] = r.record_id;
  j["source_dataset"] = r.source_dataset;
  j["round"] = r.round;
  j["source_agent"] = r.source_agent;
  if (r.guided_by) j["guided_by"] = *r.guided_by;
  j["label"] = to_string(r.label);
  write_context_fields(j, r.context);
  j["action_canonical"] = canonical_serialize(r.action);
  j["actor_set"] = r.actor_set_text;
  return j;
}

FlywheelRecord record_from_json(const json& j) {
  if (!j.is_object()) throw std::invalid_argument("line is not a JSON object");
  auto str = [&](const char* key) {
    auto it = j.find(key);
    if (it == j.end()) throw std::invalid_argument(std::string("missing field '") + key + "'");
    if (!it->is_string()) throw std::invalid_argument(std::string("field '") + key + "' must be a string");
    return it->get<std::string>();
  };
  FlywheelRecord r;
  r.record_id = str("record_id");
  r.source_dataset = str("source_dataset");
  r.source_agent = str("source_agent");
  auto round = j.find("round");
  if (round == j.end() || !round->is_number_integer()) throw std::invalid_argument("field 'round' must be an integer");
  r.round = round->get<int>();
  if (r.round < 1) throw std::invalid_argument("field 'round' must be >= 1");
  if (auto it = j.find("guided_by"); it != j.end() && !it->is_null()) {
    if (!it->is_string()) throw std::invalid_argument("field 'guided_by' must be a string");
    r.guided_by = it->get<std::string>();
  }
  if (r.round >= 2 && !r.guided_by) throw std::invalid_argument("round >= 2 record without 'guided_by'");
  const auto label = label_from_string(str("label"));
  if (!label) throw std::invalid_argument("field 'label' must be \"correct\" or \"wrong\"");
  r.label = *label;
  r.context = read_context_fields(j);
  try {
    r.action = canonical_parse(str("action_canonical"));
  } catch (const Error& e) {
    throw std::invalid_argument(std::string("field 'action_canonical': ") + e.what());
  }
  r.actor_set_text = str("actor_set");
  if (compute_record_id(r.context, r.action) != r.record_id) {
    throw std::invalid_argument("record_id does not match its content");
  }
  return r;
}

}  // namespace

std::string to_jsonl_line(const FlywheelRecord& r) { return dump_line(record_to_json(r)); }

void export_jsonl(const std::string& path, std::span<const FlywheelRecord> records) {
  std::string content;
  for (const auto& r : records) content += to_jsonl_line(r);
  write_file_atomic(path, content);
}

std::vector<FlywheelRecord> parse_jsonl(const std::string& content) {
  std::vector<FlywheelRecord> out;
  std::istringstream in(content);
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    json j = json::parse(line, nullptr, false);
    if (j.is_discarded()) throw SchemaViolation(line_no, "invalid JSON");
    try {
      out.push_back(record_from_json(j));
    } catch (const std::exception& e) {
      throw SchemaViolation(line_no, e.what());
    }
  }
  return out;
}

std::vector<FlywheelRecord> import_jsonl(const std::string& path) { return parse_jsonl(read_file(path)); }

std::string manifest_to_json(const DatasetManifest& m) {
  json j;
  j["entries"] = json::array();
  for (const auto& e : m.entries) {
    j["entries"].push_back({{"source_dataset", e.source_dataset},
                            {"round", e.round},
                            {"positives", e.positives},
                            {"negatives", e.negatives},
                            {"total", e.positives + e.negatives}});
  }
  j["positives"] = m.positives;
  j["negatives"] = m.negatives;
  j["total"] = m.total;
  j["checksum"] = m.checksum;
  return j.dump(2) + "\n";
}

DatasetManifest manifest_from_json(const std::string& text) {
  const json j = json::parse(text, nullptr, false);
  if (j.is_discarded() || !j.is_object()) throw SchemaViolation(1, "manifest is not a JSON object");
  DatasetManifest m;
  try {
    for (const auto& e : j.at("entries")) {
      m.entries.push_back({e.at("source_dataset").get<std::string>(), e.at("round").get<int>(),
                           e.at("positives").get<std::size_t>(), e.at("negatives").get<std::size_t>()});
    }
    m.positives = j.at("positives").get<std::size_t>();
    m.negatives = j.at("negatives").get<std::size_t>();
    m.total = j.at("total").get<std::size_t>();
    m.checksum = j.at("checksum").get<std::string>();
  } catch (const json::exception& e) {
    throw SchemaViolation(1, e.what());
  }
  return m;
}

}  // namespace actguard
