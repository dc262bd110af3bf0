#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "actguard/action.hpp"
#include "actguard/oracle.hpp"

namespace actguard {

/// One labeled sample of the critic dataset. The ground truth is not kept;
/// only the label derived from it at labeling time.
struct FlywheelRecord {
  StepContext context;
  Action action;
  std::string actor_set_text;
  Label label = Label::Wrong;
  std::string source_agent;
  int round = 1;
  std::string source_dataset;
  std::optional<std::string> guided_by;  // critic id; required from round 2 on
  std::string record_id;

  bool operator==(const FlywheelRecord&) const = default;
};

/// Digest over (screenshot digest, instruction, history, canonical action).
std::string compute_record_id(const StepContext& ctx, const Action& action);

struct ManifestEntry {
  std::string source_dataset;
  int round = 1;
  std::size_t positives = 0;
  std::size_t negatives = 0;
  bool operator==(const ManifestEntry&) const = default;
};

struct DatasetManifest {
  std::vector<ManifestEntry> entries;  // sorted by (source_dataset, round)
  std::size_t positives = 0;
  std::size_t negatives = 0;
  std::size_t total = 0;
  std::string checksum;  // over sorted record ids; empty when counts were merged arithmetically
  bool operator==(const DatasetManifest&) const = default;
};

DatasetManifest build_manifest(std::span<const FlywheelRecord> records);

/// Count-only merge of two manifests (no record ids available, so no dedup).
DatasetManifest merge_manifests(const DatasetManifest& a, const DatasetManifest& b);

struct Dataset {
  std::vector<FlywheelRecord> records;
  DatasetManifest manifest;
};

Dataset make_dataset(std::vector<FlywheelRecord> records);

struct LabelingStep {
  StepContext context;
  Action action;  // canonical
  GroundTruth truth;
};

struct LabelingReject {
  std::size_t index;
  std::string reason;
};

struct LabelingResult {
  std::vector<FlywheelRecord> records;
  std::vector<LabelingReject> rejects;
};

struct LabelingOptions {
  std::string source_agent;
  int round = 1;
  std::string source_dataset;
  std::optional<std::string> guided_by;
};

/// One record per step, labeled by the oracle; oracle errors go to `rejects`.
LabelingResult label_rollouts(std::span<const LabelingStep> steps, const MatchConfig& oracle_cfg,
                              const LabelingOptions& opts);

/// Downsamples the majority class to the minority size. Output is sorted by
/// record_id. Throws Error{OneClassOnly}.
std::vector<FlywheelRecord> balance(std::span<const FlywheelRecord> records, std::uint64_t seed);

struct MergeOptions {
  bool require_balanced_delta = true;
};

/// D+ = D ∪ delta with record_id dedup (existing records win). Throws
/// Error{RoundMismatch} for round-1 delta records and Error{UnbalancedDelta}
/// when the delta is not class-balanced and the option requires it.
Dataset merge_rounds(const Dataset& base, std::span<const FlywheelRecord> delta, const MergeOptions& opts = {});

std::string to_jsonl_line(const FlywheelRecord& r);
void export_jsonl(const std::string& path, std::span<const FlywheelRecord> records);
// Throws SchemaViolation{line_no, reason}.
std::vector<FlywheelRecord> import_jsonl(const std::string& path);
std::vector<FlywheelRecord> parse_jsonl(const std::string& content);

std::string manifest_to_json(const DatasetManifest& m);
DatasetManifest manifest_from_json(const std::string& text);

}  // namespace actguard
