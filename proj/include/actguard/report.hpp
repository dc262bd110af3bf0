#pragma once

#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "actguard/oracle.hpp"
#include "actguard/rollout.hpp"

namespace actguard {

struct PassAtNRow {
  int n = 0;
  double pass_at_n = 0.0;
  double guided_sr_at_n = 0.0;  // selection re-run on the first n candidates
  bool operator==(const PassAtNRow&) const = default;
};

/// Rows for N in {1, 2, 4, 8} up to the number of candidates per step.
/// Throws Error{MissingFlags} when a trace lacks pass@N flags.
std::vector<PassAtNRow> emit_pass_at_n(std::span<const StepResult> traces);

/// Type / GR / SR recomputed from the step judgments of a trace.
MetricsReport metrics_from_traces(std::span<const StepResult> traces);

struct ConfigReport {
  std::string name;
  MetricsReport metrics;
  std::vector<PassAtNRow> pass_series;
  bool operator==(const ConfigReport&) const = default;
};

struct MetricDelta {
  std::string name;
  double type_acc = 0.0;
  std::optional<double> gr_acc;
  double sr = 0.0;
  bool operator==(const MetricDelta&) const = default;
};

/// Base run, guided runs, and guided - base deltas per metric.
struct ComparisonReport {
  ConfigReport base;
  std::vector<ConfigReport> guided;
  std::vector<MetricDelta> deltas;
  bool operator==(const ComparisonReport&) const = default;
};

ConfigReport config_report(std::string name, std::span<const StepResult> traces);
ComparisonReport compare(ConfigReport base, std::vector<ConfigReport> guided);

std::string comparison_to_json(const ComparisonReport& r);
std::string comparison_table_csv(const ComparisonReport& r);
std::string pass_at_n_csv(const ComparisonReport& r);

}  // namespace actguard
