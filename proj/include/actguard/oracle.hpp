#pragma once

#include <map>
#include <optional>
#include <span>
#include <string>

#include "actguard/action.hpp"

namespace actguard {

struct BBox {
  int x0 = 0, y0 = 0, x1 = 0, y1 = 0;
  bool operator==(const BBox&) const = default;
  bool contains(Point p) const { return x0 <= p.x && p.x <= x1 && y0 <= p.y && p.y <= y1; }
  Point center() const { return {(x0 + x1) / 2, (y0 + y1) / 2}; }
};

struct GroundTruth {
  Action action;  // canonical
  std::optional<BBox> bbox;
  std::optional<std::string> text_norm;
  ScreenDims screen;
  bool operator==(const GroundTruth&) const = default;
};

// Throws Error{InvalidArgument} on a degenerate or off-screen bbox.
void validate(const GroundTruth& gt);

enum class ClickRule { BBoxMembership, RadiusFraction };
enum class TextRule { Exact, Normalized };

struct MatchConfig {
  ClickRule click_rule = ClickRule::BBoxMembership;
  double radius_frac = 0.14;
  TextRule text_rule = TextRule::Normalized;
  bool operator==(const MatchConfig&) const = default;
};

void validate(const MatchConfig& cfg);

struct StepJudgment {
  bool type_ok = false;
  std::optional<bool> ground_ok;  // present only for grounding-bearing GT kinds
  bool args_ok = false;
  bool step_ok = false;
  bool operator==(const StepJudgment&) const = default;
};

struct MetricsReport {
  double type_acc = 0.0;
  std::optional<double> gr_acc;
  double sr = 0.0;
  std::size_t n_steps = 0;
  std::size_t n_grounding_steps = 0;
  std::map<int, double> pass_at_n;
  bool operator==(const MetricsReport&) const = default;
};

/// Direction of a drag by its dominant axis; ties go to the vertical axis.
/// Empty for a zero-length drag.
std::optional<Direction> dominant_direction(Point from, Point to);

/// Lowercase, trim, collapse internal whitespace runs to one space.
std::string normalize_text(std::string_view s);

bool match_type(const Action& pred, const GroundTruth& gt);
// Throws Error{MissingGroundTruthTarget} when gt has neither bbox nor point.
bool match_grounding(Point pred_point, const GroundTruth& gt, const MatchConfig& cfg);
StepJudgment match_step(const Action& pred, const GroundTruth& gt, const MatchConfig& cfg);

/// Judgment for a step with no usable prediction (parse failure, dead backend).
StepJudgment failed_step(const GroundTruth& gt);

// Throws Error{EmptyInput}.
MetricsReport aggregate(std::span<const StepJudgment> judgments);

}  // namespace actguard
