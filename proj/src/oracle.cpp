#include "actguard/oracle.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>

#include "actguard/error.hpp"

namespace actguard {
namespace {

// Type classes under which different verbs count as the same action type.
ActionType type_class(const Action& a) {
  switch (a.kind) {
    case ActionType::SystemButton:
      if (a.text == "Back") return ActionType::PressBack;
      if (a.text == "Home") return ActionType::PressHome;
      return ActionType::SystemButton;
    case ActionType::Terminate:
      return ActionType::Finished;
    default:
      return a.kind;
  }
}

// A drag compared against a directional GT is read as a scroll.
std::optional<Direction> as_direction(const Action& a) {
  if (a.kind == ActionType::Scroll) return a.direction;
  if (a.kind == ActionType::Drag && a.point && a.point2) return dominant_direction(*a.point, *a.point2);
  return std::nullopt;
}

bool directional_pair(const Action& pred, const Action& gt) {
  const bool pred_dir = pred.kind == ActionType::Scroll || pred.kind == ActionType::Drag;
  const bool gt_dir = gt.kind == ActionType::Scroll || gt.kind == ActionType::Drag;
  return pred_dir && gt_dir;
}

bool text_equal(const std::optional<std::string>& a, const std::optional<std::string>& b, TextRule rule) {
  const std::string lhs = a.value_or("");
  const std::string rhs = b.value_or("");
  if (rule == TextRule::Exact) return lhs == rhs;
  return normalize_text(lhs) == normalize_text(rhs);
}

}  // namespace

void validate(const GroundTruth& gt) {
  validate(gt.action);
  if (gt.bbox) {
    const auto& b = *gt.bbox;
    if (!(b.x0 < b.x1 && b.y0 < b.y1)) throw Error(ErrorCode::InvalidArgument, "bbox must have x0<x1 and y0<y1");
    if (gt.screen.valid() && (b.x0 < 0 || b.y0 < 0 || b.x1 >= gt.screen.width || b.y1 >= gt.screen.height)) {
      throw Error(ErrorCode::InvalidArgument, "bbox lies outside the screen");
    }
  }
}

void validate(const MatchConfig& cfg) {
  if (!(cfg.radius_frac > 0.0 && cfg.radius_frac <= 1.0)) {
    throw Error(ErrorCode::InvalidArgument, "radius_frac must be in (0, 1]");
  }
}

std::optional<Direction> dominant_direction(Point from, Point to) {
  const long dx = static_cast<long>(to.x) - from.x;
  const long dy = static_cast<long>(to.y) - from.y;
  if (dx == 0 && dy == 0) return std::nullopt;
  if (std::labs(dy) >= std::labs(dx)) return dy < 0 ? Direction::Up : Direction::Down;
  return dx < 0 ? Direction::Left : Direction::Right;
}

std::string normalize_text(std::string_view s) {
  std::string out;
  bool pending_space = false;
  for (char c : s) {
    if (std::isspace(static_cast<unsigned char>(c))) {
      pending_space = !out.empty();
      continue;
    }
    if (pending_space) out += ' ';
    pending_space = false;
    out += static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  }
  return out;
}

bool match_type(const Action& pred, const GroundTruth& gt) {
  if (directional_pair(pred, gt.action) && pred.kind != gt.action.kind) {
    // Scroll vs Drag: equal type once the drag resolves to a direction.
    return as_direction(pred).has_value() && as_direction(gt.action).has_value();
  }
  return type_class(pred) == type_class(gt.action);
}

bool match_grounding(Point pred_point, const GroundTruth& gt, const MatchConfig& cfg) {
  validate(cfg);
  const bool use_bbox = gt.bbox && cfg.click_rule == ClickRule::BBoxMembership;
  if (use_bbox) return gt.bbox->contains(pred_point);
  std::optional<Point> target = gt.action.point;
  if (!target && gt.bbox) target = gt.bbox->center();
  if (!target) {
    throw Error(ErrorCode::MissingGroundTruthTarget, "ground truth has neither bbox nor point");
  }
  if (!gt.screen.valid()) throw Error(ErrorCode::InvalidArgument, "radius rule needs screen dimensions");
  const double dx = static_cast<double>(pred_point.x) - target->x;
  const double dy = static_cast<double>(pred_point.y) - target->y;
  const double radius = cfg.radius_frac * std::max(gt.screen.width, gt.screen.height);
  return std::hypot(dx, dy) <= radius;
}

StepJudgment match_step(const Action& pred, const GroundTruth& gt, const MatchConfig& cfg) {
  StepJudgment j;
  j.type_ok = match_type(pred, gt);
  if (is_grounding_kind(gt.action.kind)) {
    if (!gt.bbox && !gt.action.point) {
      throw Error(ErrorCode::MissingGroundTruthTarget, "grounding step without bbox or point");
    }
    j.ground_ok = pred.point ? match_grounding(*pred.point, gt, cfg) : false;
  }
  if (j.type_ok) {
    switch (gt.action.kind) {
      case ActionType::TypeText:
      case ActionType::OpenApp:
      case ActionType::KeyEvent: {
        const auto& expected = gt.text_norm ? gt.text_norm : gt.action.text;
        j.args_ok = text_equal(pred.text, expected, cfg.text_rule);
        break;
      }
      case ActionType::SystemButton:
        j.args_ok = type_class(gt.action) != ActionType::SystemButton ||
                    text_equal(pred.text, gt.action.text, TextRule::Normalized);
        break;
      case ActionType::Scroll:
      case ActionType::Drag:
        j.args_ok = as_direction(pred) == as_direction(gt.action);
        break;
      default:
        // Grounding kinds are judged by ground_ok; the rest carry nothing to compare.
        j.args_ok = true;
    }
  }
  j.step_ok = j.type_ok && j.args_ok && (!j.ground_ok || *j.ground_ok);
  return j;
}

StepJudgment failed_step(const GroundTruth& gt) {
  StepJudgment j;
  if (is_grounding_kind(gt.action.kind)) j.ground_ok = false;
  return j;
}

MetricsReport aggregate(std::span<const StepJudgment> judgments) {
  if (judgments.empty()) throw Error(ErrorCode::EmptyInput, "aggregate needs at least one judgment");
  std::size_t type_ok = 0, ground_total = 0, ground_ok = 0, step_ok = 0;
  for (const auto& j : judgments) {
    type_ok += j.type_ok;
    step_ok += j.step_ok;
    if (j.ground_ok) {
      ++ground_total;
      ground_ok += *j.ground_ok;
    }
  }
  const double n = static_cast<double>(judgments.size());
  MetricsReport r;
  r.n_steps = judgments.size();
  r.n_grounding_steps = ground_total;
  r.type_acc = 100.0 * static_cast<double>(type_ok) / n;
  r.sr = 100.0 * static_cast<double>(step_ok) / n;
  if (ground_total > 0) r.gr_acc = 100.0 * static_cast<double>(ground_ok) / static_cast<double>(ground_total);
  return r;
}

}  // namespace actguard
