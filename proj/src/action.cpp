#include "actguard/action.hpp"

#include <algorithm>
#include <array>
#include <charconv>
#include <cmath>
#include <cstdint>

#include "actguard/error.hpp"

namespace actguard {

std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::InvalidArgument: return "InvalidArgument";
    case ErrorCode::UnknownDialect: return "UnknownDialect";
    case ErrorCode::MalformedCanonical: return "MalformedCanonical";
    case ErrorCode::ParseError: return "ParseError";
    case ErrorCode::MissingGroundTruthTarget: return "MissingGroundTruthTarget";
    case ErrorCode::EmptyInput: return "EmptyInput";
    case ErrorCode::OneClassOnly: return "OneClassOnly";
    case ErrorCode::RoundMismatch: return "RoundMismatch";
    case ErrorCode::UnbalancedDelta: return "UnbalancedDelta";
    case ErrorCode::SchemaViolation: return "SchemaViolation";
    case ErrorCode::BackendUnavailable: return "BackendUnavailable";
    case ErrorCode::ProtocolError: return "ProtocolError";
    case ErrorCode::EmptyCandidates: return "EmptyCandidates";
    case ErrorCode::DegenerateData: return "DegenerateData";
    case ErrorCode::NonFinite: return "NonFinite";
    case ErrorCode::FeatureSpecMismatch: return "FeatureSpecMismatch";
    case ErrorCode::MissingStepPlan: return "MissingStepPlan";
    case ErrorCode::ImageDecodeError: return "ImageDecodeError";
    case ErrorCode::MissingFlags: return "MissingFlags";
    case ErrorCode::ConfigError: return "ConfigError";
    case ErrorCode::IoError: return "IoError";
  }
  return "Unknown";
}

namespace {

struct VerbEntry {
  ActionType kind;
  std::string_view verb;
};

constexpr std::array<VerbEntry, kActionTypeCount> kVerbs{{
    {ActionType::Click, "click"},
    {ActionType::LongPress, "long_press"},
    {ActionType::TypeText, "type"},
    {ActionType::Scroll, "scroll"},
    {ActionType::Drag, "drag"},
    {ActionType::OpenApp, "open_app"},
    {ActionType::PressHome, "press_home"},
    {ActionType::PressBack, "press_back"},
    {ActionType::Wait, "wait"},
    {ActionType::Finished, "finished"},
    {ActionType::KeyEvent, "key"},
    {ActionType::SystemButton, "system_button"},
    {ActionType::Terminate, "terminate"},
}};

constexpr std::string_view kOobSuffix = "!oob";

std::string_view verb_of(ActionType kind) {
  for (const auto& e : kVerbs) {
    if (e.kind == kind) return e.verb;
  }
  return "?";
}

std::optional<ActionType> kind_of_verb(std::string_view verb) {
  for (const auto& e : kVerbs) {
    if (e.verb == verb) return e.kind;
  }
  return std::nullopt;
}

[[noreturn]] void invalid(const Action& a, std::string_view what) {
  throw Error(ErrorCode::InvalidArgument,
              std::string(to_string(a.kind)) + ": " + std::string(what));
}

std::string format_double(double v) {
  std::array<char, 64> buf{};
  auto [end, ec] = std::to_chars(buf.data(), buf.data() + buf.size(), v);
  return std::string(buf.data(), end);
}

std::string quote(std::string_view s) {
  std::string out = "\"";
  for (char c : s) {
    switch (c) {
      case '"': out += "\\\""; break;
      case '\\': out += "\\\\"; break;
      case '\n': out += "\\n"; break;
      case '\t': out += "\\t"; break;
      case '\r': out += "\\r"; break;
      default: out += c;
    }
  }
  out += '"';
  return out;
}

std::string point_args(Point p) { return std::to_string(p.x) + "," + std::to_string(p.y); }

}  // namespace

std::string_view to_string(ActionType kind) {
  switch (kind) {
    case ActionType::Click: return "Click";
    case ActionType::LongPress: return "LongPress";
    case ActionType::TypeText: return "TypeText";
    case ActionType::Scroll: return "Scroll";
    case ActionType::Drag: return "Drag";
    case ActionType::OpenApp: return "OpenApp";
    case ActionType::PressHome: return "PressHome";
    case ActionType::PressBack: return "PressBack";
    case ActionType::Wait: return "Wait";
    case ActionType::Finished: return "Finished";
    case ActionType::KeyEvent: return "KeyEvent";
    case ActionType::SystemButton: return "SystemButton";
    case ActionType::Terminate: return "Terminate";
  }
  return "?";
}

std::string_view to_string(Direction dir) {
  switch (dir) {
    case Direction::Up: return "up";
    case Direction::Down: return "down";
    case Direction::Left: return "left";
    case Direction::Right: return "right";
  }
  return "?";
}

std::string_view to_string(TerminalStatus status) {
  return status == TerminalStatus::Success ? "success" : "failure";
}

std::optional<Direction> direction_from_string(std::string_view s) {
  if (s == "up") return Direction::Up;
  if (s == "down") return Direction::Down;
  if (s == "left") return Direction::Left;
  if (s == "right") return Direction::Right;
  return std::nullopt;
}

std::optional<TerminalStatus> status_from_string(std::string_view s) {
  if (s == "success") return TerminalStatus::Success;
  if (s == "failure") return TerminalStatus::Failure;
  return std::nullopt;
}

Action Action::click(int x, int y) {
  Action a;
  a.kind = ActionType::Click;
  a.point = Point{x, y};
  return a;
}

Action Action::long_press(int x, int y, std::optional<double> seconds) {
  Action a;
  a.kind = ActionType::LongPress;
  a.point = Point{x, y};
  a.duration_s = seconds;
  return a;
}

Action Action::type_text(std::string text) {
  Action a;
  a.kind = ActionType::TypeText;
  a.text = std::move(text);
  return a;
}

Action Action::scroll(Direction dir, std::optional<Point> anchor) {
  Action a;
  a.kind = ActionType::Scroll;
  a.direction = dir;
  a.point = anchor;
  return a;
}

Action Action::drag(Point from, Point to) {
  Action a;
  a.kind = ActionType::Drag;
  a.point = from;
  a.point2 = to;
  return a;
}

Action Action::open_app(std::string name) {
  Action a;
  a.kind = ActionType::OpenApp;
  a.text = std::move(name);
  return a;
}

Action Action::press_home() {
  Action a;
  a.kind = ActionType::PressHome;
  return a;
}

Action Action::press_back() {
  Action a;
  a.kind = ActionType::PressBack;
  return a;
}

Action Action::wait(double seconds) {
  Action a;
  a.kind = ActionType::Wait;
  a.duration_s = seconds;
  return a;
}

Action Action::finished(std::optional<std::string> content) {
  Action a;
  a.kind = ActionType::Finished;
  a.text = std::move(content);
  return a;
}

Action Action::key_event(std::string key) {
  Action a;
  a.kind = ActionType::KeyEvent;
  a.text = std::move(key);
  return a;
}

Action Action::system_button(std::string button) {
  Action a;
  a.kind = ActionType::SystemButton;
  a.text = std::move(button);
  return a;
}

Action Action::terminate(TerminalStatus status) {
  Action a;
  a.kind = ActionType::Terminate;
  a.status = status;
  return a;
}

void validate(const Action& a) {
  enum Need { Forbidden, Optional, Required };
  struct Shape {
    Need point, point2, direction, text, duration, status;
  };
  Shape s{};
  switch (a.kind) {
    case ActionType::Click: s = {Required, Forbidden, Forbidden, Forbidden, Forbidden, Forbidden}; break;
    case ActionType::LongPress: s = {Required, Forbidden, Forbidden, Forbidden, Optional, Forbidden}; break;
    case ActionType::TypeText:
    case ActionType::OpenApp:
    case ActionType::KeyEvent:
    case ActionType::SystemButton:
      s = {Forbidden, Forbidden, Forbidden, Required, Forbidden, Forbidden};
      break;
    case ActionType::Scroll: s = {Optional, Forbidden, Required, Forbidden, Forbidden, Forbidden}; break;
    case ActionType::Drag: s = {Required, Required, Forbidden, Forbidden, Forbidden, Forbidden}; break;
    case ActionType::PressHome:
    case ActionType::PressBack:
      s = {Forbidden, Forbidden, Forbidden, Forbidden, Forbidden, Forbidden};
      break;
    case ActionType::Wait: s = {Forbidden, Forbidden, Forbidden, Forbidden, Required, Forbidden}; break;
    case ActionType::Finished: s = {Forbidden, Forbidden, Forbidden, Optional, Forbidden, Forbidden}; break;
    case ActionType::Terminate: s = {Forbidden, Forbidden, Forbidden, Forbidden, Forbidden, Required}; break;
  }
  auto check = [&](Need need, bool present, std::string_view name) {
    if (need == Required && !present) invalid(a, std::string("missing ") + std::string(name));
    if (need == Forbidden && present) invalid(a, std::string("unexpected ") + std::string(name));
  };
  check(s.point, a.point.has_value(), "point");
  check(s.point2, a.point2.has_value(), "point2");
  check(s.direction, a.direction.has_value(), "direction");
  check(s.text, a.text.has_value(), "text");
  check(s.duration, a.duration_s.has_value(), "duration");
  check(s.status, a.status.has_value(), "status");
  for (const auto& p : {a.point, a.point2}) {
    if (p && (p->x < 0 || p->y < 0)) invalid(a, "negative coordinate");
  }
  if (a.duration_s && (!std::isfinite(*a.duration_s) || *a.duration_s < 0.0)) {
    invalid(a, "duration must be finite and non-negative");
  }
}

bool is_valid(const Action& a) {
  try {
    validate(a);
    return true;
  } catch (const Error&) {
    return false;
  }
}

bool is_grounding_kind(ActionType kind) {
  return kind == ActionType::Click || kind == ActionType::LongPress;
}

void validate(const StepContext& ctx) {
  if (ctx.global_instruction.empty()) {
    throw Error(ErrorCode::InvalidArgument, "global_instruction must be non-empty");
  }
  if (!ctx.screenshot.dims.valid()) {
    throw Error(ErrorCode::InvalidArgument, "screenshot dimensions must be positive");
  }
}

std::string_view to_string(Label label) { return label == Label::Correct ? "correct" : "wrong"; }

std::optional<Label> label_from_string(std::string_view s) {
  if (s == "correct") return Label::Correct;
  if (s == "wrong") return Label::Wrong;
  return std::nullopt;
}

std::string_view to_string(DialectId id) {
  switch (id) {
    case DialectId::UiTarsV1: return "ui-tars-1.0";
    case DialectId::UiTarsV15: return "ui-tars-1.5";
    case DialectId::QwenToolCall: return "qwen-tool-call";
  }
  return "?";
}

std::optional<DialectId> dialect_from_string(std::string_view s) {
  for (auto id : {DialectId::UiTarsV1, DialectId::UiTarsV15, DialectId::QwenToolCall}) {
    if (to_string(id) == s) return id;
  }
  return std::nullopt;
}

DialectTable DialectTable::defaults() {
  DialectTable t;
  t.set({DialectId::UiTarsV1, 1000});
  t.set({DialectId::UiTarsV15, std::nullopt});
  t.set({DialectId::QwenToolCall, std::nullopt});
  return t;
}

void DialectTable::set(DialectConfig cfg) {
  if (cfg.coordinate_basis && *cfg.coordinate_basis <= 0) {
    throw Error(ErrorCode::InvalidArgument, "coordinate basis must be positive");
  }
  for (auto& e : entries_) {
    if (e.id == cfg.id) {
      e = cfg;
      return;
    }
  }
  entries_.push_back(cfg);
}

const DialectConfig& DialectTable::get(DialectId id) const {
  for (const auto& e : entries_) {
    if (e.id == id) return e;
  }
  throw Error(ErrorCode::UnknownDialect,
              "no coordinate configuration for dialect " + std::string(to_string(id)));
}

bool DialectTable::contains(DialectId id) const {
  return std::any_of(entries_.begin(), entries_.end(), [id](const auto& e) { return e.id == id; });
}

Action normalize(const Action& raw, const DialectConfig& dialect, ScreenDims dims) {
  if (!dims.valid()) throw Error(ErrorCode::InvalidArgument, "screen dimensions must be positive");
  Action out = raw;
  auto axis = [&](int v, int dim, bool& oob) {
    std::int64_t scaled = v;
    if (dialect.coordinate_basis) {
      const std::int64_t basis = *dialect.coordinate_basis;
      if (v > basis) oob = true;
      scaled = static_cast<std::int64_t>(v) * dim / basis;
    } else if (v >= dim) {
      oob = true;
    }
    if (v < 0) oob = true;
    return static_cast<int>(std::clamp<std::int64_t>(scaled, 0, dim - 1));
  };
  auto fix = [&](std::optional<Point>& p) {
    if (!p) return;
    bool oob = false;
    p->x = axis(p->x, dims.width, oob);
    p->y = axis(p->y, dims.height, oob);
    out.out_of_bounds = out.out_of_bounds || oob;
  };
  fix(out.point);
  fix(out.point2);
  return out;
}

Action normalize(const Action& raw, DialectId dialect, const DialectTable& table, ScreenDims dims) {
  return normalize(raw, table.get(dialect), dims);
}

std::string actor_set(const Action& a) {
  auto tap = [](Point p) { return "[" + std::to_string(p.x) + ", " + std::to_string(p.y) + "]"; };
  switch (a.kind) {
    case ActionType::Click:
    case ActionType::LongPress:
      return "Tap at " + tap(a.point.value_or(Point{}));
    case ActionType::Scroll:
      return "Swipe to " + std::string(to_string(a.direction.value_or(Direction::Up)));
    case ActionType::Drag:
      return "Drag from " + tap(a.point.value_or(Point{})) + " to " + tap(a.point2.value_or(Point{}));
    case ActionType::TypeText: return "Type [" + a.text.value_or("") + "]";
    case ActionType::OpenApp: return "Open [" + a.text.value_or("") + "]";
    case ActionType::KeyEvent: return "Key [" + a.text.value_or("") + "]";
    case ActionType::SystemButton: return a.text.value_or("Button");
    case ActionType::PressHome: return "Home";
    case ActionType::PressBack: return "Back";
    case ActionType::Wait: return "Wait";
    case ActionType::Finished: return "Finished";
    case ActionType::Terminate: return "Terminate";
  }
  return "";
}

std::string canonical_serialize(const Action& a) {
  std::string args;
  auto add = [&](const std::string& s) {
    if (!args.empty()) args += ',';
    args += s;
  };
  switch (a.kind) {
    case ActionType::Click:
      add(point_args(a.point.value_or(Point{})));
      break;
    case ActionType::LongPress:
      add(point_args(a.point.value_or(Point{})));
      if (a.duration_s) add(format_double(*a.duration_s));
      break;
    case ActionType::TypeText:
    case ActionType::OpenApp:
    case ActionType::KeyEvent:
    case ActionType::SystemButton:
      add(quote(a.text.value_or("")));
      break;
    case ActionType::Scroll:
      add(std::string(to_string(a.direction.value_or(Direction::Up))));
      if (a.point) add(point_args(*a.point));
      break;
    case ActionType::Drag:
      add(point_args(a.point.value_or(Point{})));
      add(point_args(a.point2.value_or(Point{})));
      break;
    case ActionType::PressHome:
    case ActionType::PressBack:
      break;
    case ActionType::Wait:
      add(format_double(a.duration_s.value_or(kDefaultWaitSeconds)));
      break;
    case ActionType::Finished:
      if (a.text) add(quote(*a.text));
      break;
    case ActionType::Terminate:
      add(std::string(to_string(a.status.value_or(TerminalStatus::Success))));
      break;
  }
  std::string out = std::string(verb_of(a.kind)) + "(" + args + ")";
  if (a.out_of_bounds) out += kOobSuffix;
  return out;
}

namespace {

struct CanonArg {
  enum Kind { Number, String, Word } kind;
  std::string value;  // unescaped for strings, raw token otherwise
};

[[noreturn]] void malformed(std::string_view s, std::string_view why) {
  throw Error(ErrorCode::MalformedCanonical,
              "malformed canonical action '" + std::string(s) + "': " + std::string(why));
}

std::vector<CanonArg> lex_args(std::string_view src, std::string_view body) {
  std::vector<CanonArg> args;
  std::size_t i = 0;
  if (body.empty()) return args;
  while (true) {
    if (i >= body.size()) malformed(src, "dangling separator");
    const char c = body[i];
    if (c == '"') {
      std::string value;
      ++i;
      bool closed = false;
      while (i < body.size()) {
        char d = body[i++];
        if (d == '"') {
          closed = true;
          break;
        }
        if (d == '\\') {
          if (i >= body.size()) malformed(src, "dangling escape");
          char e = body[i++];
          switch (e) {
            case '"': value += '"'; break;
            case '\\': value += '\\'; break;
            case 'n': value += '\n'; break;
            case 't': value += '\t'; break;
            case 'r': value += '\r'; break;
            default: malformed(src, "unknown escape");
          }
        } else {
          value += d;
        }
      }
      if (!closed) malformed(src, "unterminated string");
      args.push_back({CanonArg::String, std::move(value)});
    } else {
      std::size_t start = i;
      while (i < body.size() && body[i] != ',') ++i;
      std::string tok(body.substr(start, i - start));
      if (tok.empty()) malformed(src, "empty argument");
      const bool numeric = std::isdigit(static_cast<unsigned char>(tok[0])) || tok[0] == '-';
      args.push_back({numeric ? CanonArg::Number : CanonArg::Word, std::move(tok)});
    }
    if (i == body.size()) break;
    if (body[i] != ',') malformed(src, "expected ','");
    ++i;
  }
  return args;
}

int to_int(std::string_view src, const CanonArg& arg) {
  if (arg.kind != CanonArg::Number) malformed(src, "expected integer");
  int v = 0;
  auto [ptr, ec] = std::from_chars(arg.value.data(), arg.value.data() + arg.value.size(), v);
  if (ec != std::errc() || ptr != arg.value.data() + arg.value.size()) malformed(src, "bad integer");
  return v;
}

double to_double(std::string_view src, const CanonArg& arg) {
  if (arg.kind != CanonArg::Number) malformed(src, "expected number");
  double v = 0;
  auto [ptr, ec] = std::from_chars(arg.value.data(), arg.value.data() + arg.value.size(), v);
  if (ec != std::errc() || ptr != arg.value.data() + arg.value.size()) malformed(src, "bad number");
  return v;
}

std::string to_str(std::string_view src, const CanonArg& arg) {
  if (arg.kind != CanonArg::String) malformed(src, "expected quoted string");
  return arg.value;
}

}  // namespace

Action canonical_parse(std::string_view s) {
  std::string_view body = s;
  bool oob = false;
  if (body.size() >= kOobSuffix.size() && body.substr(body.size() - kOobSuffix.size()) == kOobSuffix) {
    oob = true;
    body.remove_suffix(kOobSuffix.size());
  }
  const auto open = body.find('(');
  if (open == std::string_view::npos || body.empty() || body.back() != ')') {
    malformed(s, "expected verb(args)");
  }
  const auto kind = kind_of_verb(body.substr(0, open));
  if (!kind) malformed(s, "unknown verb");
  const auto args = lex_args(s, body.substr(open + 1, body.size() - open - 2));
  auto arity = [&](std::initializer_list<std::size_t> allowed) {
    if (std::find(allowed.begin(), allowed.end(), args.size()) == allowed.end()) {
      malformed(s, "wrong number of arguments");
    }
  };
  auto point_at = [&](std::size_t i) { return Point{to_int(s, args[i]), to_int(s, args[i + 1])}; };

  Action a;
  a.kind = *kind;
  switch (*kind) {
    case ActionType::Click:
      arity({2});
      a.point = point_at(0);
      break;
    case ActionType::LongPress:
      arity({2, 3});
      a.point = point_at(0);
      if (args.size() == 3) a.duration_s = to_double(s, args[2]);
      break;
    case ActionType::TypeText:
    case ActionType::OpenApp:
    case ActionType::KeyEvent:
    case ActionType::SystemButton:
      arity({1});
      a.text = to_str(s, args[0]);
      break;
    case ActionType::Scroll: {
      arity({1, 3});
      if (args[0].kind != CanonArg::Word) malformed(s, "expected direction");
      a.direction = direction_from_string(args[0].value);
      if (!a.direction) malformed(s, "unknown direction");
      if (args.size() == 3) a.point = point_at(1);
      break;
    }
    case ActionType::Drag:
      arity({4});
      a.point = point_at(0);
      a.point2 = point_at(2);
      break;
    case ActionType::PressHome:
    case ActionType::PressBack:
      arity({0});
      break;
    case ActionType::Wait:
      arity({1});
      a.duration_s = to_double(s, args[0]);
      break;
    case ActionType::Finished:
      arity({0, 1});
      if (args.size() == 1) a.text = to_str(s, args[0]);
      break;
    case ActionType::Terminate:
      arity({1});
      if (args[0].kind != CanonArg::Word) malformed(s, "expected status");
      a.status = status_from_string(args[0].value);
      if (!a.status) malformed(s, "unknown status");
      break;
  }
  a.out_of_bounds = oob;
  if (!is_valid(a)) malformed(s, "invalid parameters");
  if (canonical_serialize(a) != s) malformed(s, "not in canonical form");
  return a;
}

}  // namespace actguard
