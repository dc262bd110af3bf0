#include "actguard/parser.hpp"

#include <algorithm>
#include <array>
#include <cctype>
#include <charconv>
#include <climits>
#include <cmath>

#include <nlohmann/json.hpp>

namespace actguard {
namespace {

using json = nlohmann::json;

constexpr std::string_view kThought = "Thought:";
constexpr std::string_view kAction = "Action:";
constexpr std::string_view kBoxStart = "<|box_start|>";
constexpr std::string_view kBoxEnd = "<|box_end|>";
constexpr std::string_view kPointOpen = "<point>";
constexpr std::string_view kPointClose = "</point>";
constexpr std::string_view kToolOpen = "<tool_call>";
constexpr std::string_view kToolClose = "</tool_call>";

constexpr std::array<std::string_view, 10> kTarsVerbs{
    "click", "long_press", "type", "scroll", "open_app",
    "drag", "press_home", "press_back", "finished", "wait"};

bool is_ident_char(char c) {
  return std::isalnum(static_cast<unsigned char>(c)) || c == '_';
}

bool is_space(char c) { return std::isspace(static_cast<unsigned char>(c)) != 0; }

std::string trim(std::string_view s) {
  std::size_t b = 0, e = s.size();
  while (b < e && is_space(s[b])) ++b;
  while (e > b && is_space(s[e - 1])) --e;
  return std::string(s.substr(b, e - b));
}

struct Envelope {
  std::optional<std::string> thought;
  std::size_t action_begin = 0;  // offset into the full text where action scanning starts
  bool has_action_marker = false;
};

Envelope split_envelope(std::string_view text) {
  Envelope env;
  const auto a = text.find(kAction);
  if (a == std::string_view::npos) return env;
  env.has_action_marker = true;
  env.action_begin = a + kAction.size();
  const auto t = text.find(kThought);
  if (t != std::string_view::npos && t < a) {
    const auto from = t + kThought.size();
    env.thought = trim(text.substr(from, a - from));
  }
  return env;
}

/// Cursor over the full completion text; all offsets are absolute.
class Cursor {
 public:
  Cursor(std::string_view text, std::size_t pos) : text_(text), pos_(pos) {}

  std::size_t pos() const { return pos_; }
  bool done() const { return pos_ >= text_.size(); }
  char peek() const { return done() ? '\0' : text_[pos_]; }

  void skip_ws() {
    while (!done() && is_space(text_[pos_])) ++pos_;
  }

  bool consume(std::string_view token) {
    if (text_.substr(pos_).substr(0, token.size()) == token) {
      pos_ += token.size();
      return true;
    }
    return false;
  }

  void expect(std::string_view token, const char* what) {
    if (!consume(token)) fail(std::string("expected ") + what);
  }

  std::string ident() {
    const auto start = pos_;
    while (!done() && is_ident_char(text_[pos_])) ++pos_;
    if (start == pos_) fail("expected identifier");
    return std::string(text_.substr(start, pos_ - start));
  }

  // Single- or double-quoted string with backslash escapes.
  std::pair<std::string, std::size_t> quoted() {
    const char q = peek();
    if (q != '\'' && q != '"') fail("expected quoted value");
    const auto value_offset = ++pos_;
    std::string out;
    while (!done()) {
      char c = text_[pos_++];
      if (c == q) return {out, value_offset};
      if (c == '\\') {
        if (done()) break;
        char e = text_[pos_++];
        switch (e) {
          case 'n': out += '\n'; break;
          case 't': out += '\t'; break;
          case 'r': out += '\r'; break;
          default: out += e;
        }
      } else {
        out += c;
      }
    }
    fail("unterminated string");
  }

  [[noreturn]] void fail(std::string reason) const { throw ParseError(pos_, std::move(reason)); }

 private:
  std::string_view text_;
  std::size_t pos_;
};

int parse_coord_number(std::string_view s, std::size_t offset) {
  if (s.empty()) throw ParseError(offset, "malformed coordinate: empty number");
  int v = 0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size() || v < 0) {
    throw ParseError(offset, "malformed coordinate: '" + std::string(s) + "'");
  }
  return v;
}

// "x y", "x,y" or "x, y" with free whitespace.
Point parse_xy(std::string_view s, std::size_t offset) {
  std::size_t i = 0;
  auto skip = [&] {
    while (i < s.size() && is_space(s[i])) ++i;
  };
  auto number = [&] {
    const auto start = i;
    while (i < s.size() && std::isdigit(static_cast<unsigned char>(s[i]))) ++i;
    return parse_coord_number(s.substr(start, i - start), offset + start);
  };
  skip();
  const int x = number();
  skip();
  bool sep = false;
  if (i < s.size() && s[i] == ',') {
    ++i;
    sep = true;
  }
  skip();
  if (!sep && (i == 0 || !is_space(s[i - 1]))) {
    throw ParseError(offset + i, "malformed coordinate: missing separator");
  }
  const int y = number();
  skip();
  if (i != s.size()) throw ParseError(offset + i, "malformed coordinate: trailing characters");
  return {x, y};
}

std::string_view strip(std::string_view s, std::size_t& offset) {
  while (!s.empty() && is_space(s.front())) {
    s.remove_prefix(1);
    ++offset;
  }
  while (!s.empty() && is_space(s.back())) s.remove_suffix(1);
  return s;
}

Point parse_tars_point(std::string_view value, std::size_t offset, DialectId dialect) {
  std::string_view v = strip(value, offset);
  if (dialect == DialectId::UiTarsV15) {
    if (v.substr(0, kBoxStart.size()) != kBoxStart) {
      throw ParseError(offset, "malformed coordinate: expected <|box_start|>");
    }
    v.remove_prefix(kBoxStart.size());
    offset += kBoxStart.size();
    if (v.size() < kBoxEnd.size() || v.substr(v.size() - kBoxEnd.size()) != kBoxEnd) {
      throw ParseError(offset + v.size(), "malformed coordinate: expected <|box_end|>");
    }
    v.remove_suffix(kBoxEnd.size());
    v = strip(v, offset);
  } else if (v.substr(0, kPointOpen.size()) == kPointOpen) {
    // grounding-style <point>x y</point>
    v.remove_prefix(kPointOpen.size());
    offset += kPointOpen.size();
    if (v.size() < kPointClose.size() || v.substr(v.size() - kPointClose.size()) != kPointClose) {
      throw ParseError(offset + v.size(), "malformed coordinate: expected </point>");
    }
    v.remove_suffix(kPointClose.size());
    return parse_xy(v, offset);
  } else if (v.find(kBoxStart) != std::string_view::npos) {
    throw ParseError(offset, "malformed coordinate: box sentinels are not part of this dialect");
  }
  if (v.size() < 2 || v.front() != '(' || v.back() != ')') {
    throw ParseError(offset, "malformed coordinate: expected '(x y)'");
  }
  return parse_xy(v.substr(1, v.size() - 2), offset + 1);
}

struct KwArg {
  std::string key;
  std::string value;
  std::size_t value_offset;
};

struct TarsCall {
  Action action;
  std::size_t end;
};

TarsCall parse_tars_call(std::string_view text, std::size_t begin, DialectId dialect) {
  Cursor cur(text, begin);
  const auto verb_offset = cur.pos();
  const std::string verb = cur.ident();
  cur.skip_ws();
  cur.expect("(", "'('");
  std::vector<KwArg> args;
  cur.skip_ws();
  if (cur.peek() != ')') {
    while (true) {
      cur.skip_ws();
      std::string key = cur.ident();
      cur.skip_ws();
      cur.expect("=", "'='");
      cur.skip_ws();
      auto [value, off] = cur.quoted();
      for (const auto& a : args) {
        if (a.key == key) throw ParseError(off, "duplicate argument '" + key + "'");
      }
      args.push_back({std::move(key), std::move(value), off});
      cur.skip_ws();
      if (cur.consume(",")) continue;
      break;
    }
  }
  cur.skip_ws();
  cur.expect(")", "')'");

  auto find = [&](std::string_view key) -> const KwArg* {
    for (const auto& a : args) {
      if (a.key == key) return &a;
    }
    return nullptr;
  };
  auto required = [&](std::string_view key) -> const KwArg& {
    const KwArg* a = find(key);
    if (!a) throw ParseError(verb_offset, verb + ": missing required parameter '" + std::string(key) + "'");
    return *a;
  };
  auto allow_only = [&](std::initializer_list<std::string_view> keys) {
    for (const auto& a : args) {
      if (std::find(keys.begin(), keys.end(), a.key) == keys.end()) {
        throw ParseError(a.value_offset, verb + ": unexpected parameter '" + a.key + "'");
      }
    }
  };
  auto point = [&](std::string_view key) {
    const auto& a = required(key);
    return parse_tars_point(a.value, a.value_offset, dialect);
  };

  Action act;
  if (verb == "click") {
    allow_only({"point"});
    const auto p = point("point");
    act = Action::click(p.x, p.y);
  } else if (verb == "long_press") {
    allow_only({"point"});
    const auto p = point("point");
    act = Action::long_press(p.x, p.y);
  } else if (verb == "type") {
    allow_only({"content"});
    act = Action::type_text(required("content").value);
  } else if (verb == "scroll") {
    allow_only({"point", "direction"});
    const auto& d = required("direction");
    const auto dir = direction_from_string(trim(d.value));
    if (!dir) throw ParseError(d.value_offset, "scroll: unknown direction '" + d.value + "'");
    std::optional<Point> anchor;
    if (find("point")) anchor = point("point");
    act = Action::scroll(*dir, anchor);
  } else if (verb == "open_app") {
    allow_only({"app_name"});
    act = Action::open_app(required("app_name").value);
  } else if (verb == "drag") {
    allow_only({"start_point", "end_point"});
    act = Action::drag(point("start_point"), point("end_point"));
  } else if (verb == "press_home") {
    allow_only({});
    act = Action::press_home();
  } else if (verb == "press_back") {
    allow_only({});
    act = Action::press_back();
  } else if (verb == "finished") {
    allow_only({"content"});
    const KwArg* c = find("content");
    act = Action::finished(c ? std::optional<std::string>(c->value) : std::nullopt);
  } else if (verb == "wait") {
    allow_only({});
    act = Action::wait(kDefaultWaitSeconds);
  } else {
    throw ParseError(verb_offset, "unknown verb '" + verb + "'");
  }
  return {std::move(act), cur.pos()};
}

// Offsets of identifiers in [from, end) that look like `verb(`.
std::vector<std::size_t> call_sites(std::string_view text, std::size_t from, bool known_only) {
  std::vector<std::size_t> sites;
  std::size_t i = from;
  while (i < text.size()) {
    if (!is_ident_char(text[i]) || (i > 0 && is_ident_char(text[i - 1]))) {
      ++i;
      continue;
    }
    std::size_t j = i;
    while (j < text.size() && is_ident_char(text[j])) ++j;
    std::size_t k = j;
    while (k < text.size() && is_space(text[k])) ++k;
    if (k < text.size() && text[k] == '(') {
      const auto name = text.substr(i, j - i);
      const bool known = std::find(kTarsVerbs.begin(), kTarsVerbs.end(), name) != kTarsVerbs.end();
      if (known || !known_only) sites.push_back(i);
    }
    i = j;
  }
  return sites;
}

ParsedOutput parse_tars(std::string_view text, DialectId dialect, const Envelope& env) {
  ParsedOutput out;
  out.thought = env.thought;
  out.dialect = dialect;
  out.raw_text = std::string(text);

  std::optional<TarsCall> first;
  if (env.has_action_marker) {
    // The expression right after "Action:" is the action; report its error as-is.
    Cursor cur(text, env.action_begin);
    cur.skip_ws();
    if (cur.done()) throw ParseError(cur.pos(), "empty action");
    first = parse_tars_call(text, cur.pos(), dialect);
  } else {
    std::optional<ParseError> first_error;
    for (auto site : call_sites(text, 0, false)) {
      try {
        first = parse_tars_call(text, site, dialect);
        break;
      } catch (const ParseError& e) {
        if (!first_error) first_error = e;
      }
    }
    if (!first) {
      if (first_error) throw *first_error;
      throw ParseError(0, "no action expression found");
    }
  }
  out.action = std::move(first->action);

  for (auto site : call_sites(text, first->end, true)) {
    try {
      parse_tars_call(text, site, dialect);
      out.warnings.emplace_back("multiple actions in completion; using the first");
      break;
    } catch (const ParseError&) {
    }
  }
  return out;
}

Point json_point(const json& v, std::size_t offset, std::string_view key) {
  if (!v.is_array() || v.size() != 2 || !v[0].is_number() || !v[1].is_number()) {
    throw ParseError(offset, "malformed coordinate: '" + std::string(key) + "' must be [x, y]");
  }
  auto axis = [&](const json& n) {
    const double d = n.get<double>();
    if (!std::isfinite(d) || d < 0.0 || d > static_cast<double>(INT_MAX)) {
      throw ParseError(offset, "malformed coordinate: out of range in '" + std::string(key) + "'");
    }
    return static_cast<int>(std::floor(d));
  };
  return {axis(v[0]), axis(v[1])};
}

ParsedOutput parse_qwen(std::string_view text, const Envelope& env) {
  ParsedOutput out;
  out.thought = env.thought;
  out.dialect = DialectId::QwenToolCall;
  out.raw_text = std::string(text);

  const auto open = text.find(kToolOpen);
  if (open == std::string_view::npos) throw ParseError(0, "missing <tool_call> tag");
  const auto body_begin = open + kToolOpen.size();
  const auto close = text.find(kToolClose, body_begin);
  if (close == std::string_view::npos) throw ParseError(body_begin, "missing </tool_call> tag");
  if (text.find(kToolOpen, close) != std::string_view::npos) {
    out.warnings.emplace_back("multiple actions in completion; using the first");
  }

  const auto body = text.substr(body_begin, close - body_begin);
  json call = json::parse(body.begin(), body.end(), nullptr, false);
  if (call.is_discarded()) throw ParseError(body_begin, "invalid JSON in tool_call");
  if (!call.is_object()) throw ParseError(body_begin, "tool_call must be a JSON object");
  auto it = call.find("arguments");
  if (it == call.end()) throw ParseError(body_begin, "tool_call missing 'arguments'");
  json args = *it;
  if (args.is_string()) {
    const auto s = args.get<std::string>();
    args = json::parse(s, nullptr, false);
    if (args.is_discarded()) throw ParseError(body_begin, "invalid JSON in 'arguments' string");
  }
  if (!args.is_object()) throw ParseError(body_begin, "'arguments' must be an object");

  auto str_field = [&](std::string_view key) -> std::string {
    auto f = args.find(std::string(key));
    if (f == args.end()) throw ParseError(body_begin, "missing required parameter '" + std::string(key) + "'");
    if (!f->is_string()) throw ParseError(body_begin, "'" + std::string(key) + "' must be a string");
    return f->get<std::string>();
  };
  auto point_field = [&](std::string_view key) {
    auto f = args.find(std::string(key));
    if (f == args.end()) throw ParseError(body_begin, "missing required parameter '" + std::string(key) + "'");
    return json_point(*f, body_begin, key);
  };
  auto time_field = [&]() -> std::optional<double> {
    auto f = args.find("time");
    if (f == args.end() || f->is_null()) return std::nullopt;
    if (!f->is_number()) throw ParseError(body_begin, "'time' must be a number");
    const double t = f->get<double>();
    if (!std::isfinite(t) || t < 0.0) throw ParseError(body_begin, "'time' must be non-negative");
    return t;
  };

  const std::string action = str_field("action");
  if (action == "click") {
    const auto p = point_field("coordinate");
    out.action = Action::click(p.x, p.y);
  } else if (action == "long_press") {
    const auto p = point_field("coordinate");
    out.action = Action::long_press(p.x, p.y, time_field());
  } else if (action == "swipe") {
    out.action = Action::drag(point_field("coordinate"), point_field("coordinate2"));
  } else if (action == "type") {
    out.action = Action::type_text(str_field("text"));
  } else if (action == "key") {
    out.action = Action::key_event(str_field("text"));
  } else if (action == "open") {
    out.action = Action::open_app(str_field("text"));
  } else if (action == "system_button") {
    const auto button = str_field("button");
    if (button != "Back" && button != "Home" && button != "Menu" && button != "Enter") {
      throw ParseError(body_begin, "unknown system button '" + button + "'");
    }
    out.action = Action::system_button(button);
  } else if (action == "wait") {
    out.action = Action::wait(time_field().value_or(kDefaultWaitSeconds));
  } else if (action == "terminate") {
    const auto status = status_from_string(str_field("status"));
    if (!status) throw ParseError(body_begin, "unknown terminate status");
    out.action = Action::terminate(*status);
  } else {
    throw ParseError(body_begin, "unknown verb '" + action + "'");
  }
  return out;
}

}  // namespace

ParsedOutput parse(std::string_view text, DialectId dialect) {
  const Envelope env = split_envelope(text);
  ParsedOutput out = dialect == DialectId::QwenToolCall ? parse_qwen(text, env)
                                                        : parse_tars(text, dialect, env);
  validate(out.action);
  return out;
}

ParseResult try_parse(std::string_view text, DialectId dialect) {
  try {
    return parse(text, dialect);
  } catch (const ParseError& e) {
    return e;
  } catch (const Error& e) {
    return ParseError(0, e.what());
  }
}

std::string render_history_entry(const ParsedOutput& p, int k) {
  const bool use_thought = p.thought && !p.thought->empty();
  std::string body = use_thought ? *p.thought : actor_set(p.action);
  for (char& c : body) {
    if (c == '\n' || c == '\r') c = ' ';
  }
  return "step " + std::to_string(k) + ": " + body;
}

std::string render_history(const std::vector<std::string>& entries) {
  std::string out;
  for (std::size_t i = 0; i < entries.size(); ++i) {
    if (i) out += '\n';
    out += entries[i];
  }
  return out;
}

}  // namespace actguard
