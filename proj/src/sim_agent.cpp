#include "actguard/sim_agent.hpp"

#include <algorithm>
#include <cmath>

#include <nlohmann/json.hpp>

#include "actguard/digest.hpp"
#include "actguard/error.hpp"
#include "actguard/rng.hpp"

namespace actguard {

using ojson = nlohmann::ordered_json;

int to_dialect_coord(int p, int dim, const DialectConfig& dialect) {
  if (!dialect.coordinate_basis) return p;
  const long long b = *dialect.coordinate_basis;
  return static_cast<int>((static_cast<long long>(p) * b + dim - 1) / dim);
}

Point to_dialect_point(Point p, ScreenDims dims, const DialectConfig& dialect) {
  return {to_dialect_coord(p.x, dims.width, dialect), to_dialect_coord(p.y, dims.height, dialect)};
}

namespace {

std::string tars_quote(std::string_view s) {
  std::string out = "'";
  for (char c : s) {
    switch (c) {
      case '\\': out += "\\\\"; break;
      case '\'': out += "\\'"; break;
      case '\n': out += "\\n"; break;
      case '\t': out += "\\t"; break;
      case '\r': out += "\\r"; break;
      default: out += c;
    }
  }
  return out + "'";
}

std::string render_tars(const Action& a, const DialectConfig& dialect, ScreenDims dims) {
  auto pt = [&](Point p) {
    const Point r = to_dialect_point(p, dims, dialect);
    const std::string xy = "(" + std::to_string(r.x) + " " + std::to_string(r.y) + ")";
    return tars_quote(dialect.id == DialectId::UiTarsV15 ? "<|box_start|>" + xy + "<|box_end|>" : xy);
  };
  switch (a.kind) {
    case ActionType::Click: return "click(point=" + pt(*a.point) + ")";
    case ActionType::LongPress: return "long_press(point=" + pt(*a.point) + ")";
    case ActionType::TypeText: return "type(content=" + tars_quote(*a.text) + ")";
    case ActionType::Scroll: {
      std::string s = "scroll(";
      if (a.point) s += "point=" + pt(*a.point) + ", ";
      return s + "direction=" + tars_quote(to_string(*a.direction)) + ")";
    }
    case ActionType::Drag: return "drag(start_point=" + pt(*a.point) + ", end_point=" + pt(*a.point2) + ")";
    case ActionType::OpenApp: return "open_app(app_name=" + tars_quote(*a.text) + ")";
    case ActionType::PressHome: return "press_home()";
    case ActionType::PressBack: return "press_back()";
    case ActionType::Wait: return "wait()";
    case ActionType::Finished: return a.text ? "finished(content=" + tars_quote(*a.text) + ")" : "finished()";
    default:
      throw Error(ErrorCode::InvalidArgument,
                  std::string(to_string(a.kind)) + " cannot be expressed in " + std::string(to_string(dialect.id)));
  }
}

std::pair<Point, Point> swipe_for(Direction dir, std::optional<Point> anchor, ScreenDims dims) {
  const int dx = dir == Direction::Left ? -1 : dir == Direction::Right ? 1 : 0;
  const int dy = dir == Direction::Up ? -1 : dir == Direction::Down ? 1 : 0;
  const int len = std::max(1, std::min(dims.width, dims.height) / 4);
  auto fits = [&](Point s) {
    const int ex = s.x + dx * len;
    const int ey = s.y + dy * len;
    return ex >= 0 && ex < dims.width && ey >= 0 && ey < dims.height;
  };
  Point start = anchor.value_or(Point{dims.width / 2, dims.height / 2});
  if (!fits(start)) start = {dims.width / 2, dims.height / 2};
  return {start, {start.x + dx * len, start.y + dy * len}};
}

std::string render_qwen(const Action& a, const DialectConfig& dialect, ScreenDims dims) {
  auto pt = [&](Point p) {
    const Point r = to_dialect_point(p, dims, dialect);
    return ojson::array({r.x, r.y});
  };
  ojson args;
  switch (a.kind) {
    case ActionType::Click:
      args = {{"action", "click"}, {"coordinate", pt(*a.point)}};
      break;
    case ActionType::LongPress:
      args = {{"action", "long_press"}, {"coordinate", pt(*a.point)}};
      if (a.duration_s) args["time"] = *a.duration_s;
      break;
    case ActionType::TypeText: args = {{"action", "type"}, {"text", *a.text}}; break;
    case ActionType::Scroll: {
      const auto [from, to] = swipe_for(*a.direction, a.point, dims);
      args = {{"action", "swipe"}, {"coordinate", pt(from)}, {"coordinate2", pt(to)}};
      break;
    }
    case ActionType::Drag:
      args = {{"action", "swipe"}, {"coordinate", pt(*a.point)}, {"coordinate2", pt(*a.point2)}};
      break;
    case ActionType::OpenApp: args = {{"action", "open"}, {"text", *a.text}}; break;
    case ActionType::PressHome: args = {{"action", "system_button"}, {"button", "Home"}}; break;
    case ActionType::PressBack: args = {{"action", "system_button"}, {"button", "Back"}}; break;
    case ActionType::SystemButton: args = {{"action", "system_button"}, {"button", *a.text}}; break;
    case ActionType::KeyEvent: args = {{"action", "key"}, {"text", *a.text}}; break;
    case ActionType::Wait: args = {{"action", "wait"}, {"time", a.duration_s.value_or(kDefaultWaitSeconds)}}; break;
    case ActionType::Finished: args = {{"action", "terminate"}, {"status", "success"}}; break;
    case ActionType::Terminate: args = {{"action", "terminate"}, {"status", std::string(to_string(*a.status))}}; break;
  }
  const ojson call = {{"name", "mobile_use"}, {"arguments", args}};
  return "<tool_call>\n" + call.dump() + "\n</tool_call>";
}

}  // namespace

std::string render_completion(const Action& a, const DialectConfig& dialect, ScreenDims dims,
                              const std::optional<std::string>& thought) {
  validate(a);
  if (!dims.valid()) throw Error(ErrorCode::InvalidArgument, "render_completion needs valid screen dims");
  if (dialect.id == DialectId::QwenToolCall) {
    const std::string call = render_qwen(a, dialect, dims);
    return thought ? *thought + "\n" + call : call;
  }
  const std::string call = "Action: " + render_tars(a, dialect, dims);
  return thought ? "Thought: " + *thought + "\n" + call : call;
}

std::string_view to_string(ErrorMode m) {
  switch (m) {
    case ErrorMode::WrongType: return "wrong_type";
    case ErrorMode::OffsetClick: return "offset_click";
    case ErrorMode::WrongDirection: return "wrong_direction";
    case ErrorMode::WrongText: return "wrong_text";
    case ErrorMode::Malformed: return "malformed";
  }
  return "?";
}

void validate(const SimAgentConfig& cfg) {
  const auto& w = cfg.wrong_model;
  if (!(cfg.p_correct >= 0.0 && cfg.p_correct <= 1.0)) {
    throw Error(ErrorCode::InvalidArgument, "p_correct must be in [0, 1]");
  }
  for (double v : {w.wrong_type, w.offset_click, w.wrong_direction, w.wrong_text, w.malformed}) {
    if (!(v >= 0.0)) throw Error(ErrorCode::InvalidArgument, "error-mode weights must be non-negative");
  }
  const double total = w.wrong_type + w.offset_click + w.wrong_direction + w.wrong_text + w.malformed;
  if (std::abs(total - 1.0) > 1e-9) {
    throw Error(ErrorCode::InvalidArgument, "error-mode weights must sum to 1");
  }
  if (!(w.offset_sigma > 0.0)) throw Error(ErrorCode::InvalidArgument, "offset_sigma must be positive");
}

std::uint64_t episode_key(const std::string& episode_id) { return hash_label(episode_id); }

namespace {

Point roundtrip(Point p, ScreenDims dims, const DialectConfig& dialect) {
  return normalize(Action::click(to_dialect_coord(p.x, dims.width, dialect),
                                 to_dialect_coord(p.y, dims.height, dialect)),
                   dialect, dims)
      .point.value();
}

Point random_point(Rng& rng, ScreenDims dims) {
  return {static_cast<int>(rng.uniform_int(0, dims.width - 1)), static_cast<int>(rng.uniform_int(0, dims.height - 1))};
}

Action with_point(const Action& gt, Point p) {
  Action a = gt;
  a.point = p;
  a.out_of_bounds = false;
  return a;
}

Action correct_action(const SimAgentConfig& cfg, const GroundTruth& gt, Rng& rng) {
  const Action& g = gt.action;
  if ((g.kind != ActionType::Click && g.kind != ActionType::LongPress) || !gt.bbox) return g;
  const BBox& b = *gt.bbox;
  if (!cfg.jitter) return with_point(g, b.center());
  for (int attempt = 0; attempt < 64; ++attempt) {
    const Point p{static_cast<int>(rng.uniform_int(b.x0, b.x1)), static_cast<int>(rng.uniform_int(b.y0, b.y1))};
    // Relative dialects cannot address every pixel; keep draws whose round trip stays inside.
    if (b.contains(roundtrip(p, gt.screen, cfg.dialect))) return with_point(g, p);
  }
  return with_point(g, b.center());
}

std::vector<ErrorMode> applicable_modes(ActionType kind) {
  std::vector<ErrorMode> m{ErrorMode::WrongType};
  if (kind == ActionType::Click || kind == ActionType::LongPress) m.push_back(ErrorMode::OffsetClick);
  if (kind == ActionType::Scroll || kind == ActionType::Drag) m.push_back(ErrorMode::WrongDirection);
  if (kind == ActionType::TypeText || kind == ActionType::OpenApp) m.push_back(ErrorMode::WrongText);
  m.push_back(ErrorMode::Malformed);
  return m;
}

double weight_of(const WrongModel& w, ErrorMode m) {
  switch (m) {
    case ErrorMode::WrongType: return w.wrong_type;
    case ErrorMode::OffsetClick: return w.offset_click;
    case ErrorMode::WrongDirection: return w.wrong_direction;
    case ErrorMode::WrongText: return w.wrong_text;
    case ErrorMode::Malformed: return w.malformed;
  }
  return 0.0;
}

ErrorMode pick_mode(const WrongModel& w, ActionType kind, Rng& rng) {
  const auto modes = applicable_modes(kind);
  double total = 0.0;
  for (auto m : modes) total += weight_of(w, m);
  const double u = rng.uniform();
  if (total <= 0.0) return ErrorMode::WrongType;
  double acc = 0.0;
  for (auto m : modes) {
    acc += weight_of(w, m) / total;
    if (u < acc) return m;
  }
  for (auto it = modes.rbegin(); it != modes.rend(); ++it) {
    if (weight_of(w, *it) > 0.0) return *it;
  }
  return ErrorMode::WrongType;
}

template <typename T>
const T& pick(const std::vector<T>& v, Rng& rng) {
  return v[static_cast<std::size_t>(rng.uniform_int(0, static_cast<std::int64_t>(v.size()) - 1))];
}

Action wrong_type(const GroundTruth& gt, Rng& rng) {
  const SimWorld& world = default_sim_world();
  const ScreenDims dims = gt.screen;
  const Point center{dims.width / 2, dims.height / 2};
  std::vector<Action> options{
      Action::click(0, 0),          Action::long_press(0, 0),
      Action::type_text(pick(world.phrases, rng)),
      Action::scroll(static_cast<Direction>(rng.uniform_int(0, 3)), center),
      Action::open_app(pick(world.apps, rng)), Action::press_home(), Action::press_back(), Action::wait()};
  const Point p = random_point(rng, dims);
  options[0].point = p;
  options[1].point = p;
  std::vector<Action> allowed;
  for (auto& a : options) {
    if (!match_type(a, gt)) allowed.push_back(std::move(a));
  }
  return pick(allowed, rng);
}

std::optional<Action> offset_click(const SimAgentConfig& cfg, const GroundTruth& gt, Rng& rng) {
  const ScreenDims dims = gt.screen;
  const Point c = gt.bbox ? gt.bbox->center() : *gt.action.point;
  const double sigma = cfg.wrong_model.offset_sigma;
  const MatchConfig match;
  auto miss = [&](Point p) { return !match_grounding(roundtrip(p, dims, cfg.dialect), gt, match); };
  for (int attempt = 0; attempt < 128; ++attempt) {
    const Point p{std::clamp(static_cast<int>(std::lround(rng.normal(c.x, sigma))), 0, dims.width - 1),
                  std::clamp(static_cast<int>(std::lround(rng.normal(c.y, sigma))), 0, dims.height - 1)};
    if (miss(p)) return with_point(gt.action, p);
  }
  const Point corner{c.x < dims.width / 2 ? dims.width - 1 : 0, c.y < dims.height / 2 ? dims.height - 1 : 0};
  if (miss(corner)) return with_point(gt.action, corner);
  return std::nullopt;
}

Action wrong_direction(const GroundTruth& gt, Rng& rng) {
  std::optional<Direction> truth = gt.action.direction;
  if (!truth && gt.action.point && gt.action.point2) truth = dominant_direction(*gt.action.point, *gt.action.point2);
  std::vector<Direction> others;
  for (auto d : {Direction::Up, Direction::Down, Direction::Left, Direction::Right}) {
    if (d != truth) others.push_back(d);
  }
  const Point anchor = gt.action.point.value_or(Point{gt.screen.width / 2, gt.screen.height / 2});
  return Action::scroll(pick(others, rng), anchor);
}

Action wrong_text(const GroundTruth& gt, Rng& rng) {
  const SimWorld& world = default_sim_world();
  const auto& pool = gt.action.kind == ActionType::OpenApp ? world.apps : world.phrases;
  const std::string truth = normalize_text(gt.action.text.value_or(""));
  std::vector<std::string> others;
  for (const auto& s : pool) {
    if (normalize_text(s) != truth) others.push_back(s);
  }
  Action a = gt.action;
  a.text = pick(others, rng);
  return a;
}

std::string malformed(const DialectConfig& dialect, Rng& rng) {
  static const std::vector<std::string> tars{
      "Action: click(point='(12 )')",
      "Action: tap(point='(100 200)')",
      "Action: click(point=",
      "I am not sure what to do on this screen.",
  };
  static const std::vector<std::string> qwen{
      "<tool_call>\n{\"name\": \"mobile_use\", \"arguments\": {\"action\": \"click\"}}\n</tool_call>",
      "<tool_call>\n{\"name\": \"mobile_use\", \"arguments\": {\"action\": \n</tool_call>",
      "<tool_call>\n{\"name\": \"mobile_use\", \"arguments\": {\"action\": \"fly\"}}\n</tool_call>",
      "I am not sure what to do on this screen.",
  };
  return pick(dialect.id == DialectId::QwenToolCall ? qwen : tars, rng);
}

}  // namespace

std::string simulate_completion(const SimAgentConfig& cfg, const StepContext& ctx, const GroundTruth& gt, DrawKey key) {
  ScreenDims dims = gt.screen.valid() ? gt.screen : ctx.screenshot.dims;
  GroundTruth truth = gt;
  truth.screen = dims;
  Rng rng(derive_seed(cfg.seed, {key.episode, key.step, key.draw}));
  const std::optional<std::string> thought =
      cfg.emit_thought ? std::optional<std::string>("I will " + actor_set(gt.action) + ".") : std::nullopt;

  if (rng.bernoulli(cfg.p_correct)) {
    return render_completion(correct_action(cfg, truth, rng), cfg.dialect, dims, thought);
  }
  std::optional<Action> wrong;
  switch (pick_mode(cfg.wrong_model, truth.action.kind, rng)) {
    case ErrorMode::WrongType: break;
    case ErrorMode::OffsetClick: wrong = offset_click(cfg, truth, rng); break;
    case ErrorMode::WrongDirection: wrong = wrong_direction(truth, rng); break;
    case ErrorMode::WrongText: wrong = wrong_text(truth, rng); break;
    case ErrorMode::Malformed: return malformed(cfg.dialect, rng);
  }
  if (!wrong) wrong = wrong_type(truth, rng);
  return render_completion(*wrong, cfg.dialect, dims, cfg.emit_thought ? std::optional<std::string>("I will " + actor_set(*wrong) + ".") : std::nullopt);
}

const SimWorld& default_sim_world() {
  static const SimWorld world = [] {
    SimWorld w;
    w.dims = {1080, 2400};
    const std::vector<std::string> names{
        "Wi-Fi toggle",   "Bluetooth switch", "Airplane mode", "Flashlight",    "Search bar",    "Send arrow",
        "Profile avatar", "Menu drawer",      "Settings gear", "Notifications", "Compose pencil", "Camera shutter",
        "Gallery thumbnail", "Share sheet",   "Trash bin",     "Save disk",     "Shopping cart", "Checkout",
        "Favorites star", "Downloads folder", "Calendar date", "Alarm clock",   "Contacts list", "Battery saver"};
    const int cols = 4;
    const int cell_w = w.dims.width / cols;
    const int cell_h = 300;
    const int top = 300;
    for (std::size_t i = 0; i < names.size(); ++i) {
      const int c = static_cast<int>(i) % cols;
      const int r = static_cast<int>(i) / cols;
      const int x0 = c * cell_w + 20;
      const int y0 = top + r * cell_h + 40;
      w.elements.push_back({names[i], BBox{x0, y0, x0 + cell_w - 41, y0 + cell_h - 81}});
    }
    w.apps = {"Settings", "Chrome", "Gmail", "Maps", "Camera", "Clock",
              "Calendar", "YouTube", "Spotify", "WhatsApp", "Amazon", "Photos"};
    w.phrases = {"coffee shops nearby", "weather tomorrow", "hello world",   "meeting at noon",
                 "buy milk",            "flight to paris",  "pizza delivery", "running shoes",
                 "jazz playlist",       "happy birthday",   "train schedule", "cheap hotels"};
    return w;
  }();
  return world;
}

Image render_world(const SimWorld& world) {
  Image img(world.dims.width, world.dims.height, Rgb{255, 255, 255});
  for (const auto& e : world.elements) {
    for (int y = e.box.y0; y <= e.box.y1; ++y) {
      for (int x = e.box.x0; x <= e.box.x1; ++x) {
        const bool border = x - e.box.x0 < 2 || e.box.x1 - x < 2 || y - e.box.y0 < 2 || e.box.y1 - y < 2;
        img.set(x, y, border ? Rgb{90, 90, 90} : Rgb{230, 230, 230});
      }
    }
  }
  return img;
}

namespace {

struct PlannedStep {
  Action action;
  std::optional<BBox> bbox;
  std::string description;
};

PlannedStep plan_step(const SimWorld& world, Rng& rng, bool last) {
  const ScreenDims d = world.dims;
  const Point center{d.width / 2, d.height / 2};
  if (last && rng.bernoulli(0.5)) return {Action::finished(), std::nullopt, "finish the task"};
  const double u = rng.uniform();
  if (u < 0.38) {
    const auto& e = pick(world.elements, rng);
    return {Action::click(e.box.center().x, e.box.center().y), e.box, "tap " + e.name};
  }
  if (u < 0.46) {
    const auto& e = pick(world.elements, rng);
    return {Action::long_press(e.box.center().x, e.box.center().y), e.box, "long press " + e.name};
  }
  if (u < 0.60) {
    const auto& p = pick(world.phrases, rng);
    return {Action::type_text(p), std::nullopt, "type " + p};
  }
  if (u < 0.74) {
    const auto dir = static_cast<Direction>(rng.uniform_int(0, 3));
    return {Action::scroll(dir, center), std::nullopt, "scroll " + std::string(to_string(dir))};
  }
  if (u < 0.84) {
    const auto& app = pick(world.apps, rng);
    return {Action::open_app(app), std::nullopt, "open " + app};
  }
  if (u < 0.91) return {Action::press_back(), std::nullopt, "go back"};
  if (u < 0.96) return {Action::press_home(), std::nullopt, "return to the home screen"};
  return {Action::wait(), std::nullopt, "wait for the page to load"};
}

}  // namespace

std::vector<OfflineEpisode> generate_episodes(const SimWorld& world, const EpisodeGenConfig& cfg) {
  if (cfg.min_steps < 1 || cfg.max_steps < cfg.min_steps) {
    throw Error(ErrorCode::InvalidArgument, "episode length range must satisfy 1 <= min_steps <= max_steps");
  }
  if (!cfg.screenshot.path.empty() && cfg.screenshot.dims != world.dims) {
    throw Error(ErrorCode::InvalidArgument, "shared screenshot dims differ from the world's screen");
  }
  std::vector<OfflineEpisode> out;
  out.reserve(cfg.n_episodes);
  for (std::size_t i = 0; i < cfg.n_episodes; ++i) {
    Rng rng(derive_seed(cfg.seed, {hash_label("episode"), i}));
    std::string num = std::to_string(i);
    if (num.size() < 6) num.insert(0, 6 - num.size(), '0');
    OfflineEpisode ep;
    ep.episode_id = cfg.id_prefix + "-" + num;
    ep.source_dataset = cfg.source_dataset;
    ep.task_level = cfg.level;

    const int n_steps = static_cast<int>(rng.uniform_int(cfg.min_steps, cfg.max_steps));
    std::vector<PlannedStep> plan;
    for (int k = 0; k < n_steps; ++k) plan.push_back(plan_step(world, rng, k + 1 == n_steps));

    std::string instruction;
    for (std::size_t k = 0; k < plan.size(); ++k) {
      instruction += (k == 0 ? "" : ", then ") + plan[k].description;
    }
    instruction[0] = static_cast<char>(std::toupper(static_cast<unsigned char>(instruction[0])));

    std::vector<std::string> history;
    for (std::size_t k = 0; k < plan.size(); ++k) {
      EpisodeStep s;
      if (cfg.screenshot.path.empty()) {
        const std::string path = "sim/" + ep.episode_id + "/" + std::to_string(k + 1) + ".png";
        s.context.screenshot = {path, sha256_hex(path), world.dims};
      } else {
        s.context.screenshot = cfg.screenshot;
      }
      s.context.global_instruction = instruction;
      s.context.step_plan = plan[k].description;
      s.context.history = history;
      s.truth.action = plan[k].action;
      s.truth.bbox = plan[k].bbox;
      s.truth.screen = world.dims;
      if (plan[k].action.kind == ActionType::TypeText || plan[k].action.kind == ActionType::OpenApp) {
        s.truth.text_norm = normalize_text(*plan[k].action.text);
      }
      history.push_back(gt_history_entry(plan[k].action, static_cast<int>(k + 1)));
      ep.steps.push_back(std::move(s));
    }
    out.push_back(std::move(ep));
  }
  return out;
}

}  // namespace actguard
