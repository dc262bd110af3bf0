#pragma once

#include <compare>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace actguard {

struct Point {
  int x = 0;
  int y = 0;
  auto operator<=>(const Point&) const = default;
};

struct ScreenDims {
  int width = 0;
  int height = 0;
  bool operator==(const ScreenDims&) const = default;
  bool valid() const { return width > 0 && height > 0; }
};

enum class ActionType {
  Click,
  LongPress,
  TypeText,
  Scroll,
  Drag,
  OpenApp,
  PressHome,
  PressBack,
  Wait,
  Finished,
  KeyEvent,
  SystemButton,
  Terminate,
};

inline constexpr int kActionTypeCount = 13;

enum class Direction { Up, Down, Left, Right };
enum class TerminalStatus { Success, Failure };

std::string_view to_string(ActionType kind);
std::string_view to_string(Direction dir);
std::string_view to_string(TerminalStatus status);
std::optional<Direction> direction_from_string(std::string_view s);
std::optional<TerminalStatus> status_from_string(std::string_view s);

// Seconds assumed for a wait when the producing dialect carries no duration.
inline constexpr double kDefaultWaitSeconds = 1.0;

/// A single GUI action: its kind plus the parameters that kind carries.
///
/// Parameter presence is fixed per kind (see validate()). Coordinates are
/// integers in absolute screen pixels once normalize() has run.
struct Action {
  ActionType kind = ActionType::Wait;
  std::optional<Point> point;   // Click, LongPress, Drag start, optional Scroll anchor
  std::optional<Point> point2;  // Drag end
  std::optional<Direction> direction;
  std::optional<std::string> text;
  std::optional<double> duration_s;
  std::optional<TerminalStatus> status;
  // Set by normalize() when a coordinate had to be clamped into the screen.
  bool out_of_bounds = false;

  bool operator==(const Action&) const = default;

  static Action click(int x, int y);
  static Action long_press(int x, int y, std::optional<double> seconds = std::nullopt);
  static Action type_text(std::string text);
  static Action scroll(Direction dir, std::optional<Point> anchor = std::nullopt);
  static Action drag(Point from, Point to);
  static Action open_app(std::string name);
  static Action press_home();
  static Action press_back();
  static Action wait(double seconds = kDefaultWaitSeconds);
  static Action finished(std::optional<std::string> content = std::nullopt);
  static Action key_event(std::string key);
  static Action system_button(std::string button);
  static Action terminate(TerminalStatus status);
};

// Throws Error{InvalidArgument} when parameters do not match the kind.
void validate(const Action& a);
bool is_valid(const Action& a);

bool is_grounding_kind(ActionType kind);

struct ScreenshotRef {
  std::string path;    // relative path or opaque handle
  std::string sha256;  // hex digest of the image bytes
  ScreenDims dims;
  bool operator==(const ScreenshotRef&) const = default;
};

/// What the agent sees at one step: screenshot, task, optional per-step plan
/// and the textual history of earlier steps (oldest first).
struct StepContext {
  ScreenshotRef screenshot;
  std::string global_instruction;
  std::optional<std::string> step_plan;
  std::vector<std::string> history;
  bool operator==(const StepContext&) const = default;
};

void validate(const StepContext& ctx);

/// Binary correctness verdict shared by the oracle labeler and critics.
enum class Label { Correct, Wrong };

std::string_view to_string(Label label);
std::optional<Label> label_from_string(std::string_view s);

enum class DialectId { UiTarsV1, UiTarsV15, QwenToolCall };

std::string_view to_string(DialectId id);
std::optional<DialectId> dialect_from_string(std::string_view s);

/// Coordinate space a dialect emits. A basis of B means coordinates range
/// over [0, B] and are rescaled to pixels; no basis means absolute pixels.
struct DialectConfig {
  DialectId id = DialectId::QwenToolCall;
  std::optional<int> coordinate_basis;
  bool operator==(const DialectConfig&) const = default;
};

class DialectTable {
 public:
  DialectTable() = default;
  static DialectTable defaults();

  void set(DialectConfig cfg);
  // Throws Error{UnknownDialect}.
  const DialectConfig& get(DialectId id) const;
  bool contains(DialectId id) const;

 private:
  std::vector<DialectConfig> entries_;
};

Action normalize(const Action& raw, const DialectConfig& dialect, ScreenDims dims);
Action normalize(const Action& raw, DialectId dialect, const DialectTable& table, ScreenDims dims);

/// Critic-facing description of an action ("Tap at [x, y]", "Swipe to up", ...).
std::string actor_set(const Action& a);

/// Stable textual storage form, e.g. `click(10,20)` or `type("hi \"there\"")`.
std::string canonical_serialize(const Action& a);
// Throws Error{MalformedCanonical} unless `s` is exactly the serialization of some action.
Action canonical_parse(std::string_view s);

}  // namespace actguard
