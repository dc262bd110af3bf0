#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "actguard/action.hpp"
#include "actguard/episode.hpp"
#include "actguard/image.hpp"
#include "actguard/oracle.hpp"

namespace actguard {

/// Raw dialect coordinate that normalizes back onto pixel `p` when possible
/// (the smallest raw value whose rescaled pixel is >= p).
int to_dialect_coord(int p, int dim, const DialectConfig& dialect);
Point to_dialect_point(Point p, ScreenDims dims, const DialectConfig& dialect);

/// Renders a canonical action as one completion in the dialect. Points are
/// converted into the dialect's coordinate space. Throws Error{InvalidArgument}
/// for kinds the dialect cannot express.
std::string render_completion(const Action& a, const DialectConfig& dialect, ScreenDims dims,
                              const std::optional<std::string>& thought = std::nullopt);

enum class ErrorMode { WrongType, OffsetClick, WrongDirection, WrongText, Malformed };
std::string_view to_string(ErrorMode m);

/// Relative weights of the error modes used when the agent is wrong. Modes
/// that do not apply to the ground-truth kind are dropped and the rest
/// renormalized; with none left the agent falls back to a wrong type.
struct WrongModel {
  double wrong_type = 0.25;
  double offset_click = 0.25;
  double wrong_direction = 0.25;
  double wrong_text = 0.25;
  double malformed = 0.0;
  double offset_sigma = 100.0;  // pixels
  bool operator==(const WrongModel&) const = default;
};

struct SimAgentConfig {
  double p_correct = 0.5;
  WrongModel wrong_model;
  std::uint64_t seed = 0;
  DialectConfig dialect{DialectId::UiTarsV1, 1000};
  bool jitter = true;  // false: correct clicks land on the bbox center
  bool emit_thought = false;
  bool operator==(const SimAgentConfig&) const = default;
};

// Throws Error{InvalidArgument}: probabilities out of range or weights not summing to 1.
void validate(const SimAgentConfig& cfg);

struct DrawKey {
  std::uint64_t episode = 0;
  std::uint64_t step = 0;
  std::uint64_t draw = 0;
};

std::uint64_t episode_key(const std::string& episode_id);

/// One simulated completion; a pure function of (cfg, ctx, gt, key).
std::string simulate_completion(const SimAgentConfig& cfg, const StepContext& ctx, const GroundTruth& gt, DrawKey key);

struct UiElement {
  std::string name;
  BBox box;
};

/// Synthetic phone screen: a fixed layout of named elements plus the app,
/// text and direction vocabularies episodes draw from.
struct SimWorld {
  ScreenDims dims;
  std::vector<UiElement> elements;
  std::vector<std::string> apps;
  std::vector<std::string> phrases;
};

const SimWorld& default_sim_world();
Image render_world(const SimWorld& world);

struct EpisodeGenConfig {
  std::size_t n_episodes = 100;
  int min_steps = 3;
  int max_steps = 7;
  TaskLevel level = TaskLevel::High;
  std::string source_dataset = "sim";
  std::string id_prefix = "ep";
  std::uint64_t seed = 0;
  ScreenshotRef screenshot;  // shared by every step; empty path = synthetic per-step digests
};

std::vector<OfflineEpisode> generate_episodes(const SimWorld& world, const EpisodeGenConfig& cfg);

}  // namespace actguard
