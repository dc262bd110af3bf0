#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "actguard/action.hpp"
#include "actguard/critic.hpp"
#include "actguard/flywheel.hpp"

namespace actguard {

inline constexpr std::string_view kFeatureSpecVersion = "ref-v1";

// Dense block layout; the hashed crosses follow it.
inline constexpr std::size_t kDenseFeatures = kActionTypeCount + 8;
inline constexpr std::size_t kHashedFeatures = 1024;
inline constexpr std::size_t kFeatureDim = kDenseFeatures + kHashedFeatures;

// Offsets into the dense block.
inline constexpr std::size_t kFeatX = kActionTypeCount;
inline constexpr std::size_t kFeatY = kActionTypeCount + 1;
inline constexpr std::size_t kFeatPointAbsent = kActionTypeCount + 2;
inline constexpr std::size_t kFeatCenterDist = kActionTypeCount + 3;
inline constexpr std::size_t kFeatEdgeDist = kActionTypeCount + 4;
inline constexpr std::size_t kFeatHistory = kActionTypeCount + 5;
inline constexpr std::size_t kFeatOverlap = kActionTypeCount + 6;
inline constexpr std::size_t kFeatBias = kActionTypeCount + 7;

/// Feature vector with a dense head and sparse hashed tail. Sparse indices
/// are absolute (>= kDenseFeatures) and sorted, without duplicates.
struct FeatureRow {
  std::vector<double> dense;
  std::vector<std::pair<std::uint32_t, double>> sparse;
  bool operator==(const FeatureRow&) const = default;
};

std::vector<std::string> tokenize(std::string_view text);

FeatureRow ref_featurize(const StepContext& ctx, const Action& a);
std::vector<double> to_dense(const FeatureRow& row, std::size_t dim = kFeatureDim);

struct TrainMeta {
  double lr = 0.0;
  int epochs = 0;
  std::uint64_t seed = 0;
  double l2 = 0.0;
  std::size_t n_records = 0;
  double final_loss = 0.0;
  bool operator==(const TrainMeta&) const = default;
};

struct ReferenceCriticParams {
  std::string feature_spec_version{kFeatureSpecVersion};
  std::vector<double> weights;
  double bias = 0.0;
  TrainMeta train_meta;
  bool operator==(const ReferenceCriticParams&) const = default;
};

ReferenceCriticParams zero_params(std::size_t dim = kFeatureDim);

struct Example {
  FeatureRow x;
  double y = 0.0;  // 1 = correct
};

std::vector<Example> make_examples(std::span<const FlywheelRecord> records);

double sigmoid(double z);
double logit(const ReferenceCriticParams& p, const FeatureRow& x);

/// Mean binary cross-entropy of sigmoid(w.x + b) plus (l2 / 2) * |w|^2.
double bce_loss(const ReferenceCriticParams& p, std::span<const Example> data, double l2);
/// Gradient of bce_loss; element [dim] is the bias component.
std::vector<double> bce_gradient(const ReferenceCriticParams& p, std::span<const Example> data, double l2);

struct TrainHyper {
  double lr = 1.0;
  int epochs = 2000;
  std::uint64_t seed = 0;
  double l2 = 3e-4;
  std::size_t batch_size = 0;  // 0 = full batch
  bool operator==(const TrainHyper&) const = default;
};

struct TrainResult {
  ReferenceCriticParams params;
  std::vector<double> loss_history;  // full-data loss after each epoch
};

/// Gradient descent from zero parameters. Throws Error{DegenerateData} when
/// only one class is present and Error{NonFinite} if the loss diverges.
TrainResult train_examples(std::span<const Example> data, const TrainHyper& hyper, std::size_t dim = kFeatureDim);
TrainResult ref_train(std::span<const FlywheelRecord> records, const TrainHyper& hyper);

// Throws Error{FeatureSpecMismatch} when params were saved for another feature spec.
Judgment ref_predict(const ReferenceCriticParams& params, const StepContext& ctx, const Action& a);

std::string params_to_json(const ReferenceCriticParams& p);
ReferenceCriticParams params_from_json(const std::string& text);
void save_params(const std::string& path, const ReferenceCriticParams& p);
ReferenceCriticParams load_params(const std::string& path);

class ReferenceCritic final : public CriticBackend {
 public:
  explicit ReferenceCritic(ReferenceCriticParams params, std::string id = "reference");

  const std::string& id() const override { return id_; }
  bool deterministic() const override { return true; }
  Judgment judge(const JudgeRequest& req) const override;

 private:
  ReferenceCriticParams params_;
  std::string id_;
};

}  // namespace actguard
