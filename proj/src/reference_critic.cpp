#include "actguard/reference_critic.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <map>
#include <numeric>
#include <set>

#include <nlohmann/json.hpp>

#include "actguard/error.hpp"
#include "actguard/json_io.hpp"
#include "actguard/oracle.hpp"
#include "actguard/rng.hpp"

namespace actguard {

using json = nlohmann::json;

namespace {

constexpr int kGrid = 8;

std::vector<std::string> action_words(const Action& a) {
  std::vector<std::string> words;
  if (a.text) words = tokenize(*a.text);
  if (a.direction) words.emplace_back(to_string(*a.direction));
  if (a.kind == ActionType::Drag && a.point && a.point2) {
    if (auto d = dominant_direction(*a.point, *a.point2)) words.emplace_back(to_string(*d));
  }
  return words;
}

std::uint32_t bucket(const std::string& key) {
  return static_cast<std::uint32_t>(kDenseFeatures + hash_label(key) % kHashedFeatures);
}

void check_finite(double v, const char* what) {
  if (!std::isfinite(v)) throw Error(ErrorCode::NonFinite, std::string(what) + " is not finite; lower the learning rate");
}

}  // namespace

std::vector<std::string> tokenize(std::string_view text) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : text) {
    const auto u = static_cast<unsigned char>(c);
    if (std::isalnum(u)) {
      cur += static_cast<char>(std::tolower(u));
    } else if (!cur.empty()) {
      out.push_back(std::move(cur));
      cur.clear();
    }
  }
  if (!cur.empty()) out.push_back(std::move(cur));
  return out;
}

FeatureRow ref_featurize(const StepContext& ctx, const Action& a) {
  FeatureRow row;
  row.dense.assign(kDenseFeatures, 0.0);
  row.dense[static_cast<std::size_t>(a.kind)] = 1.0;

  const double w = std::max(1, ctx.screenshot.dims.width);
  const double h = std::max(1, ctx.screenshot.dims.height);
  std::optional<std::pair<int, int>> cell;
  if (a.point) {
    const double fx = a.point->x / w;
    const double fy = a.point->y / h;
    row.dense[kFeatX] = fx;
    row.dense[kFeatY] = fy;
    row.dense[kFeatCenterDist] = std::hypot(fx - 0.5, fy - 0.5);
    row.dense[kFeatEdgeDist] = std::min({fx, fy, 1.0 - fx, 1.0 - fy});
    cell = std::pair{std::clamp(static_cast<int>(fx * kGrid), 0, kGrid - 1),
                     std::clamp(static_cast<int>(fy * kGrid), 0, kGrid - 1)};
  } else {
    row.dense[kFeatPointAbsent] = 1.0;
  }
  row.dense[kFeatHistory] = std::log1p(static_cast<double>(ctx.history.size()));

  const auto instr = tokenize(ctx.global_instruction);
  const auto words = action_words(a);
  const std::set<std::string> instr_set(instr.begin(), instr.end());
  const std::set<std::string> word_set(words.begin(), words.end());
  if (!word_set.empty()) {
    std::size_t inter = 0;
    for (const auto& t : word_set) inter += instr_set.count(t);
    row.dense[kFeatOverlap] = static_cast<double>(inter) / static_cast<double>(instr_set.size() + word_set.size() - inter);
  }
  row.dense[kFeatBias] = 1.0;

  if (!instr_set.empty()) {
    const double v = 1.0 / std::sqrt(static_cast<double>(instr_set.size()));
    const std::string kind(to_string(a.kind));
    std::map<std::uint32_t, double> acc;
    for (const auto& t : instr_set) {
      acc[bucket("k|" + t + "|" + kind)] += v;
      if (cell) acc[bucket("g|" + t + "|" + std::to_string(cell->first) + "," + std::to_string(cell->second))] += v;
      for (const auto& wd : word_set) acc[bucket("t|" + t + "|" + wd)] += v;
    }
    row.sparse.assign(acc.begin(), acc.end());
  }
  return row;
}

std::vector<double> to_dense(const FeatureRow& row, std::size_t dim) {
  std::vector<double> out(dim, 0.0);
  std::copy_n(row.dense.begin(), std::min(row.dense.size(), dim), out.begin());
  for (const auto& [i, v] : row.sparse) {
    if (i < dim) out[i] += v;
  }
  return out;
}

ReferenceCriticParams zero_params(std::size_t dim) {
  ReferenceCriticParams p;
  p.weights.assign(dim, 0.0);
  return p;
}

std::vector<Example> make_examples(std::span<const FlywheelRecord> records) {
  std::vector<Example> out;
  out.reserve(records.size());
  for (const auto& r : records) {
    out.push_back({ref_featurize(r.context, r.action), r.label == Label::Correct ? 1.0 : 0.0});
  }
  return out;
}

double sigmoid(double z) {
  if (z >= 0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

double logit(const ReferenceCriticParams& p, const FeatureRow& x) {
  double z = p.bias;
  const std::size_t nd = std::min(x.dense.size(), p.weights.size());
  for (std::size_t i = 0; i < nd; ++i) z += p.weights[i] * x.dense[i];
  for (const auto& [i, v] : x.sparse) {
    if (i < p.weights.size()) z += p.weights[i] * v;
  }
  return z;
}

double bce_loss(const ReferenceCriticParams& p, std::span<const Example> data, double l2) {
  if (data.empty()) throw Error(ErrorCode::EmptyInput, "loss over an empty dataset");
  long double sum = 0.0L;
  for (const auto& ex : data) {
    const double z = logit(p, ex.x);
    // -[y log s(z) + (1-y) log(1-s(z))] in a form that never overflows
    sum += std::log1p(std::exp(-std::abs(z))) + std::max(z, 0.0) - ex.y * z;
  }
  long double reg = 0.0L;
  for (double w : p.weights) reg += static_cast<long double>(w) * w;
  return static_cast<double>(sum / static_cast<long double>(data.size()) + 0.5L * l2 * reg);
}

std::vector<double> bce_gradient(const ReferenceCriticParams& p, std::span<const Example> data, double l2) {
  if (data.empty()) throw Error(ErrorCode::EmptyInput, "gradient over an empty dataset");
  const std::size_t dim = p.weights.size();
  std::vector<double> g(dim + 1, 0.0);
  for (const auto& ex : data) {
    const double r = sigmoid(logit(p, ex.x)) - ex.y;
    const std::size_t nd = std::min(ex.x.dense.size(), dim);
    for (std::size_t i = 0; i < nd; ++i) g[i] += r * ex.x.dense[i];
    for (const auto& [i, v] : ex.x.sparse) {
      if (i < dim) g[i] += r * v;
    }
    g[dim] += r;
  }
  const double inv = 1.0 / static_cast<double>(data.size());
  for (std::size_t i = 0; i < dim; ++i) g[i] = g[i] * inv + l2 * p.weights[i];
  g[dim] *= inv;
  return g;
}

TrainResult train_examples(std::span<const Example> data, const TrainHyper& hyper, std::size_t dim) {
  if (!(hyper.lr >= 0.0) || hyper.epochs < 0 || !(hyper.l2 >= 0.0)) {
    throw Error(ErrorCode::InvalidArgument, "training hyperparameters must be non-negative");
  }
  std::size_t pos = 0;
  for (const auto& ex : data) pos += ex.y > 0.5 ? 1 : 0;
  if (pos == 0 || pos == data.size()) {
    throw Error(ErrorCode::DegenerateData, "training data must contain both correct and wrong examples");
  }

  TrainResult out;
  out.params = zero_params(dim);
  std::vector<std::size_t> order(data.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  Rng rng(derive_seed(hyper.seed, {hash_label("ref-train")}));
  const std::size_t batch = hyper.batch_size == 0 ? data.size() : std::min(hyper.batch_size, data.size());

  for (int epoch = 0; epoch < hyper.epochs; ++epoch) {
    if (batch < data.size()) {
      for (std::size_t i = order.size() - 1; i > 0; --i) {
        std::swap(order[i], order[static_cast<std::size_t>(rng.uniform_int(0, static_cast<std::int64_t>(i)))]);
      }
    }
    for (std::size_t start = 0; start < data.size(); start += batch) {
      std::vector<double> g;
      if (batch == data.size()) {
        g = bce_gradient(out.params, data, hyper.l2);
      } else {
        std::vector<Example> mb;
        for (std::size_t k = start; k < std::min(start + batch, data.size()); ++k) mb.push_back(data[order[k]]);
        g = bce_gradient(out.params, mb, hyper.l2);
      }
      for (std::size_t i = 0; i < dim; ++i) out.params.weights[i] -= hyper.lr * g[i];
      out.params.bias -= hyper.lr * g[dim];
    }
    const double loss = bce_loss(out.params, data, hyper.l2);
    check_finite(loss, "training loss");
    out.loss_history.push_back(loss);
  }

  const double final_loss = out.loss_history.empty() ? bce_loss(out.params, data, hyper.l2) : out.loss_history.back();
  check_finite(final_loss, "training loss");
  for (double w : out.params.weights) check_finite(w, "weight");
  check_finite(out.params.bias, "bias");
  out.params.train_meta = TrainMeta{hyper.lr, hyper.epochs, hyper.seed, hyper.l2, data.size(), final_loss};
  return out;
}

TrainResult ref_train(std::span<const FlywheelRecord> records, const TrainHyper& hyper) {
  const auto examples = make_examples(records);
  return train_examples(examples, hyper, kFeatureDim);
}

Judgment ref_predict(const ReferenceCriticParams& params, const StepContext& ctx, const Action& a) {
  if (params.feature_spec_version != kFeatureSpecVersion || params.weights.size() != kFeatureDim) {
    throw Error(ErrorCode::FeatureSpecMismatch, "params were trained for feature spec '" +
                                                    params.feature_spec_version + "' with " +
                                                    std::to_string(params.weights.size()) + " weights");
  }
  Judgment j;
  j.confidence = sigmoid(logit(params, ref_featurize(ctx, a)));
  j.label = j.confidence >= 0.5 ? Label::Correct : Label::Wrong;
  return j;
}

std::string params_to_json(const ReferenceCriticParams& p) {
  const auto& m = p.train_meta;
  json j = {{"feature_spec_version", p.feature_spec_version},
            {"weights", p.weights},
            {"bias", p.bias},
            {"train_meta",
             {{"lr", m.lr}, {"epochs", m.epochs}, {"seed", m.seed}, {"l2", m.l2}, {"n_records", m.n_records},
              {"final_loss", m.final_loss}}}};
  return j.dump(2) + "\n";
}

ReferenceCriticParams params_from_json(const std::string& text) {
  try {
    const json j = json::parse(text);
    ReferenceCriticParams p;
    p.feature_spec_version = j.at("feature_spec_version").get<std::string>();
    p.weights = j.at("weights").get<std::vector<double>>();
    p.bias = j.at("bias").get<double>();
    if (auto m = j.find("train_meta"); m != j.end()) {
      p.train_meta.lr = m->value("lr", 0.0);
      p.train_meta.epochs = m->value("epochs", 0);
      p.train_meta.seed = m->value("seed", std::uint64_t{0});
      p.train_meta.l2 = m->value("l2", 0.0);
      p.train_meta.n_records = m->value("n_records", std::size_t{0});
      p.train_meta.final_loss = m->value("final_loss", 0.0);
    }
    return p;
  } catch (const json::exception& e) {
    throw Error(ErrorCode::InvalidArgument, std::string("critic params: ") + e.what());
  }
}

void save_params(const std::string& path, const ReferenceCriticParams& p) { write_file_atomic(path, params_to_json(p)); }

ReferenceCriticParams load_params(const std::string& path) { return params_from_json(read_file(path)); }

ReferenceCritic::ReferenceCritic(ReferenceCriticParams params, std::string id)
    : params_(std::move(params)), id_(std::move(id)) {
  if (params_.feature_spec_version != kFeatureSpecVersion || params_.weights.size() != kFeatureDim) {
    throw Error(ErrorCode::FeatureSpecMismatch, "params do not match feature spec " + std::string(kFeatureSpecVersion));
  }
}

Judgment ReferenceCritic::judge(const JudgeRequest& req) const { return ref_predict(params_, req.context, req.action); }

}  // namespace actguard
