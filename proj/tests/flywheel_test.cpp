#include <gtest/gtest.h>

#include <filesystem>
#include <random>

#include "actguard/error.hpp"
#include "actguard/flywheel.hpp"
#include "actguard/json_io.hpp"
#include "test_util.hpp"

using namespace actguard;

namespace {

StepContext context(int i) {
  StepContext ctx;
  ctx.screenshot = {"shots/" + std::to_string(i) + ".png", std::string(64, 'a' + (i % 6)), {1080, 2400}};
  ctx.global_instruction = "task " + std::to_string(i);
  return ctx;
}

FlywheelRecord record(int i, Label label, int round = 1) {
  FlywheelRecord r;
  r.context = context(i);
  r.action = Action::click(i % 1000, 7);
  r.actor_set_text = actor_set(r.action);
  r.label = label;
  r.source_agent = "sim-agent";
  r.round = round;
  r.source_dataset = "sim";
  if (round >= 2) r.guided_by = "icm";
  r.record_id = compute_record_id(r.context, r.action);
  return r;
}

std::vector<FlywheelRecord> records(int n_pos, int n_neg, int offset = 0, int round = 1) {
  std::vector<FlywheelRecord> out;
  for (int i = 0; i < n_pos; ++i) out.push_back(record(offset + i, Label::Correct, round));
  for (int i = 0; i < n_neg; ++i) out.push_back(record(offset + n_pos + i, Label::Wrong, round));
  return out;
}

std::pair<std::size_t, std::size_t> counts(std::span<const FlywheelRecord> rs) {
  std::size_t p = 0, n = 0;
  for (const auto& r : rs) (r.label == Label::Correct ? p : n)++;
  return {p, n};
}

std::string temp_path(const std::string& name) {
  return (std::filesystem::temp_directory_path() / ("actguard_flywheel_" + name)).string();
}

}  // namespace

TEST(Labeling, OracleLabels) {
  GroundTruth gt;
  gt.action = Action::click(30, 30);
  gt.bbox = BBox{10, 10, 50, 50};
  gt.screen = {1080, 2400};
  const std::vector<LabelingStep> steps = {{context(1), Action::click(30, 30), gt},
                                           {context(1), Action::scroll(Direction::Up), gt}};
  const auto res = label_rollouts(steps, MatchConfig{}, {"sim-agent", 1, "sim", std::nullopt});
  ASSERT_EQ(res.records.size(), 2u);
  EXPECT_EQ(res.records[0].label, Label::Correct);
  EXPECT_EQ(res.records[1].label, Label::Wrong);
  EXPECT_EQ(res.records[0].actor_set_text, "Tap at [30, 30]");
  EXPECT_TRUE(res.rejects.empty());
}

TEST(Labeling, OracleErrorsBecomeRejects) {
  GroundTruth gt;
  gt.action = Action::click(30, 30);
  gt.screen = {1080, 2400};
  GroundTruth broken = gt;
  broken.action = Action::press_home();
  broken.action.kind = ActionType::Click;
  const std::vector<LabelingStep> steps = {{context(1), Action::click(30, 30), gt},
                                           {context(2), Action::click(30, 30), broken}};
  const auto res = label_rollouts(steps, MatchConfig{}, {"sim-agent", 1, "sim", std::nullopt});
  EXPECT_EQ(res.records.size(), 1u);
  ASSERT_EQ(res.rejects.size(), 1u);
  EXPECT_EQ(res.rejects[0].index, 1u);
}

TEST(Labeling, RoundTwoNeedsGuide) {
  GroundTruth gt;
  gt.action = Action::press_home();
  gt.screen = {1080, 2400};
  const std::vector<LabelingStep> steps = {{context(1), Action::press_home(), gt}};
  EXPECT_THROW(label_rollouts(steps, MatchConfig{}, {"sim-agent", 2, "sim", std::nullopt}), Error);
}

TEST(RecordId, DependsOnContentOnly) {
  const auto a = record(1, Label::Correct);
  auto b = record(1, Label::Wrong);
  b.source_agent = "other";
  EXPECT_EQ(a.record_id, b.record_id);
  EXPECT_NE(a.record_id, record(2, Label::Correct).record_id);
  EXPECT_EQ(a.record_id.size(), 64u);
}

TEST(Balance, Examples) {
  const auto out = balance(records(10, 4), 7);
  EXPECT_EQ(counts(out), (std::pair<std::size_t, std::size_t>{4, 4}));
  const auto same = records(5, 5);
  auto sorted = same;
  std::sort(sorted.begin(), sorted.end(), [](const auto& x, const auto& y) { return x.record_id < y.record_id; });
  EXPECT_EQ(balance(same, 1), sorted);
  try {
    balance(records(0, 3), 1);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::OneClassOnly);
  }
}

TEST(Balance, ExactlyEqualOnRandomSets) {
  std::mt19937_64 rng(5);
  for (int t = 0; t < 100; ++t) {
    const int p = 1 + static_cast<int>(rng() % 60), n = 1 + static_cast<int>(rng() % 60);
    auto rs = records(p, n, t * 1000);
    std::shuffle(rs.begin(), rs.end(), rng);
    const auto out = balance(rs, rng());
    const auto [cp, cn] = counts(out);
    EXPECT_EQ(cp, cn);
    EXPECT_EQ(cp, static_cast<std::size_t>(std::min(p, n)));
  }
}

TEST(Balance, SeededAndOrderIndependent) {
  auto rs = records(30, 8);
  const auto a = balance(rs, 42);
  std::reverse(rs.begin(), rs.end());
  EXPECT_EQ(balance(rs, 42), a);
  EXPECT_NE(balance(rs, 43), a);
}

TEST(Merge, Table4Counts) {
  DatasetManifest d;
  d.entries = {{"androidcontrol", 1, 68'200, 69'900}};
  d.positives = 68'200;
  d.negatives = 69'900;
  d.total = 138'100;
  DatasetManifest delta;
  delta.entries = {{"androidcontrol", 2, 15'100, 14'000}};
  delta.positives = 15'100;
  delta.negatives = 14'000;
  delta.total = 29'100;
  const auto m = merge_manifests(d, delta);
  EXPECT_EQ(m.positives, 83'300u);
  EXPECT_EQ(m.negatives, 83'900u);
  EXPECT_EQ(m.total, 167'200u);
  EXPECT_EQ(m.entries.size(), 2u);
}

TEST(Merge, EmptyDeltaAndDuplicates) {
  const Dataset d = make_dataset(records(6, 6));
  EXPECT_EQ(merge_rounds(d, {}).records, d.records);

  auto delta = records(3, 3, 500, 2);
  auto dup = d.records.front();
  dup.round = 2;
  dup.guided_by = "icm";
  dup.label = Label::Wrong;
  delta.push_back(dup);
  delta.push_back(record(900, Label::Correct, 2));
  const auto merged = merge_rounds(d, delta);
  EXPECT_EQ(merged.records.size(), d.records.size() + delta.size() - 1);
  EXPECT_EQ(merged.manifest.total, merged.records.size());
}

TEST(Merge, Idempotent) {
  const Dataset d = make_dataset(records(6, 6));
  const auto delta = records(4, 4, 100, 2);
  const auto once = merge_rounds(d, delta);
  const auto twice = merge_rounds(once, delta);
  EXPECT_EQ(twice.records, once.records);
  EXPECT_EQ(twice.manifest, once.manifest);
}

TEST(Merge, Errors) {
  const Dataset d = make_dataset(records(2, 2));
  try {
    merge_rounds(d, records(1, 1, 50, 1));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::RoundMismatch);
  }
  const auto unbalanced = records(3, 1, 50, 2);
  try {
    merge_rounds(d, unbalanced);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::UnbalancedDelta);
  }
  EXPECT_EQ(merge_rounds(d, unbalanced, MergeOptions{false}).records.size(), 8u);
}

TEST(Manifest, CountsAndChecksum) {
  const auto rs = records(3, 2);
  const auto m = build_manifest(rs);
  EXPECT_EQ(m.positives, 3u);
  EXPECT_EQ(m.negatives, 2u);
  EXPECT_EQ(m.total, 5u);
  EXPECT_EQ(m.checksum.size(), 64u);
  auto reversed = rs;
  std::reverse(reversed.begin(), reversed.end());
  EXPECT_EQ(build_manifest(reversed).checksum, m.checksum);
  EXPECT_EQ(manifest_from_json(manifest_to_json(m)), m);
}

TEST(Jsonl, RoundTrip) {
  std::vector<FlywheelRecord> rs = records(50, 50);
  rs[3].action = Action::type_text("multi\nline \"quoted\"");
  rs[3].record_id = compute_record_id(rs[3].context, rs[3].action);
  rs[4].context.step_plan = "open Settings";
  rs[4].context.history = {"step 1: Home"};
  rs[4].record_id = compute_record_id(rs[4].context, rs[4].action);
  auto r2 = records(1, 0, 700, 2);
  rs.push_back(r2.front());
  const auto path = temp_path("roundtrip.jsonl");
  export_jsonl(path, rs);
  EXPECT_EQ(import_jsonl(path), rs);
  std::filesystem::remove(path);
}

TEST(Jsonl, MissingLabelReportsLine) {
  const auto rs = records(2, 1);
  std::string content;
  for (const auto& r : rs) content += to_jsonl_line(r);
  auto j = nlohmann::json::parse(to_jsonl_line(rs[0]));
  j.erase("label");
  content += j.dump() + "\n";
  try {
    parse_jsonl(content);
    FAIL();
  } catch (const SchemaViolation& e) {
    EXPECT_EQ(e.line_no(), 4u);
  }
}

TEST(Jsonl, ExtraFieldsIgnored) {
  const auto r = records(1, 0).front();
  auto j = nlohmann::json::parse(to_jsonl_line(r));
  j["future_field"] = {1, 2, 3};
  const auto parsed = parse_jsonl(j.dump() + "\n");
  ASSERT_EQ(parsed.size(), 1u);
  EXPECT_EQ(parsed[0], r);
}

TEST(Jsonl, RecordIdMustMatchContent) {
  auto r = records(1, 0).front();
  auto j = nlohmann::json::parse(to_jsonl_line(r));
  j["action_canonical"] = "click(1,1)";
  EXPECT_THROW(parse_jsonl(j.dump() + "\n"), SchemaViolation);
}
