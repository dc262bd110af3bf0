#include <gtest/gtest.h>

#include <atomic>
#include <filesystem>
#include <set>

#include "actguard/error.hpp"
#include "actguard/rollout.hpp"
#include "mock_server.hpp"
#include "test_util.hpp"

using namespace actguard;
using std::chrono::milliseconds;

namespace {

const DialectConfig kV1{DialectId::UiTarsV1, 1000};
const DialectConfig kV15{DialectId::UiTarsV15, std::nullopt};

WrongModel only(ErrorMode m) {
  WrongModel w{0, 0, 0, 0, 0, 100.0};
  switch (m) {
    case ErrorMode::WrongType: w.wrong_type = 1; break;
    case ErrorMode::OffsetClick: w.offset_click = 1; break;
    case ErrorMode::WrongDirection: w.wrong_direction = 1; break;
    case ErrorMode::WrongText: w.wrong_text = 1; break;
    case ErrorMode::Malformed: w.malformed = 1; break;
  }
  return w;
}

StepContext ctx(ScreenDims dims = {1000, 1000}) {
  StepContext c;
  c.screenshot = {"", std::string(64, 'f'), dims};
  c.global_instruction = "do the thing";
  return c;
}

GroundTruth click_truth(ScreenDims dims = {1000, 1000}) {
  GroundTruth gt;
  gt.action = Action::click(30, 30);
  gt.bbox = BBox{10, 10, 50, 50};
  gt.screen = dims;
  return gt;
}

GroundTruth plain(Action a, ScreenDims dims = {1000, 1000}) {
  GroundTruth gt;
  gt.action = std::move(a);
  gt.screen = dims;
  return gt;
}

std::vector<OfflineEpisode> episodes(std::size_t n, std::uint64_t seed) {
  EpisodeGenConfig cfg;
  cfg.n_episodes = n;
  cfg.seed = seed;
  return generate_episodes(default_sim_world(), cfg);
}

// Judges every candidate by a fixed verdict list, in order.
class FixedCritic final : public CriticBackend {
 public:
  explicit FixedCritic(std::vector<Judgment> js) : js_(std::move(js)) {}
  const std::string& id() const override { return id_; }
  bool deterministic() const override { return true; }
  Judgment judge(const JudgeRequest& req) const override { return js_.at(req.key.candidate); }

 private:
  std::vector<Judgment> js_;
  std::string id_ = "fixed";
};

// Returns canned completions in order.
class CannedAgent final : public AgentBackend {
 public:
  explicit CannedAgent(std::vector<std::string> texts) : texts_(std::move(texts)) {}
  const std::string& id() const override { return id_; }
  const DialectConfig& dialect() const override { return dialect_; }
  std::vector<std::string> complete_n(const AgentCall& call) const override {
    return {texts_.begin(), texts_.begin() + call.params.n};
  }

 private:
  std::vector<std::string> texts_;
  std::string id_ = "canned";
  DialectConfig dialect_{DialectId::UiTarsV15, std::nullopt};
};

class DownAgent final : public AgentBackend {
 public:
  const std::string& id() const override { return id_; }
  const DialectConfig& dialect() const override { return dialect_; }
  std::vector<std::string> complete_n(const AgentCall&) const override {
    throw Error(ErrorCode::BackendUnavailable, "down");
  }

 private:
  std::string id_ = "down";
  DialectConfig dialect_{DialectId::UiTarsV15, std::nullopt};
};

Judgment J(Label l, double c) {
  Judgment j;
  j.label = l;
  j.confidence = c;
  return j;
}

}  // namespace

TEST(SimAgent, PerfectCenterClick) {
  SimAgentConfig cfg;
  cfg.p_correct = 1.0;
  cfg.jitter = false;
  cfg.dialect = kV1;
  EXPECT_EQ(simulate_completion(cfg, ctx(), click_truth(), {1, 1, 0}), "Action: click(point='(30 30)')");
}

TEST(SimAgent, PerfectAgentAllCandidatesCorrect) {
  SimAgentConfig cfg;
  cfg.p_correct = 1.0;
  const SimAgentBackend agent(cfg);
  const auto c = ctx();
  const auto gt = click_truth();
  const auto cands = sample_n(agent, AgentCall{c, TaskLevel::High, SamplingParams{3, 1.0, 30, 0.8}, &gt, 4, 1});
  ASSERT_EQ(cands.size(), 3u);
  for (const auto& cand : cands) {
    ASSERT_TRUE(cand.action);
    EXPECT_TRUE(match_step(*cand.action, gt, MatchConfig{}).step_ok) << cand.text;
  }
}

TEST(SimAgent, OffsetClicksMissAndRepeat) {
  SimAgentConfig cfg;
  cfg.p_correct = 0.0;
  cfg.wrong_model = only(ErrorMode::OffsetClick);
  cfg.seed = 11;
  const SimAgentBackend agent(cfg);
  const auto c = ctx();
  const auto gt = click_truth();
  const AgentCall call{c, TaskLevel::High, SamplingParams{8, 1.0, 30, 0.8}, &gt, 4, 1};
  const auto a = sample_n(agent, call);
  ASSERT_EQ(a.size(), 8u);
  for (const auto& cand : a) {
    ASSERT_TRUE(cand.action);
    EXPECT_EQ(cand.action->kind, ActionType::Click);
    EXPECT_FALSE(match_step(*cand.action, gt, MatchConfig{}).step_ok);
  }
  EXPECT_EQ(sample_n(agent, call), a);
}

TEST(SimAgent, WrongDirectionIsComplement) {
  SimAgentConfig cfg;
  cfg.p_correct = 0.0;
  cfg.wrong_model = only(ErrorMode::WrongDirection);
  cfg.dialect = kV15;
  const auto gt = plain(Action::scroll(Direction::Up));
  std::set<Direction> seen;
  for (std::uint64_t i = 0; i < 200; ++i) {
    const auto text = simulate_completion(cfg, ctx(), gt, {2, 3, i});
    const auto a = parse(text, DialectId::UiTarsV15).action;
    ASSERT_EQ(a.kind, ActionType::Scroll) << text;
    EXPECT_NE(*a.direction, Direction::Up);
    seen.insert(*a.direction);
  }
  EXPECT_EQ(seen.size(), 3u);
}

TEST(SimAgent, DeterministicPerKey) {
  SimAgentConfig cfg;
  cfg.seed = 5;
  const auto gt = click_truth();
  std::set<std::string> distinct;
  for (std::uint64_t i = 0; i < 50; ++i) {
    const auto t = simulate_completion(cfg, ctx(), gt, {9, 1, i});
    EXPECT_EQ(simulate_completion(cfg, ctx(), gt, {9, 1, i}), t);
    distinct.insert(t);
  }
  EXPECT_GT(distinct.size(), 10u);
}

TEST(SimAgent, CorrectRateMatchesConfig) {
  SimAgentConfig cfg;
  cfg.p_correct = 0.3;
  cfg.dialect = kV15;
  const auto gt = click_truth({1080, 2400});
  const auto c = ctx({1080, 2400});
  int ok = 0;
  const int n = 20'000;
  for (int i = 0; i < n; ++i) {
    const auto text = simulate_completion(cfg, c, gt, {1, 1, static_cast<std::uint64_t>(i)});
    const auto r = try_parse(text, DialectId::UiTarsV15);
    if (const auto* p = std::get_if<ParsedOutput>(&r)) ok += match_step(normalize(p->action, kV15, c.screenshot.dims), gt, MatchConfig{}).step_ok;
  }
  // 4 sigma of a Bernoulli(0.3) mean over 20k draws
  EXPECT_NEAR(static_cast<double>(ok) / n, 0.3, 4 * std::sqrt(0.3 * 0.7 / n));
}

TEST(SimAgent, ConfigValidation) {
  SimAgentConfig cfg;
  cfg.p_correct = 1.5;
  EXPECT_THROW(validate(cfg), Error);
  cfg.p_correct = 0.5;
  cfg.wrong_model.wrong_type = 0.5;
  EXPECT_THROW(validate(cfg), Error);
}

TEST(SampleN, SingleCandidateAndParseFailuresInPlace) {
  const CannedAgent agent({"Action: press_back()", "garbage", "Action: press_home()"});
  const auto c = ctx();
  const auto gt = plain(Action::press_home());
  EXPECT_EQ(sample_n(agent, AgentCall{c, TaskLevel::High, SamplingParams{1, 1.0, 30, 0.8}, &gt, 0, 1}).size(), 1u);
  const auto three = sample_n(agent, AgentCall{c, TaskLevel::High, SamplingParams{3, 1.0, 30, 0.8}, &gt, 0, 1});
  ASSERT_EQ(three.size(), 3u);
  EXPECT_EQ(three[0].action, Action::press_back());
  EXPECT_FALSE(three[1].action);
  EXPECT_TRUE(three[1].parse_error);
  EXPECT_EQ(three[2].action, Action::press_home());
}

TEST(GuidedStep, PicksCriticFavourite) {
  const CannedAgent agent({"Action: press_back()", "Action: press_home()", "Action: wait()"});
  const FixedCritic critic({J(Label::Wrong, 0.9), J(Label::Correct, 0.6), J(Label::Correct, 0.8)});
  const auto c = ctx();
  const auto gt = plain(Action::wait());
  const auto r = run_guided_step(agent, &critic, {c, gt, "e", 1}, SamplingParams{3, 1.0, 30, 0.8}, MatchConfig{});
  EXPECT_EQ(r.chosen_index, 2);
  EXPECT_EQ(r.chosen, Action::wait());
  EXPECT_TRUE(r.step_judgment.step_ok);
  EXPECT_EQ(r.pass_at_n_flags, (std::vector<bool>{false, false, true}));
}

TEST(GuidedStep, AllRejectedFallsBackToFirst) {
  const CannedAgent agent({"Action: press_back()", "Action: press_home()"});
  const FixedCritic critic({J(Label::Wrong, 0.1), J(Label::Wrong, 0.9)});
  const auto c = ctx();
  const auto gt = plain(Action::wait());
  const auto r = run_guided_step(agent, &critic, {c, gt, "e", 1}, SamplingParams{2, 1.0, 30, 0.8}, MatchConfig{});
  EXPECT_EQ(r.chosen_index, 0);
  EXPECT_FALSE(r.step_judgment.step_ok);
}

TEST(GuidedStep, UnparsedCandidateJudgedWrong) {
  const CannedAgent agent({"nonsense", "Action: wait()"});
  const auto oracle = make_oracle_critic();
  const auto c = ctx();
  const auto gt = plain(Action::wait());
  const auto r = run_guided_step(agent, oracle.get(), {c, gt, "e", 1}, SamplingParams{2, 1.0, 30, 0.8}, MatchConfig{});
  ASSERT_TRUE(r.candidates[0].judgment);
  EXPECT_TRUE(r.candidates[0].judgment->failed);
  EXPECT_EQ(r.chosen_index, 1);
}

TEST(GuidedStep, OracleCriticPicksCorrectWheneverOneExists) {
  SimAgentConfig cfg;
  cfg.p_correct = 0.3;
  const SimAgentBackend agent(cfg);
  const auto oracle = make_oracle_critic();
  for (const auto& ep : episodes(40, 3)) {
    for (std::size_t k = 0; k < ep.steps.size(); ++k) {
      const auto& s = ep.steps[k];
      const auto r = run_guided_step(agent, oracle.get(), {s.context, s.truth, ep.episode_id, k + 1},
                                     SamplingParams{8, 1.0, 30, 0.8}, MatchConfig{});
      EXPECT_EQ(r.step_judgment.step_ok, r.pass_at_n_flags.back());
      for (std::size_t i = 1; i < r.pass_at_n_flags.size(); ++i) {
        EXPECT_LE(r.pass_at_n_flags[i - 1], r.pass_at_n_flags[i]);
      }
    }
  }
}

TEST(GuidedStep, BackendOutageMarksStepFailed) {
  const DownAgent agent;
  const auto c = ctx();
  const auto gt = click_truth();
  const auto r = run_guided_step(agent, nullptr, {c, gt, "e", 1}, SamplingParams{4, 1.0, 30, 0.8}, MatchConfig{});
  EXPECT_TRUE(r.error);
  EXPECT_EQ(r.chosen_index, -1);
  EXPECT_FALSE(r.step_judgment.step_ok);
  EXPECT_EQ(r.pass_at_n_flags, std::vector<bool>(4, false));
}

TEST(Benchmark, BaseIsGreedySingleSample) {
  SimAgentConfig cfg;
  const SimAgentBackend agent(cfg);
  const auto eps = episodes(5, 1);
  const auto res = run_benchmark(eps, agent, nullptr, SamplingParams{}, MatchConfig{});
  for (const auto& s : res.steps) EXPECT_EQ(s.candidates.size(), 1u);
  EXPECT_EQ(res.report.pass_at_n.size(), 1u);
  EXPECT_EQ(res.report.pass_at_n.at(1), res.report.sr);
  BenchmarkOptions keep;
  keep.greedy_without_critic = false;
  const auto collect = run_benchmark(eps, agent, nullptr, SamplingParams{}, MatchConfig{}, keep);
  for (const auto& s : collect.steps) EXPECT_EQ(s.candidates.size(), 8u);
}

TEST(Benchmark, IdenticalAcrossWorkerCounts) {
  SimAgentConfig cfg;
  cfg.seed = 21;
  const SimAgentBackend agent(cfg);
  const ScriptedCritic critic({0.8, 4, ConfidenceModel::Uniform});
  const auto eps = episodes(60, 2);
  BenchmarkOptions one, many;
  many.workers = 7;
  const auto a = run_benchmark(eps, agent, &critic, SamplingParams{}, MatchConfig{}, one);
  const auto b = run_benchmark(eps, agent, &critic, SamplingParams{}, MatchConfig{}, many);
  EXPECT_EQ(a.report, b.report);
  EXPECT_EQ(traces_to_jsonl(a.steps), traces_to_jsonl(b.steps));
}

TEST(Benchmark, StepOrderFollowsEpisodes) {
  SimAgentConfig cfg;
  const SimAgentBackend agent(cfg);
  const auto eps = episodes(4, 8);
  const auto res = run_benchmark(eps, agent, nullptr, SamplingParams{}, MatchConfig{});
  std::size_t i = 0;
  for (const auto& ep : eps) {
    for (std::size_t k = 0; k < ep.steps.size(); ++k, ++i) {
      EXPECT_EQ(res.steps[i].episode_id, ep.episode_id);
      EXPECT_EQ(res.steps[i].step, k + 1);
    }
  }
  EXPECT_EQ(res.report.n_steps, i);
}

TEST(Benchmark, LowLevelNeedsPlans) {
  SimAgentConfig cfg;
  const SimAgentBackend agent(cfg);
  auto eps = episodes(2, 1);
  for (auto& ep : eps) {
    for (auto& s : ep.steps) s.context.step_plan.reset();
  }
  BenchmarkOptions low;
  low.level = TaskLevel::Low;
  try {
    run_benchmark(eps, agent, nullptr, SamplingParams{}, MatchConfig{}, low);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::MissingStepPlan);
  }
}

TEST(PassAtN, CountsAndErrors) {
  std::vector<StepResult> steps(4);
  steps[0].pass_at_n_flags = {false, true, true, true};
  steps[1].pass_at_n_flags = {true, true, true, true};
  steps[2].pass_at_n_flags = {false, false, false, false};
  steps[3].pass_at_n_flags = {false, false, false, true};
  const auto p = pass_at_n(steps, 4);
  EXPECT_EQ(p, (std::map<int, double>{{1, 25.0}, {2, 50.0}, {4, 75.0}}));
  EXPECT_EQ(pass_at_n(steps, 3).count(3), 1u);
  steps[3].pass_at_n_flags.pop_back();
  try {
    pass_at_n(steps, 4);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::MissingFlags);
  }
}

TEST(Traces, JsonlRoundTrip) {
  SimAgentConfig cfg;
  cfg.wrong_model = WrongModel{0.2, 0.2, 0.2, 0.2, 0.2, 100.0};
  const SimAgentBackend agent(cfg);
  const ScriptedCritic critic({0.9, 1, ConfidenceModel::Uniform});
  const auto res = run_benchmark(episodes(10, 4), agent, &critic, SamplingParams{}, MatchConfig{});
  auto steps = res.steps;
  steps[0].error = "BackendUnavailable: test";
  const auto text = traces_to_jsonl(steps);
  const auto back = parse_traces(text);
  ASSERT_EQ(back.size(), steps.size());
  EXPECT_EQ(traces_to_jsonl(back), text);
  for (std::size_t i = 0; i < steps.size(); ++i) {
    EXPECT_EQ(back[i].chosen, steps[i].chosen);
    EXPECT_EQ(back[i].pass_at_n_flags, steps[i].pass_at_n_flags);
    ASSERT_EQ(back[i].candidates.size(), steps[i].candidates.size());
    for (std::size_t k = 0; k < steps[i].candidates.size(); ++k) {
      EXPECT_EQ(back[i].candidates[k].judgment, steps[i].candidates[k].judgment);
      EXPECT_EQ(back[i].candidates[k].candidate.action, steps[i].candidates[k].candidate.action);
    }
  }
  EXPECT_THROW(parse_traces(text + "{\"episode_id\": 3}\n"), SchemaViolation);
}

TEST(Traces, LabelingStepsFromTraces) {
  SimAgentConfig cfg;
  const SimAgentBackend agent(cfg);
  const ScriptedCritic critic({0.8, 2, ConfidenceModel::Calibrated});
  const auto eps = episodes(5, 6);
  const auto res = run_benchmark(eps, agent, &critic, SamplingParams{}, MatchConfig{});
  std::size_t parsed = 0, accepted = 0;
  for (const auto& s : res.steps) {
    for (const auto& c : s.candidates) {
      parsed += c.candidate.action.has_value();
      accepted += c.candidate.action && c.judgment->label == Label::Correct;
    }
  }
  EXPECT_EQ(labeling_steps_from_traces(res.steps, eps, false).size(), parsed);
  EXPECT_EQ(labeling_steps_from_traces(res.steps, eps, true).size(), accepted);
  EXPECT_THROW(labeling_steps_from_traces(res.steps, std::span<const OfflineEpisode>(eps).first(1), false), Error);
}

TEST(ParallelFor, CoversEveryIndexAndRethrows) {
  std::vector<std::atomic<int>> hits(1000);
  parallel_for(hits.size(), 8, [&](std::size_t i) { hits[i]++; });
  for (const auto& h : hits) EXPECT_EQ(h.load(), 1);
  EXPECT_THROW(parallel_for(10, 3, [](std::size_t i) {
                 if (i == 7) throw Error(ErrorCode::InvalidArgument, "boom");
               }),
               Error);
}

TEST(RemoteAgent, SamplesOverHttp) {
  MockChatServer server([](const nlohmann::json&, int i) {
    return std::pair{200, MockChatServer::completion(i % 2 ? "Action: press_back()" : "Thought: go\nAction: click(point='<|box_start|>(30 30)<|box_end|>')")};
  });
  const auto path = (std::filesystem::temp_directory_path() / "actguard_rollout_shot.png").string();
  write_bytes(path, encode_image(Image(100, 100, {0, 0, 0}), ImageFormat::Png));
  EndpointConfig ep;
  ep.base_url = server.base_url();
  ep.model = "agent-model";
  const RemoteAgent agent(ep, kV15, RetryPolicy{1, milliseconds(1), 1.0});
  auto c = ctx({100, 100});
  c.screenshot.path = path;
  c.step_plan = "tap it";
  const auto gt = click_truth({100, 100});
  const auto cands = sample_n(agent, AgentCall{c, TaskLevel::Low, SamplingParams{4, 0.7, 20, 0.9}, &gt, 0, 1});
  ASSERT_EQ(cands.size(), 4u);
  EXPECT_EQ(cands[0].action, Action::click(30, 30));
  EXPECT_EQ(cands[1].action, Action::press_back());
  const auto bodies = server.bodies();
  ASSERT_EQ(bodies.size(), 4u);
  EXPECT_EQ(bodies[0]["temperature"], 0.7);
  EXPECT_EQ(bodies[0]["top_k"], 20);
  EXPECT_EQ(bodies[0]["top_p"], 0.9);
  EXPECT_EQ(bodies[0]["messages"][0]["role"], "system");
  EXPECT_NE(bodies[0].dump().find("You need to: tap it"), std::string::npos);

  sample_n(agent, AgentCall{c, TaskLevel::High, SamplingParams{1, 0.7, 20, 0.9}, &gt, 0, 1});
  const auto greedy = server.bodies().back();
  EXPECT_EQ(greedy["temperature"], 0.0);
  EXPECT_FALSE(greedy.contains("top_k"));
  std::filesystem::remove(path);
}

TEST(RemoteAgent, OutageBecomesFailedStep) {
  int port;
  {
    httplib::Server probe;
    port = probe.bind_to_any_port("127.0.0.1");
  }
  const auto path = (std::filesystem::temp_directory_path() / "actguard_rollout_shot2.png").string();
  write_bytes(path, encode_image(Image(100, 100, {0, 0, 0}), ImageFormat::Png));
  EndpointConfig ep;
  ep.base_url = "http://127.0.0.1:" + std::to_string(port);
  ep.timeout = milliseconds(300);
  const RemoteAgent agent(ep, kV15, RetryPolicy{2, milliseconds(1), 1.0});
  auto c = ctx({100, 100});
  c.screenshot.path = path;
  const auto gt = click_truth({100, 100});
  const auto r = run_guided_step(agent, nullptr, {c, gt, "e", 1}, SamplingParams{2, 1.0, 30, 0.8}, MatchConfig{});
  ASSERT_TRUE(r.error);
  EXPECT_NE(r.error->find("BackendUnavailable"), std::string::npos);
  std::filesystem::remove(path);
}
