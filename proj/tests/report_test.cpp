#include <gtest/gtest.h>

#include <sstream>

#include <nlohmann/json.hpp>

#include "actguard/error.hpp"
#include "actguard/report.hpp"
#include "test_util.hpp"

using namespace actguard;

namespace {

std::vector<OfflineEpisode> episodes(std::size_t n, std::uint64_t seed) {
  EpisodeGenConfig cfg;
  cfg.n_episodes = n;
  cfg.seed = seed;
  return generate_episodes(default_sim_world(), cfg);
}

std::vector<StepResult> run(const CriticBackend* critic, double p_correct, std::uint64_t seed) {
  SimAgentConfig cfg;
  cfg.p_correct = p_correct;
  cfg.seed = seed;
  const SimAgentBackend agent(cfg);
  return run_benchmark(episodes(60, seed), agent, critic, SamplingParams{}, MatchConfig{}).steps;
}

std::vector<std::vector<std::string>> csv_rows(const std::string& text) {
  std::vector<std::vector<std::string>> rows;
  std::istringstream in(text);
  std::string line;
  while (std::getline(in, line)) {
    std::vector<std::string> cells;
    std::string cell;
    std::istringstream ls(line);
    while (std::getline(ls, cell, ',')) cells.push_back(cell);
    if (!line.empty() && line.back() == ',') cells.emplace_back();
    rows.push_back(std::move(cells));
  }
  return rows;
}

}  // namespace

TEST(PassAtNSeries, OracleSelectionAttainsPrefixBound) {
  const auto oracle = make_oracle_critic();
  const auto traces = run(oracle.get(), 0.3, 1);
  const auto rows = emit_pass_at_n(traces);
  ASSERT_EQ(rows.size(), 4u);
  for (const auto& r : rows) EXPECT_EQ(r.guided_sr_at_n, r.pass_at_n) << "n=" << r.n;
  EXPECT_DOUBLE_EQ(rows.back().guided_sr_at_n, metrics_from_traces(traces).sr);
}

TEST(PassAtNSeries, FirstRowIsSingleCandidate) {
  const ScriptedCritic critic({0.8, 2, ConfidenceModel::Uniform});
  const auto guided = run(&critic, 0.5, 2);
  const auto rows = emit_pass_at_n(guided);
  EXPECT_EQ(rows[0].n, 1);
  EXPECT_EQ(rows[0].pass_at_n, rows[0].guided_sr_at_n);
  std::size_t first_ok = 0;
  for (const auto& t : guided) first_ok += t.candidates[0].oracle_ok;
  EXPECT_DOUBLE_EQ(rows[0].pass_at_n, 100.0 * static_cast<double>(first_ok) / static_cast<double>(guided.size()));

  const auto base = run(nullptr, 0.5, 2);
  const auto base_rows = emit_pass_at_n(base);
  ASSERT_EQ(base_rows.size(), 1u);
  EXPECT_DOUBLE_EQ(base_rows[0].pass_at_n, metrics_from_traces(base).sr);
}

TEST(PassAtNSeries, MonotoneAndSandwiched) {
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    const ScriptedCritic critic({0.9, seed, ConfidenceModel::Calibrated});
    const auto rows = emit_pass_at_n(run(&critic, 0.5, seed));
    for (std::size_t i = 1; i < rows.size(); ++i) {
      EXPECT_LE(rows[i - 1].pass_at_n, rows[i].pass_at_n);
    }
    for (const auto& r : rows) EXPECT_LE(r.guided_sr_at_n, r.pass_at_n);
  }
}

TEST(PassAtNSeries, MissingFlags) {
  auto traces = run(nullptr, 0.5, 3);
  traces[2].pass_at_n_flags.clear();
  try {
    emit_pass_at_n(traces);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::MissingFlags);
  }
}

TEST(Comparison, DeltasAreGuidedMinusBase) {
  const auto oracle = make_oracle_critic();
  const ScriptedCritic s80({0.8, 5, ConfidenceModel::Uniform});
  const auto base = config_report("base", run(nullptr, 0.5, 4));
  const auto r = compare(base, {config_report("oracle", run(oracle.get(), 0.5, 4)),
                                config_report("scripted-80", run(&s80, 0.5, 4))});
  ASSERT_EQ(r.deltas.size(), 2u);
  for (std::size_t i = 0; i < 2; ++i) {
    EXPECT_EQ(r.deltas[i].name, r.guided[i].name);
    EXPECT_DOUBLE_EQ(r.deltas[i].sr, r.guided[i].metrics.sr - base.metrics.sr);
    EXPECT_DOUBLE_EQ(r.deltas[i].type_acc, r.guided[i].metrics.type_acc - base.metrics.type_acc);
    EXPECT_DOUBLE_EQ(*r.deltas[i].gr_acc, *r.guided[i].metrics.gr_acc - *base.metrics.gr_acc);
  }
  EXPECT_GT(r.deltas[0].sr, 0.0);

  const auto j = nlohmann::json::parse(comparison_to_json(r));
  EXPECT_EQ(j["guided"].size(), 2u);
  EXPECT_DOUBLE_EQ(j["deltas"][1]["sr"].get<double>(),
                   j["guided"][1]["metrics"]["sr"].get<double>() - j["base"]["metrics"]["sr"].get<double>());
  EXPECT_EQ(j["guided"][0]["pass_at_n_series"].size(), 4u);
}

TEST(Comparison, CsvLayout) {
  const auto oracle = make_oracle_critic();
  const auto r = compare(config_report("base", run(nullptr, 0.5, 6)), {config_report("oracle", run(oracle.get(), 0.5, 6))});
  const auto table = csv_rows(comparison_table_csv(r));
  ASSERT_EQ(table.size(), 3u);
  EXPECT_EQ(table[0].size(), 9u);
  EXPECT_EQ(table[1][0], "base");
  EXPECT_EQ(table[1][8], "");
  EXPECT_EQ(table[2][0], "oracle");
  EXPECT_NEAR(std::stod(table[2][8]), r.deltas[0].sr, 5e-5);
  EXPECT_NEAR(std::stod(table[2][3]), r.guided[0].metrics.sr, 5e-5);

  const auto pass = csv_rows(pass_at_n_csv(r));
  ASSERT_EQ(pass.size(), 1u + 1u + 4u);
  EXPECT_EQ(pass[0], (std::vector<std::string>{"config", "n", "pass_at_n", "guided_sr_at_n"}));
  EXPECT_EQ(pass[2][0], "oracle");
  EXPECT_EQ(pass[5][1], "8");
}

TEST(Comparison, ReportIsReproducible) {
  const ScriptedCritic critic({0.8, 7, ConfidenceModel::Uniform});
  const auto traces = run(&critic, 0.5, 7);
  const auto reparsed = parse_traces(traces_to_jsonl(traces));
  const auto a = compare(config_report("base", run(nullptr, 0.5, 7)), {config_report("g", traces)});
  const auto b = compare(config_report("base", run(nullptr, 0.5, 7)), {config_report("g", reparsed)});
  EXPECT_EQ(comparison_to_json(a), comparison_to_json(b));
  EXPECT_EQ(comparison_table_csv(a), comparison_table_csv(b));
  EXPECT_EQ(pass_at_n_csv(a), pass_at_n_csv(b));
}
