#include <cstdio>
#include <filesystem>
#include <iostream>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "actguard/config.hpp"
#include "actguard/digest.hpp"
#include "actguard/episode.hpp"
#include "actguard/error.hpp"
#include "actguard/flywheel.hpp"
#include "actguard/image.hpp"
#include "actguard/json_io.hpp"
#include "actguard/reference_critic.hpp"
#include "actguard/report.hpp"
#include "actguard/rollout.hpp"
#include "actguard/sim_agent.hpp"

using namespace actguard;
using ojson = nlohmann::ordered_json;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitOther = 1;
constexpr int kExitConfig = 2;
constexpr int kExitBackend = 3;

void print_error(std::string_view code, std::string_view message) {
  const ojson j = {{"error", std::string(code)}, {"message", std::string(message)}};
  std::cerr << j.dump() << "\n";
}

std::size_t parse_workers(const std::string& s) {
  if (s == "auto") return 0;
  try {
    std::size_t pos = 0;
    const long v = std::stol(s, &pos);
    if (pos == s.size() && v >= 1) return static_cast<std::size_t>(v);
  } catch (const std::exception&) {
  }
  throw Error(ErrorCode::ConfigError, "--workers must be a positive integer or 'auto'");
}

TaskLevel parse_level(const std::string& s) {
  const auto l = task_level_from_string(s);
  if (!l) throw Error(ErrorCode::ConfigError, "--level must be 'high' or 'low'");
  return *l;
}

void ensure_parent(const std::string& path) {
  const auto parent = std::filesystem::path(path).parent_path();
  if (!parent.empty()) std::filesystem::create_directories(parent);
}

struct RunArgs {
  std::string config_path;
  std::string agent_id;
  std::string critic_id;
  std::string critic_params;
  std::string episodes_path;
  std::string level;
  std::string out;
  std::string metrics_out;
  std::string workers = "1";
  std::uint64_t seed = 0;
  int n = 0;
};

// Input paths are checked after the command has pruned the config to what it uses.
PipelineConfig read_config(const std::string& path) {
  std::string text;
  try {
    text = read_file(path);
  } catch (const std::exception& e) {
    throw Error(ErrorCode::ConfigError, "cannot read '" + path + "': " + e.what());
  }
  return config_from_json(text);
}

void add_run_options(CLI::App* cmd, RunArgs& a, bool with_critic, bool critic_required) {
  cmd->add_option("--config", a.config_path, "pipeline config JSON")->required();
  cmd->add_option("--agent", a.agent_id, "agent id from the config")->required();
  if (with_critic) {
    auto* c = cmd->add_option("--critic", a.critic_id, "critic id from the config");
    if (critic_required) c->required();
    cmd->add_option("--critic-params", a.critic_params, "reference critic parameters (overrides params_path)");
  }
  cmd->add_option("--episodes", a.episodes_path, "episode JSONL (defaults to episodes_path in the config)");
  cmd->add_option("--level", a.level, "task level: high or low (defaults to the config)");
  cmd->add_option("--out", a.out, "trace JSONL output")->required();
  cmd->add_option("--metrics", a.metrics_out, "metrics JSON output");
  cmd->add_option("--seed", a.seed, "seed for simulated backends")->required();
  cmd->add_option("--workers", a.workers, "worker threads or 'auto'")->default_val("1");
  cmd->add_option("--n", a.n, "candidates per step (defaults to sampling.n)");
}

enum class RunMode { Eval, Guide, Collect };

int run_traces(const RunArgs& a, RunMode mode) {
  PipelineConfig cfg = read_config(a.config_path);
  const AgentSpec agent_spec = find_agent(cfg, a.agent_id);
  cfg.agents = {agent_spec};
  std::vector<CriticSpec> used;
  if (!a.critic_id.empty()) used.push_back(find_critic(cfg, a.critic_id));
  else if (!a.critic_params.empty()) throw Error(ErrorCode::ConfigError, "--critic-params needs --critic");
  if (!a.critic_params.empty()) used.front().params_path = a.critic_params;
  cfg.critics = used;
  if (!a.episodes_path.empty()) cfg.episodes_path = a.episodes_path;
  if (!a.level.empty()) cfg.level = parse_level(a.level);
  if (a.n != 0) cfg.sampling.n = a.n;
  validate(cfg, true);
  if (!cfg.episodes_path) throw Error(ErrorCode::ConfigError, "no episodes given (--episodes or episodes_path)");

  const auto episodes = load_episodes(*cfg.episodes_path);
  const auto agent = make_agent(cfg, find_agent(cfg, a.agent_id), a.seed);
  std::unique_ptr<CriticBackend> critic;
  if (!a.critic_id.empty()) critic = make_critic(cfg, find_critic(cfg, a.critic_id), a.seed);

  BenchmarkOptions opts;
  opts.level = cfg.level;
  opts.workers = parse_workers(a.workers);
  opts.som = cfg.som;
  opts.greedy_without_critic = mode != RunMode::Collect;
  const auto result = run_benchmark(episodes, *agent, critic.get(), cfg.sampling, cfg.match, opts);

  ensure_parent(a.out);
  write_file_atomic(a.out, traces_to_jsonl(result.steps));
  if (!a.metrics_out.empty()) {
    ensure_parent(a.metrics_out);
    write_file_atomic(a.metrics_out, to_json(result.report).dump(2) + "\n");
  }
  const char* name = mode == RunMode::Eval ? "eval" : mode == RunMode::Guide ? "guide" : "collect";
  const bool partial = result.failed_steps > 0;
  const ojson manifest = {{"command", name},
                          {"status", partial ? "partial" : "complete"},
                          {"agent", a.agent_id},
                          {"critic", a.critic_id.empty() ? ojson(nullptr) : ojson(a.critic_id)},
                          {"seed", a.seed},
                          {"steps", result.steps.size()},
                          {"failed_steps", result.failed_steps},
                          {"traces", a.out},
                          {"traces_sha256", sha256_file(a.out)}};
  write_file_atomic(a.out + ".manifest.json", manifest.dump(2) + "\n");
  if (partial) {
    print_error(to_string(ErrorCode::BackendUnavailable),
                std::to_string(result.failed_steps) + " of " + std::to_string(result.steps.size()) +
                    " steps failed after retries; partial results in " + a.out + ".manifest.json");
    return kExitBackend;
  }
  return kExitOk;
}

void write_records(const std::string& path, std::span<const FlywheelRecord> records) {
  ensure_parent(path);
  export_jsonl(path, records);
  write_file_atomic(path + ".manifest.json", manifest_to_json(build_manifest(records)));
}

int exit_code_for(ErrorCode code) {
  switch (code) {
    case ErrorCode::ConfigError: return kExitConfig;
    case ErrorCode::BackendUnavailable:
    case ErrorCode::ProtocolError: return kExitBackend;
    default: return kExitOther;
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"actguard: action critic pipeline over offline GUI-agent episodes"};
  app.require_subcommand(1);
  int status = kExitOk;

  // fixtures
  EpisodeGenConfig gen;
  std::string gen_level = "high";
  std::string gen_out;
  std::string gen_screenshot;
  std::uint64_t gen_seed = 0;
  auto* fixtures = app.add_subcommand("fixtures", "generate a seeded set of simulated episodes");
  fixtures->add_option("--episodes", gen.n_episodes, "number of episodes")->default_val(100);
  fixtures->add_option("--min-steps", gen.min_steps)->default_val(3);
  fixtures->add_option("--max-steps", gen.max_steps)->default_val(7);
  fixtures->add_option("--level", gen_level, "high or low")->default_val("high");
  fixtures->add_option("--source-dataset", gen.source_dataset)->default_val("sim");
  fixtures->add_option("--id-prefix", gen.id_prefix)->default_val("ep");
  fixtures->add_option("--screenshot", gen_screenshot, "also render the sim screen to this PNG and reference it");
  fixtures->add_option("--seed", gen_seed)->required();
  fixtures->add_option("--out", gen_out, "episode JSONL output")->required();
  fixtures->callback([&] {
    gen.level = parse_level(gen_level);
    gen.seed = gen_seed;
    if (!gen_screenshot.empty()) {
      const Image img = render_world(default_sim_world());
      const auto bytes = encode_image(img, ImageFormat::Png);
      ensure_parent(gen_screenshot);
      write_bytes(gen_screenshot, bytes);
      gen.screenshot = {gen_screenshot, sha256_hex(bytes), default_sim_world().dims};
    }
    const auto eps = generate_episodes(default_sim_world(), gen);
    ensure_parent(gen_out);
    save_episodes(gen_out, eps);
  });

  RunArgs eval_args;
  auto* eval = app.add_subcommand("eval", "base run: one greedy candidate per step, no critic");
  add_run_options(eval, eval_args, false, false);
  eval->callback([&] { status = run_traces(eval_args, RunMode::Eval); });

  RunArgs guide_args;
  auto* guide = app.add_subcommand("guide", "guided run: best-of-N selection by a critic");
  add_run_options(guide, guide_args, true, true);
  guide->callback([&] { status = run_traces(guide_args, RunMode::Guide); });

  RunArgs collect_args;
  auto* collect = app.add_subcommand("collect", "raw rollouts: N candidates per step, optionally judged");
  add_run_options(collect, collect_args, true, false);
  collect->callback([&] { status = run_traces(collect_args, RunMode::Collect); });

  // label
  std::string label_traces;
  std::string label_episodes;
  std::string label_out;
  std::string label_config;
  bool accepted_only = false;
  LabelingOptions label_opts;
  std::string guided_by;
  auto* label = app.add_subcommand("label", "oracle-label rollout candidates into flywheel records");
  label->add_option("--traces", label_traces, "rollout JSONL from collect")->required();
  label->add_option("--episodes", label_episodes, "episode JSONL the rollouts came from")->required();
  label->add_option("--config", label_config, "pipeline config (for match settings)");
  label->add_flag("--accepted-only", accepted_only, "keep only candidates the critic accepted");
  label->add_option("--round", label_opts.round)->default_val(1);
  label->add_option("--source-agent", label_opts.source_agent)->required();
  label->add_option("--source-dataset", label_opts.source_dataset)->default_val("sim");
  label->add_option("--guided-by", guided_by, "critic id that guided collection (round >= 2)");
  label->add_option("--out", label_out, "record JSONL output")->required();
  label->callback([&] {
    MatchConfig match;
    if (!label_config.empty()) match = read_config(label_config).match;
    if (!guided_by.empty()) label_opts.guided_by = guided_by;
    const auto traces = load_traces(label_traces);
    const auto episodes = load_episodes(label_episodes);
    const auto steps = labeling_steps_from_traces(traces, episodes, accepted_only);
    const auto res = label_rollouts(steps, match, label_opts);
    for (const auto& r : res.rejects) {
      print_error("LabelReject", "step " + std::to_string(r.index) + ": " + r.reason);
    }
    write_records(label_out, res.records);
  });

  // balance
  std::string bal_in;
  std::string bal_out;
  std::uint64_t bal_seed = 0;
  auto* bal = app.add_subcommand("balance", "downsample the majority class");
  bal->add_option("--in", bal_in)->required();
  bal->add_option("--seed", bal_seed)->required();
  bal->add_option("--out", bal_out)->required();
  bal->callback([&] {
    const auto recs = import_jsonl(bal_in);
    write_records(bal_out, balance(recs, bal_seed));
  });

  // merge
  std::string merge_base;
  std::vector<std::string> merge_delta;
  std::string merge_out;
  bool allow_unbalanced = false;
  auto* merge = app.add_subcommand("merge", "merge a round delta into a dataset");
  merge->add_option("--base", merge_base)->required();
  merge->add_option("--delta", merge_delta, "delta record JSONL (repeatable)")->required();
  merge->add_flag("--allow-unbalanced-delta", allow_unbalanced);
  merge->add_option("--out", merge_out)->required();
  merge->callback([&] {
    Dataset d = make_dataset(import_jsonl(merge_base));
    for (const auto& path : merge_delta) {
      const auto delta = import_jsonl(path);
      d = merge_rounds(d, delta, MergeOptions{!allow_unbalanced});
    }
    write_records(merge_out, d.records);
  });

  // train-critic
  std::string train_records;
  std::string train_out;
  std::string train_config;
  std::uint64_t train_seed = 0;
  std::optional<double> lr;
  std::optional<double> l2;
  std::optional<int> epochs;
  auto* train = app.add_subcommand("train-critic", "fit the reference critic on flywheel records");
  train->add_option("--records", train_records)->required();
  train->add_option("--config", train_config, "pipeline config (for train settings)");
  train->add_option("--lr", lr);
  train->add_option("--l2", l2);
  train->add_option("--epochs", epochs);
  train->add_option("--seed", train_seed)->required();
  train->add_option("--out", train_out, "parameter JSON output")->required();
  train->callback([&] {
    TrainHyper hy;
    if (!train_config.empty()) hy = read_config(train_config).train;
    if (lr) hy.lr = *lr;
    if (l2) hy.l2 = *l2;
    if (epochs) hy.epochs = *epochs;
    hy.seed = train_seed;
    const auto recs = import_jsonl(train_records);
    const auto res = ref_train(recs, hy);
    ensure_parent(train_out);
    save_params(train_out, res.params);
  });

  // report
  std::string rep_base;
  std::vector<std::string> rep_guided;
  std::string rep_dir;
  auto* rep = app.add_subcommand("report", "comparison report, table and pass@N series from traces");
  rep->add_option("--base", rep_base, "base-run traces")->required();
  rep->add_option("--guided", rep_guided, "NAME=TRACES for each guided run (repeatable)");
  rep->add_option("--out-dir", rep_dir)->required();
  rep->callback([&] {
    const auto base_traces = load_traces(rep_base);
    std::vector<ConfigReport> guided;
    for (const auto& g : rep_guided) {
      const auto eq = g.find('=');
      if (eq == std::string::npos || eq == 0) throw Error(ErrorCode::ConfigError, "--guided expects NAME=PATH");
      const auto traces = load_traces(g.substr(eq + 1));
      guided.push_back(config_report(g.substr(0, eq), traces));
    }
    const auto report = compare(config_report("base", base_traces), std::move(guided));
    std::filesystem::create_directories(rep_dir);
    const std::filesystem::path dir(rep_dir);
    write_file_atomic((dir / "report.json").string(), comparison_to_json(report));
    write_file_atomic((dir / "table.csv").string(), comparison_table_csv(report));
    write_file_atomic((dir / "pass_at_n.csv").string(), pass_at_n_csv(report));
  });

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) return app.exit(e);
    print_error("UsageError", e.what());
    return kExitConfig;
  } catch (const Error& e) {
    print_error(to_string(e.code()), e.what());
    return exit_code_for(e.code());
  } catch (const std::exception& e) {
    print_error("InternalError", e.what());
    return kExitOther;
  }
  return status;
}
