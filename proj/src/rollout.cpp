#include "actguard/rollout.hpp"

#include <atomic>
#include <exception>
#include <thread>
#include <unordered_map>

#include "actguard/error.hpp"
#include "actguard/json_io.hpp"

namespace actguard {

using json = nlohmann::json;

void validate(const SamplingParams& p) {
  if (p.n < 1) throw Error(ErrorCode::InvalidArgument, "sampling n must be >= 1");
  if (!(p.top_p > 0.0 && p.top_p <= 1.0)) throw Error(ErrorCode::InvalidArgument, "top_p must be in (0, 1]");
  if (p.top_k < 1) throw Error(ErrorCode::InvalidArgument, "top_k must be >= 1");
  if (!(p.temperature >= 0.0)) throw Error(ErrorCode::InvalidArgument, "temperature must be >= 0");
}

SimAgentBackend::SimAgentBackend(SimAgentConfig cfg, std::string id) : cfg_(std::move(cfg)), id_(std::move(id)) {
  validate(cfg_);
}

std::vector<std::string> SimAgentBackend::complete_n(const AgentCall& call) const {
  if (!call.hidden_truth) throw Error(ErrorCode::InvalidArgument, "the simulated agent needs the hidden ground truth");
  std::vector<std::string> out;
  out.reserve(static_cast<std::size_t>(call.params.n));
  for (int i = 0; i < call.params.n; ++i) {
    out.push_back(simulate_completion(cfg_, call.context, *call.hidden_truth,
                                      DrawKey{call.episode_key, call.step, static_cast<std::uint64_t>(i)}));
  }
  return out;
}

RemoteAgent::RemoteAgent(EndpointConfig endpoint, DialectConfig dialect, RetryPolicy retry, std::string id)
    : client_(std::move(endpoint), retry), dialect_(dialect), id_(std::move(id)) {}

ChatRequest RemoteAgent::build_request(const StepContext& ctx, TaskLevel level, const SamplingParams& params,
                                       const std::vector<std::uint8_t>& image) const {
  const AgentPrompt prompt = build_agent_prompt(dialect_.id, ctx, level);
  ChatRequest req;
  req.model = client_.endpoint().model;
  req.messages.push_back(make_message("system", prompt.system, {}));
  req.messages.push_back(make_message("user", prompt.user, image));
  if (params.n > 1) {
    req.temperature = params.temperature;
    req.top_k = params.top_k;
    req.top_p = params.top_p;
  } else {
    req.temperature = 0.0;
  }
  return req;
}

std::vector<std::string> RemoteAgent::complete_n(const AgentCall& call) const {
  const auto image = read_bytes(call.context.screenshot.path);
  const ChatRequest req = build_request(call.context, call.level, call.params, image);
  std::vector<std::string> out;
  for (int i = 0; i < call.params.n; ++i) out.push_back(client_.complete(req).text);
  return out;
}

std::vector<Candidate> sample_n(const AgentBackend& agent, const AgentCall& call) {
  validate(call.params);
  auto texts = agent.complete_n(call);
  if (texts.size() != static_cast<std::size_t>(call.params.n)) {
    throw Error(ErrorCode::ProtocolError, "agent returned " + std::to_string(texts.size()) + " completions, expected " +
                                              std::to_string(call.params.n));
  }
  std::vector<Candidate> out;
  out.reserve(texts.size());
  for (auto& text : texts) {
    Candidate c;
    auto result = try_parse(text, agent.dialect().id);
    if (auto* p = std::get_if<ParsedOutput>(&result)) {
      c.action = normalize(p->action, agent.dialect(), call.context.screenshot.dims);
      c.parsed = std::move(*p);
    } else {
      c.parse_error = std::get<ParseError>(result).what();
    }
    c.text = std::move(text);
    out.push_back(std::move(c));
  }
  return out;
}

namespace {

std::vector<bool> prefix_any(const std::vector<CandidateTrace>& cands) {
  std::vector<bool> flags;
  bool any = false;
  for (const auto& c : cands) {
    any = any || c.oracle_ok;
    flags.push_back(any);
  }
  return flags;
}

}  // namespace

StepResult run_guided_step(const AgentBackend& agent, const CriticBackend* critic, const StepInput& in,
                           const SamplingParams& params, const MatchConfig& match, const SomStyle& som) {
  StepResult r;
  r.episode_id = in.episode_id;
  r.step = in.step;
  const AgentCall call{in.context, in.level, params, &in.truth, episode_key(in.episode_id), in.step};

  std::vector<Candidate> cands;
  try {
    cands = sample_n(agent, call);
  } catch (const Error& e) {
    if (!e.retryable()) throw;
    r.error = std::string(to_string(e.code())) + ": " + e.what();
    r.step_judgment = failed_step(in.truth);
    r.pass_at_n_flags.assign(static_cast<std::size_t>(params.n), false);
    return r;
  }

  std::vector<std::uint8_t> screenshot;
  bool screenshot_loaded = false;
  if (critic && critic->wants_image()) {
    try {
      screenshot = read_bytes(in.context.screenshot.path);
      screenshot_loaded = true;
    } catch (const Error&) {
      // The critic reports the missing image itself and the candidate is rejected.
    }
  }

  for (std::size_t i = 0; i < cands.size(); ++i) {
    CandidateTrace t;
    t.candidate = std::move(cands[i]);
    if (t.candidate.action) {
      t.oracle_ok = match_step(*t.candidate.action, in.truth, match).step_ok;
      if (critic) {
        std::vector<std::uint8_t> image;
        if (screenshot_loaded) {
          try {
            image = annotate_som_bytes(screenshot, *t.candidate.action, som);
          } catch (const Error&) {
            image.clear();
          }
        }
        const JudgeRequest req{in.context, *t.candidate.action, &in.truth, &match,
                               CandidateKey{call.episode_key, in.step, i}, image};
        t.judgment = judge_or_reject(*critic, req);
      }
    } else if (critic) {
      Judgment j;
      j.label = Label::Wrong;
      j.failed = true;
      t.judgment = j;
    }
    r.candidates.push_back(std::move(t));
  }

  if (critic) {
    std::vector<Judgment> js;
    for (const auto& c : r.candidates) js.push_back(*c.judgment);
    r.chosen_index = static_cast<int>(select_best_of_n(js));
  } else {
    r.chosen_index = 0;
  }
  const auto& chosen = r.candidates[static_cast<std::size_t>(r.chosen_index)].candidate;
  r.chosen = chosen.action;
  r.step_judgment = chosen.action ? match_step(*chosen.action, in.truth, match) : failed_step(in.truth);
  r.pass_at_n_flags = prefix_any(r.candidates);
  return r;
}

void parallel_for(std::size_t n, std::size_t workers, const std::function<void(std::size_t)>& fn) {
  if (workers == 0) workers = std::max(1u, std::thread::hardware_concurrency());
  workers = std::min(workers, std::max<std::size_t>(n, 1));
  std::vector<std::exception_ptr> errors(n);
  if (workers <= 1) {
    for (std::size_t i = 0; i < n; ++i) {
      try {
        fn(i);
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  } else {
    std::atomic<std::size_t> next{0};
    std::vector<std::thread> pool;
    for (std::size_t w = 0; w < workers; ++w) {
      pool.emplace_back([&] {
        for (std::size_t i = next++; i < n; i = next++) {
          try {
            fn(i);
          } catch (...) {
            errors[i] = std::current_exception();
          }
        }
      });
    }
    for (auto& t : pool) t.join();
  }
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
}

std::map<int, double> pass_at_n(std::span<const StepResult> steps, int n) {
  if (steps.empty()) throw Error(ErrorCode::EmptyInput, "pass@N over no steps");
  std::vector<int> ns;
  for (int k : {1, 2, 4, 8}) {
    if (k <= n) ns.push_back(k);
  }
  if (std::find(ns.begin(), ns.end(), n) == ns.end()) ns.push_back(n);
  std::map<int, double> out;
  for (int k : ns) {
    std::size_t hit = 0;
    for (const auto& s : steps) {
      if (s.pass_at_n_flags.size() < static_cast<std::size_t>(k)) {
        throw Error(ErrorCode::MissingFlags, "step " + s.episode_id + "/" + std::to_string(s.step) +
                                                 " has no pass@" + std::to_string(k) + " flag");
      }
      hit += s.pass_at_n_flags[static_cast<std::size_t>(k - 1)] ? 1 : 0;
    }
    out[k] = 100.0 * static_cast<double>(hit) / static_cast<double>(steps.size());
  }
  return out;
}

BenchmarkResult run_benchmark(std::span<const OfflineEpisode> episodes, const AgentBackend& agent,
                              const CriticBackend* critic, const SamplingParams& params, const MatchConfig& match,
                              const BenchmarkOptions& opts) {
  validate(params);
  validate(match);
  SamplingParams eff = params;
  if (!critic && opts.greedy_without_critic) eff.n = 1;

  struct Ref {
    const OfflineEpisode* ep;
    std::size_t step;
  };
  std::vector<Ref> refs;
  for (const auto& ep : episodes) {
    if (opts.level == TaskLevel::Low && ep.task_level != TaskLevel::Low) {
      for (const auto& s : ep.steps) {
        if (!s.context.step_plan) {
          throw Error(ErrorCode::MissingStepPlan, "episode " + ep.episode_id + " has steps without a plan");
        }
      }
    }
    for (std::size_t k = 0; k < ep.steps.size(); ++k) refs.push_back({&ep, k});
  }
  if (refs.empty()) throw Error(ErrorCode::EmptyInput, "no episode steps to evaluate");

  BenchmarkResult out;
  out.steps.resize(refs.size());
  parallel_for(refs.size(), opts.workers, [&](std::size_t i) {
    const auto& ep = *refs[i].ep;
    const auto& s = ep.steps[refs[i].step];
    const StepInput in{s.context, s.truth, ep.episode_id, refs[i].step + 1, opts.level};
    out.steps[i] = run_guided_step(agent, critic, in, eff, match, opts.som);
  });

  std::vector<StepJudgment> js;
  js.reserve(out.steps.size());
  for (const auto& s : out.steps) {
    js.push_back(s.step_judgment);
    if (s.error) ++out.failed_steps;
  }
  out.report = aggregate(js);
  out.report.pass_at_n = pass_at_n(out.steps, eff.n);
  return out;
}

std::vector<LabelingStep> labeling_steps_from_traces(std::span<const StepResult> traces,
                                                     std::span<const OfflineEpisode> episodes, bool accepted_only) {
  std::unordered_map<std::string, const OfflineEpisode*> by_id;
  for (const auto& ep : episodes) by_id.emplace(ep.episode_id, &ep);
  std::vector<LabelingStep> out;
  for (const auto& t : traces) {
    auto it = by_id.find(t.episode_id);
    if (it == by_id.end() || t.step == 0 || t.step > it->second->steps.size()) {
      throw Error(ErrorCode::InvalidArgument,
                  "trace step " + t.episode_id + "/" + std::to_string(t.step) + " is not in the episode set");
    }
    const auto& s = it->second->steps[t.step - 1];
    for (const auto& c : t.candidates) {
      if (!c.candidate.action) continue;
      if (accepted_only && !(c.judgment && c.judgment->label == Label::Correct)) continue;
      out.push_back({s.context, *c.candidate.action, s.truth});
    }
  }
  return out;
}

json to_json(const Judgment& j) {
  return {{"label", std::string(to_string(j.label))},
          {"confidence", j.confidence},
          {"protocol_deviation", j.protocol_deviation},
          {"failed", j.failed}};
}

Judgment judgment_from_json(const json& j) {
  Judgment out;
  const auto label = label_from_string(j.at("label").get<std::string>());
  if (!label) throw std::invalid_argument("judgment label must be 'correct' or 'wrong'");
  out.label = *label;
  out.confidence = j.at("confidence").get<double>();
  out.protocol_deviation = j.value("protocol_deviation", false);
  out.failed = j.value("failed", false);
  return out;
}

json to_json(const StepResult& s) {
  json cands = json::array();
  for (const auto& c : s.candidates) {
    json jc = {{"text", c.candidate.text}};
    jc["parsed"] = c.candidate.action ? json(canonical_serialize(*c.candidate.action)) : json(nullptr);
    if (c.candidate.parsed && c.candidate.parsed->thought) jc["thought"] = *c.candidate.parsed->thought;
    if (c.candidate.parse_error) jc["parse_error"] = *c.candidate.parse_error;
    jc["judgment"] = c.judgment ? to_json(*c.judgment) : json(nullptr);
    jc["oracle_ok"] = c.oracle_ok;
    cands.push_back(std::move(jc));
  }
  json j = {{"episode_id", s.episode_id}, {"step", s.step}, {"candidates", std::move(cands)},
            {"chosen_index", s.chosen_index}};
  j["chosen"] = s.chosen ? json(canonical_serialize(*s.chosen)) : json(nullptr);
  j["step_judgment"] = to_json(s.step_judgment);
  j["pass_at_n_flags"] = s.pass_at_n_flags;
  if (s.error) j["error"] = *s.error;
  return j;
}

StepResult step_result_from_json(const json& j) {
  StepResult s;
  s.episode_id = j.at("episode_id").get<std::string>();
  s.step = j.at("step").get<std::size_t>();
  for (const auto& jc : j.at("candidates")) {
    CandidateTrace t;
    t.candidate.text = jc.at("text").get<std::string>();
    if (auto p = jc.find("parsed"); p != jc.end() && !p->is_null()) t.candidate.action = canonical_parse(p->get<std::string>());
    if (auto e = jc.find("parse_error"); e != jc.end()) t.candidate.parse_error = e->get<std::string>();
    if (auto jj = jc.find("judgment"); jj != jc.end() && !jj->is_null()) t.judgment = judgment_from_json(*jj);
    t.oracle_ok = jc.at("oracle_ok").get<bool>();
    s.candidates.push_back(std::move(t));
  }
  s.chosen_index = j.at("chosen_index").get<int>();
  if (auto c = j.find("chosen"); c != j.end() && !c->is_null()) s.chosen = canonical_parse(c->get<std::string>());
  s.step_judgment = step_judgment_from_json(j.at("step_judgment"));
  if (auto f = j.find("pass_at_n_flags"); f != j.end()) s.pass_at_n_flags = f->get<std::vector<bool>>();
  if (auto e = j.find("error"); e != j.end()) s.error = e->get<std::string>();
  return s;
}

std::string traces_to_jsonl(std::span<const StepResult> steps) {
  std::string out;
  for (const auto& s : steps) out += dump_line(to_json(s));
  return out;
}

std::vector<StepResult> parse_traces(const std::string& content) {
  std::vector<StepResult> out;
  std::size_t line_no = 0;
  std::size_t start = 0;
  while (start < content.size()) {
    std::size_t end = content.find('\n', start);
    if (end == std::string::npos) end = content.size();
    const std::string line = content.substr(start, end - start);
    start = end + 1;
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      out.push_back(step_result_from_json(json::parse(line)));
    } catch (const std::exception& e) {
      throw SchemaViolation(line_no, e.what());
    }
  }
  return out;
}

std::vector<StepResult> load_traces(const std::string& path) { return parse_traces(read_file(path)); }

}  // namespace actguard
