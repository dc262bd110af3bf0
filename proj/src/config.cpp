#include "actguard/config.hpp"

#include <cstdlib>
#include <filesystem>
#include <set>

#include <nlohmann/json.hpp>

#include "actguard/error.hpp"
#include "actguard/json_io.hpp"
#include "actguard/rng.hpp"

namespace actguard {

using json = nlohmann::json;
using ojson = nlohmann::ordered_json;

namespace {

[[noreturn]] void fail(const std::string& msg) { throw Error(ErrorCode::ConfigError, "config: " + msg); }

void only_keys(const json& j, const std::string& where, std::initializer_list<const char*> keys) {
  if (!j.is_object()) fail(where + " must be an object");
  for (const auto& [k, v] : j.items()) {
    bool known = false;
    for (const char* key : keys) known = known || k == key;
    if (!known) fail("unknown field '" + where + "." + k + "'");
  }
}

template <typename T>
T get(const json& j, const std::string& where, const char* key, T fallback) {
  auto it = j.find(key);
  if (it == j.end() || it->is_null()) return fallback;
  try {
    return it->get<T>();
  } catch (const json::exception&) {
    fail("field '" + where + "." + key + "' has the wrong type");
  }
}

template <typename T>
T need(const json& j, const std::string& where, const char* key) {
  if (!j.contains(key) || j[key].is_null()) fail("missing field '" + where + "." + key + "'");
  return get<T>(j, where, key, T{});
}

EndpointSpec endpoint_from(const json& j, const std::string& where) {
  only_keys(j, where, {"base_url", "path", "model", "timeout_ms"});
  EndpointSpec e;
  e.base_url = get<std::string>(j, where, "base_url", "");
  e.path = get<std::string>(j, where, "path", e.path);
  e.model = need<std::string>(j, where, "model");
  e.timeout_ms = get<int>(j, where, "timeout_ms", e.timeout_ms);
  return e;
}

ojson endpoint_to(const EndpointSpec& e) {
  return {{"base_url", e.base_url}, {"path", e.path}, {"model", e.model}, {"timeout_ms", e.timeout_ms}};
}

DialectConfig dialect_from(const json& j, const std::string& where) {
  const auto id = dialect_from_string(need<std::string>(j, where, "dialect"));
  if (!id) fail(where + ".dialect must be ui-tars-1.0, ui-tars-1.5 or qwen-tool-call");
  DialectConfig d = DialectTable::defaults().get(*id);
  if (j.contains("coordinate_basis")) {
    const auto& b = j["coordinate_basis"];
    if (b.is_null()) {
      d.coordinate_basis.reset();
    } else {
      d.coordinate_basis = get<int>(j, where, "coordinate_basis", 0);
    }
  }
  return d;
}

std::string kind_name(AgentKind k) { return k == AgentKind::Sim ? "sim" : "remote"; }

std::string kind_name(CriticKind k) {
  switch (k) {
    case CriticKind::Scripted: return "scripted";
    case CriticKind::Reference: return "reference";
    case CriticKind::Remote: return "remote";
  }
  return "?";
}

EndpointConfig endpoint_config(const EndpointSpec& e, const char* url_env, const char* key_env) {
  EndpointConfig c;
  c.base_url = e.base_url;
  if (const char* url = std::getenv(url_env); url && *url) c.base_url = url;
  c.path = e.path;
  c.model = e.model;
  if (const char* key = std::getenv(key_env)) c.api_key = key;
  c.timeout = std::chrono::milliseconds(e.timeout_ms);
  if (c.base_url.empty()) fail(std::string("no endpoint base_url configured and ") + url_env + " is unset");
  return c;
}

}  // namespace

PipelineConfig config_from_json(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    fail(std::string("not valid JSON: ") + e.what());
  }
  only_keys(j, "config", {"config_version", "agents", "critics", "sampling", "match", "som", "retry", "train",
                          "task_level", "episodes_path", "output_dir"});
  PipelineConfig c;
  c.config_version = need<int>(j, "config", "config_version");
  if (c.config_version != kConfigVersion) {
    fail("unsupported config_version " + std::to_string(c.config_version));
  }

  if (j.contains("agents")) {
    for (const auto& a : j["agents"]) {
      const std::string where = "agents[" + std::to_string(c.agents.size()) + "]";
      only_keys(a, where, {"id", "kind", "dialect", "coordinate_basis", "sim", "endpoint"});
      AgentSpec s;
      s.id = need<std::string>(a, where, "id");
      const auto kind = need<std::string>(a, where, "kind");
      if (kind == "sim") s.kind = AgentKind::Sim;
      else if (kind == "remote") s.kind = AgentKind::Remote;
      else fail(where + ".kind must be 'sim' or 'remote'");
      s.dialect = dialect_from(a, where);
      s.sim.dialect = s.dialect;
      if (a.contains("sim")) {
        const auto& sj = a["sim"];
        const std::string sw = where + ".sim";
        only_keys(sj, sw, {"p_correct", "wrong_model", "jitter", "emit_thought"});
        s.sim.p_correct = get<double>(sj, sw, "p_correct", s.sim.p_correct);
        s.sim.jitter = get<bool>(sj, sw, "jitter", s.sim.jitter);
        s.sim.emit_thought = get<bool>(sj, sw, "emit_thought", s.sim.emit_thought);
        if (sj.contains("wrong_model")) {
          const auto& wj = sj["wrong_model"];
          const std::string ww = sw + ".wrong_model";
          only_keys(wj, ww, {"wrong_type", "offset_click", "wrong_direction", "wrong_text", "malformed", "offset_sigma"});
          auto& w = s.sim.wrong_model;
          w.wrong_type = get<double>(wj, ww, "wrong_type", 0.0);
          w.offset_click = get<double>(wj, ww, "offset_click", 0.0);
          w.wrong_direction = get<double>(wj, ww, "wrong_direction", 0.0);
          w.wrong_text = get<double>(wj, ww, "wrong_text", 0.0);
          w.malformed = get<double>(wj, ww, "malformed", 0.0);
          w.offset_sigma = get<double>(wj, ww, "offset_sigma", w.offset_sigma);
        }
      }
      if (a.contains("endpoint")) s.endpoint = endpoint_from(a["endpoint"], where + ".endpoint");
      c.agents.push_back(std::move(s));
    }
  }

  if (j.contains("critics")) {
    for (const auto& cj : j["critics"]) {
      const std::string where = "critics[" + std::to_string(c.critics.size()) + "]";
      only_keys(cj, where, {"id", "kind", "accuracy", "confidence_model", "params_path", "endpoint"});
      CriticSpec s;
      s.id = need<std::string>(cj, where, "id");
      const auto kind = need<std::string>(cj, where, "kind");
      if (kind == "scripted") s.kind = CriticKind::Scripted;
      else if (kind == "reference") s.kind = CriticKind::Reference;
      else if (kind == "remote") s.kind = CriticKind::Remote;
      else fail(where + ".kind must be 'scripted', 'reference' or 'remote'");
      s.scripted.accuracy = get<double>(cj, where, "accuracy", s.scripted.accuracy);
      const auto model = get<std::string>(cj, where, "confidence_model", "calibrated");
      if (model == "calibrated") s.scripted.confidence_model = ConfidenceModel::Calibrated;
      else if (model == "uniform") s.scripted.confidence_model = ConfidenceModel::Uniform;
      else fail(where + ".confidence_model must be 'calibrated' or 'uniform'");
      if (cj.contains("params_path") && !cj["params_path"].is_null()) s.params_path = need<std::string>(cj, where, "params_path");
      if (cj.contains("endpoint")) s.endpoint = endpoint_from(cj["endpoint"], where + ".endpoint");
      c.critics.push_back(std::move(s));
    }
  }

  if (j.contains("sampling")) {
    const auto& sj = j["sampling"];
    only_keys(sj, "sampling", {"n", "temperature", "top_k", "top_p"});
    c.sampling.n = get<int>(sj, "sampling", "n", c.sampling.n);
    c.sampling.temperature = get<double>(sj, "sampling", "temperature", c.sampling.temperature);
    c.sampling.top_k = get<int>(sj, "sampling", "top_k", c.sampling.top_k);
    c.sampling.top_p = get<double>(sj, "sampling", "top_p", c.sampling.top_p);
  }
  if (j.contains("match")) {
    try {
      c.match = match_config_from_json(j["match"]);
    } catch (const std::exception& e) {
      fail(std::string("match: ") + e.what());
    }
  }
  if (j.contains("som")) {
    const auto& sj = j["som"];
    only_keys(sj, "som", {"radius", "stroke", "color"});
    c.som.radius = get<int>(sj, "som", "radius", c.som.radius);
    c.som.stroke = get<int>(sj, "som", "stroke", c.som.stroke);
    if (sj.contains("color")) {
      const auto rgb = get<std::vector<int>>(sj, "som", "color", {});
      if (rgb.size() != 3) fail("som.color must be [r, g, b]");
      for (int i = 0; i < 3; ++i) {
        if (rgb[i] < 0 || rgb[i] > 255) fail("som.color entries must be in [0, 255]");
        c.som.color[i] = static_cast<std::uint8_t>(rgb[i]);
      }
    }
  }
  if (j.contains("retry")) {
    const auto& rj = j["retry"];
    only_keys(rj, "retry", {"max_attempts", "base_delay_ms", "multiplier"});
    c.retry.max_attempts = get<int>(rj, "retry", "max_attempts", c.retry.max_attempts);
    c.retry.base_delay = std::chrono::milliseconds(
        get<long long>(rj, "retry", "base_delay_ms", static_cast<long long>(c.retry.base_delay.count())));
    c.retry.multiplier = get<double>(rj, "retry", "multiplier", c.retry.multiplier);
  }
  if (j.contains("train")) {
    const auto& tj = j["train"];
    only_keys(tj, "train", {"lr", "epochs", "l2", "batch_size"});
    c.train.lr = get<double>(tj, "train", "lr", c.train.lr);
    c.train.epochs = get<int>(tj, "train", "epochs", c.train.epochs);
    c.train.l2 = get<double>(tj, "train", "l2", c.train.l2);
    c.train.batch_size = get<std::size_t>(tj, "train", "batch_size", c.train.batch_size);
  }
  const auto level = task_level_from_string(get<std::string>(j, "config", "task_level", "high"));
  if (!level) fail("task_level must be 'high' or 'low'");
  c.level = *level;
  if (j.contains("episodes_path") && !j["episodes_path"].is_null()) c.episodes_path = need<std::string>(j, "config", "episodes_path");
  c.output_dir = get<std::string>(j, "config", "output_dir", c.output_dir);
  validate(c, false);
  return c;
}

std::string config_to_json(const PipelineConfig& c) {
  ojson agents = ojson::array();
  for (const auto& a : c.agents) {
    ojson aj = {{"id", a.id}, {"kind", kind_name(a.kind)}, {"dialect", std::string(to_string(a.dialect.id))}};
    aj["coordinate_basis"] = a.dialect.coordinate_basis ? ojson(*a.dialect.coordinate_basis) : ojson(nullptr);
    {
      const auto& w = a.sim.wrong_model;
      aj["sim"] = {{"p_correct", a.sim.p_correct},
                   {"wrong_model",
                    {{"wrong_type", w.wrong_type},
                     {"offset_click", w.offset_click},
                     {"wrong_direction", w.wrong_direction},
                     {"wrong_text", w.wrong_text},
                     {"malformed", w.malformed},
                     {"offset_sigma", w.offset_sigma}}},
                   {"jitter", a.sim.jitter},
                   {"emit_thought", a.sim.emit_thought}};
    }
    if (a.endpoint) aj["endpoint"] = endpoint_to(*a.endpoint);
    agents.push_back(std::move(aj));
  }
  ojson critics = ojson::array();
  for (const auto& s : c.critics) {
    ojson cj = {{"id", s.id}, {"kind", kind_name(s.kind)}};
    {
      cj["accuracy"] = s.scripted.accuracy;
      cj["confidence_model"] = s.scripted.confidence_model == ConfidenceModel::Calibrated ? "calibrated" : "uniform";
    }
    if (s.params_path) cj["params_path"] = *s.params_path;
    if (s.endpoint) cj["endpoint"] = endpoint_to(*s.endpoint);
    critics.push_back(std::move(cj));
  }
  ojson j = {{"config_version", c.config_version},
             {"agents", std::move(agents)},
             {"critics", std::move(critics)},
             {"sampling",
              {{"n", c.sampling.n},
               {"temperature", c.sampling.temperature},
               {"top_k", c.sampling.top_k},
               {"top_p", c.sampling.top_p}}},
             {"match", ojson::parse(to_json(c.match).dump())},
             {"som", {{"radius", c.som.radius}, {"stroke", c.som.stroke}, {"color", {c.som.color[0], c.som.color[1], c.som.color[2]}}}},
             {"retry",
              {{"max_attempts", c.retry.max_attempts},
               {"base_delay_ms", c.retry.base_delay.count()},
               {"multiplier", c.retry.multiplier}}},
             {"train", {{"lr", c.train.lr}, {"epochs", c.train.epochs}, {"l2", c.train.l2}, {"batch_size", c.train.batch_size}}},
             {"task_level", std::string(to_string(c.level))}};
  j["episodes_path"] = c.episodes_path ? ojson(*c.episodes_path) : ojson(nullptr);
  j["output_dir"] = c.output_dir;
  return j.dump(2) + "\n";
}

void validate(const PipelineConfig& c, bool check_paths) {
  try {
    validate(c.sampling);
    validate(c.match);
    validate(c.som);
  } catch (const Error& e) {
    fail(e.what());
  }
  if (c.retry.max_attempts < 1 || c.retry.base_delay.count() < 0 || !(c.retry.multiplier >= 1.0)) {
    fail("retry needs max_attempts >= 1, base_delay_ms >= 0 and multiplier >= 1");
  }
  std::set<std::string> ids;
  for (const auto& a : c.agents) {
    if (a.id.empty() || !ids.insert(a.id).second) fail("backend id '" + a.id + "' is empty or not unique");
    if (a.kind == AgentKind::Remote && !a.endpoint) fail("remote agent '" + a.id + "' needs an endpoint");
    if (a.kind == AgentKind::Sim) {
      try {
        validate(a.sim);
      } catch (const Error& e) {
        fail("agent '" + a.id + "': " + e.what());
      }
    }
    if (a.dialect.coordinate_basis && *a.dialect.coordinate_basis <= 0) fail("coordinate_basis must be positive");
  }
  for (const auto& s : c.critics) {
    if (s.id.empty() || !ids.insert(s.id).second) fail("backend id '" + s.id + "' is empty or not unique");
    if (s.kind == CriticKind::Scripted) {
      try {
        validate(s.scripted);
      } catch (const Error& e) {
        fail("critic '" + s.id + "': " + e.what());
      }
    }
    if (s.kind == CriticKind::Reference && !s.params_path) fail("reference critic '" + s.id + "' needs params_path");
    if (s.kind == CriticKind::Remote && !s.endpoint) fail("remote critic '" + s.id + "' needs an endpoint");
    if (check_paths && s.params_path && !std::filesystem::exists(*s.params_path)) {
      fail("critic params file '" + *s.params_path + "' does not exist");
    }
  }
  if (c.train.epochs < 0 || !(c.train.lr >= 0.0) || !(c.train.l2 >= 0.0)) fail("train settings must be non-negative");
  if (check_paths && c.episodes_path && !std::filesystem::exists(*c.episodes_path)) {
    fail("episodes file '" + *c.episodes_path + "' does not exist");
  }
}

PipelineConfig load_config(const std::string& path) {
  std::string text;
  try {
    text = read_file(path);
  } catch (const std::exception& e) {
    fail("cannot read '" + path + "': " + e.what());
  }
  PipelineConfig c = config_from_json(text);
  validate(c, true);
  return c;
}

const AgentSpec& find_agent(const PipelineConfig& cfg, const std::string& id) {
  for (const auto& a : cfg.agents) {
    if (a.id == id) return a;
  }
  fail("no agent with id '" + id + "'");
}

const CriticSpec& find_critic(const PipelineConfig& cfg, const std::string& id) {
  for (const auto& s : cfg.critics) {
    if (s.id == id) return s;
  }
  fail("no critic with id '" + id + "'");
}

std::unique_ptr<AgentBackend> make_agent(const PipelineConfig& cfg, const AgentSpec& spec, std::uint64_t seed) {
  if (spec.kind == AgentKind::Sim) {
    SimAgentConfig sim = spec.sim;
    sim.dialect = spec.dialect;
    sim.seed = derive_seed(seed, {hash_label("agent"), hash_label(spec.id)});
    return std::make_unique<SimAgentBackend>(sim, spec.id);
  }
  return std::make_unique<RemoteAgent>(endpoint_config(*spec.endpoint, "AGENT_BASE_URL", "AGENT_API_KEY"), spec.dialect,
                                       cfg.retry, spec.id);
}

std::unique_ptr<CriticBackend> make_critic(const PipelineConfig& cfg, const CriticSpec& spec, std::uint64_t seed) {
  switch (spec.kind) {
    case CriticKind::Scripted: {
      ScriptedCriticConfig sc = spec.scripted;
      sc.seed = derive_seed(seed, {hash_label("critic"), hash_label(spec.id)});
      return std::make_unique<ScriptedCritic>(sc, spec.id);
    }
    case CriticKind::Reference:
      return std::make_unique<ReferenceCritic>(load_params(*spec.params_path), spec.id);
    case CriticKind::Remote:
      return std::make_unique<RemoteCritic>(endpoint_config(*spec.endpoint, "CRITIC_BASE_URL", "CRITIC_API_KEY"),
                                            cfg.retry, cfg.som, spec.id);
  }
  fail("unknown critic kind");
}

}  // namespace actguard
