#include "actguard/report.hpp"

#include <cstdio>

#include <nlohmann/json.hpp>

#include "actguard/error.hpp"
#include "actguard/json_io.hpp"

namespace actguard {

using ojson = nlohmann::ordered_json;

std::vector<PassAtNRow> emit_pass_at_n(std::span<const StepResult> traces) {
  if (traces.empty()) throw Error(ErrorCode::EmptyInput, "no traces");
  std::size_t n_max = traces.front().pass_at_n_flags.size();
  for (const auto& t : traces) {
    if (t.pass_at_n_flags.empty()) {
      throw Error(ErrorCode::MissingFlags, "trace " + t.episode_id + "/" + std::to_string(t.step) + " has no pass@N flags");
    }
    n_max = std::min(n_max, t.pass_at_n_flags.size());
  }
  std::vector<PassAtNRow> rows;
  const double total = static_cast<double>(traces.size());
  for (int n : {1, 2, 4, 8}) {
    if (static_cast<std::size_t>(n) > n_max) break;
    std::size_t pass = 0;
    std::size_t chosen_ok = 0;
    for (const auto& t : traces) {
      pass += t.pass_at_n_flags[static_cast<std::size_t>(n - 1)] ? 1 : 0;
      if (t.candidates.empty()) continue;
      const std::size_t k = std::min(t.candidates.size(), static_cast<std::size_t>(n));
      std::size_t pick = 0;
      if (t.candidates.front().judgment) {
        std::vector<Judgment> js;
        for (std::size_t i = 0; i < k; ++i) js.push_back(t.candidates[i].judgment.value_or(Judgment{}));
        pick = select_best_of_n(js);
      }
      chosen_ok += t.candidates[pick].oracle_ok ? 1 : 0;
    }
    rows.push_back({n, 100.0 * static_cast<double>(pass) / total, 100.0 * static_cast<double>(chosen_ok) / total});
  }
  return rows;
}

MetricsReport metrics_from_traces(std::span<const StepResult> traces) {
  std::vector<StepJudgment> js;
  js.reserve(traces.size());
  for (const auto& t : traces) js.push_back(t.step_judgment);
  return aggregate(js);
}

ConfigReport config_report(std::string name, std::span<const StepResult> traces) {
  ConfigReport r;
  r.name = std::move(name);
  r.metrics = metrics_from_traces(traces);
  r.pass_series = emit_pass_at_n(traces);
  for (const auto& row : r.pass_series) r.metrics.pass_at_n[row.n] = row.pass_at_n;
  return r;
}

ComparisonReport compare(ConfigReport base, std::vector<ConfigReport> guided) {
  ComparisonReport out;
  out.base = std::move(base);
  out.guided = std::move(guided);
  for (const auto& g : out.guided) {
    MetricDelta d;
    d.name = g.name;
    d.type_acc = g.metrics.type_acc - out.base.metrics.type_acc;
    if (g.metrics.gr_acc && out.base.metrics.gr_acc) d.gr_acc = *g.metrics.gr_acc - *out.base.metrics.gr_acc;
    d.sr = g.metrics.sr - out.base.metrics.sr;
    out.deltas.push_back(std::move(d));
  }
  return out;
}

namespace {

ojson config_json(const ConfigReport& c) {
  ojson series = ojson::array();
  for (const auto& row : c.pass_series) {
    series.push_back({{"n", row.n}, {"pass_at_n", row.pass_at_n}, {"guided_sr_at_n", row.guided_sr_at_n}});
  }
  ojson m = ojson::parse(to_json(c.metrics).dump());
  return {{"name", c.name}, {"metrics", std::move(m)}, {"pass_at_n_series", std::move(series)}};
}

std::string num(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.4f", v);
  return buf;
}

std::string opt_num(const std::optional<double>& v) { return v ? num(*v) : std::string(); }

}  // namespace

std::string comparison_to_json(const ComparisonReport& r) {
  ojson guided = ojson::array();
  for (const auto& g : r.guided) guided.push_back(config_json(g));
  ojson deltas = ojson::array();
  for (const auto& d : r.deltas) {
    deltas.push_back({{"name", d.name},
                      {"type_acc", d.type_acc},
                      {"gr_acc", d.gr_acc ? ojson(*d.gr_acc) : ojson(nullptr)},
                      {"sr", d.sr}});
  }
  const ojson j = {{"base", config_json(r.base)}, {"guided", std::move(guided)}, {"deltas", std::move(deltas)}};
  return j.dump(2) + "\n";
}

std::string comparison_table_csv(const ComparisonReport& r) {
  std::string out = "config,type_acc,gr_acc,sr,n_steps,n_grounding_steps,delta_type_acc,delta_gr_acc,delta_sr\n";
  auto row = [&](const ConfigReport& c, const MetricDelta* d) {
    const auto& m = c.metrics;
    out += c.name + "," + num(m.type_acc) + "," + opt_num(m.gr_acc) + "," + num(m.sr) + "," +
           std::to_string(m.n_steps) + "," + std::to_string(m.n_grounding_steps) + ",";
    if (d) out += num(d->type_acc) + "," + opt_num(d->gr_acc) + "," + num(d->sr);
    else out += ",,";
    out += "\n";
  };
  row(r.base, nullptr);
  for (std::size_t i = 0; i < r.guided.size(); ++i) row(r.guided[i], &r.deltas[i]);
  return out;
}

std::string pass_at_n_csv(const ComparisonReport& r) {
  std::string out = "config,n,pass_at_n,guided_sr_at_n\n";
  auto rows = [&](const ConfigReport& c) {
    for (const auto& row : c.pass_series) {
      out += c.name + "," + std::to_string(row.n) + "," + num(row.pass_at_n) + "," + num(row.guided_sr_at_n) + "\n";
    }
  };
  rows(r.base);
  for (const auto& g : r.guided) rows(g);
  return out;
}

}  // namespace actguard
