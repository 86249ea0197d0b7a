#include "ptdt/zorank/zorank.hpp"

#include <algorithm>
#include <cmath>
#include <json.hpp>
#include <numeric>
#include <sstream>

#include "ptdt/common/errors.hpp"

namespace ptdt::zo {

using nlohmann::json;

void TunerConfig::validate() const {
  if (T < 0) throw ConfigError("tuner: T must be >= 0");
  if (m < 1) throw ConfigError("tuner: m must be >= 1");
  if (k < 1 || k > m) throw ConfigError("tuner: k must satisfy 1 <= k <= m");
  if (!(mu >= 0)) throw ConfigError("tuner: mu must be >= 0");
  if (!(eta > 0)) throw ConfigError("tuner: eta must be > 0");
}

Candidates perturb_candidates(std::span<const double> x, const TunerConfig& cfg, Rng& rng, Candidates& probes) {
  if (!cfg.scale.empty() && cfg.scale.size() != x.size()) throw ShapeError("perturb_candidates: scale size mismatch");
  probes.assign(cfg.m, {});
  Candidates out(cfg.m);
  for (int i = 0; i < cfg.m; ++i) {
    probes[i] = standard_normal(rng, x.size());
    out[i].resize(x.size());
    for (std::size_t d = 0; d < x.size(); ++d) {
      const double s = cfg.scale.empty() ? 1.0 : cfg.scale[d];
      out[i][d] = x[d] + cfg.mu * s * probes[i][d];
    }
  }
  return out;
}

RankingDag build_dag(std::span<const int> ranking, int m) {
  if (m < 1) throw ContractError("build_dag: m must be >= 1");
  if (ranking.empty() || int(ranking.size()) > m) throw ContractError("build_dag: ranking must hold 1..m indices");
  std::vector<char> seen(m, 0);
  for (int i : ranking) {
    if (i < 0 || i >= m) throw ContractError("build_dag: candidate index " + std::to_string(i) + " out of range");
    if (seen[i]) throw ContractError("build_dag: duplicate candidate index " + std::to_string(i));
    seen[i] = 1;
  }
  RankingDag dag;
  dag.m = m;
  dag.ranking.assign(ranking.begin(), ranking.end());
  dag.full = int(ranking.size()) >= m - 1;
  for (std::size_t a = 0; a < ranking.size(); ++a) {
    for (std::size_t b = a + 1; b < ranking.size(); ++b) dag.edges.emplace_back(ranking[a], ranking[b]);
    for (int u = 0; u < m; ++u) {
      if (!seen[u]) dag.edges.emplace_back(ranking[a], u);
    }
  }
  return dag;
}

std::vector<int> rank_values(std::span<const double> values, int k, bool* ties) {
  const int m = int(values.size());
  if (k < 1 || k > m) throw ContractError("rank_values: k must satisfy 1 <= k <= m");
  for (double v : values) {
    if (std::isnan(v)) throw OracleError("oracle returned NaN");
  }
  std::vector<int> order(m);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](int a, int b) { return values[a] < values[b]; });
  if (ties) {
    *ties = false;
    for (int i = 1; i < m; ++i) *ties = *ties || values[order[i]] == values[order[i - 1]];
  }
  order.resize(k);
  return order;
}

RankingDag build_dag(std::span<const double> values, int k) {
  bool ties = false;
  auto order = rank_values(values, k, &ties);
  auto dag = build_dag(std::span<const int>(order), int(values.size()));
  dag.ties_broken = ties;
  return dag;
}

GradientEstimate estimate_gradient(const RankingDag& dag, const Candidates& probes) {
  if (int(probes.size()) != dag.m) throw ShapeError("estimate_gradient: probe count does not match m");
  const std::size_t d = probes.empty() ? 0 : probes[0].size();
  GradientEstimate est;
  est.g.assign(d, 0.0);
  if (dag.edges.empty()) {
    est.noop = true;
    return est;
  }
  for (auto [i, j] : dag.edges) {
    for (std::size_t c = 0; c < d; ++c) est.g[c] += probes[j][c] - probes[i][c];
  }
  const double n = double(dag.edges.size());
  for (double& v : est.g) v /= n;
  return est;
}

std::vector<int> ValueOracle::rank(const Candidates& candidates, int k, int iteration) {
  values_ = f_(candidates, iteration);
  if (values_.size() != candidates.size()) throw OracleError("objective returned the wrong number of values");
  calls_ += candidates.size();
  return rank_values(values_, k, &ties_);
}

ZoState initial_state(std::vector<double> x0, const TunerConfig& cfg) {
  ZoState st;
  Rng fresh(cfg.seed);
  st.rng = rng_state(fresh);
  st.trace.config = cfg;
  st.trace.d_x = int(x0.size());
  st.trace.x0 = x0;
  st.x = std::move(x0);
  return st;
}

ZoResult zo_rank_sgd(RankingOracle& oracle, std::vector<double> x0, const TunerConfig& cfg, const ZoHooks& hooks,
                     const ZoState* resume) {
  cfg.validate();
  ZoState st = resume ? *resume : initial_state(std::move(x0), cfg);
  Rng rng;
  restore_rng_state(rng, st.rng);
  const std::size_t calls_before = oracle.calls();
  const std::size_t carried = st.trace.oracle_calls;

  for (; st.iteration <= cfg.T; ++st.iteration) {
    st.rng = rng_state(rng);
    if (hooks.before_query) hooks.before_query(st);
    Candidates probes;
    const auto candidates = perturb_candidates(st.x, cfg, rng, probes);
    std::vector<int> ranking;
    try {
      ranking = oracle.rank(candidates, cfg.k, st.iteration);
    } catch (const std::exception& e) {
      st.trace.aborted = true;
      st.trace.abort_reason = e.what();
      break;
    }
    const auto dag = build_dag(std::span<const int>(ranking), cfg.m);
    const auto est = estimate_gradient(dag, probes);
    double norm = 0.0;
    for (std::size_t d = 0; d < st.x.size(); ++d) {
      st.x[d] -= cfg.eta * est.g[d];
      norm += est.g[d] * est.g[d];
    }
    TraceRow row;
    row.iteration = st.iteration;
    row.x = st.x;
    row.values = oracle.last_values();
    row.ranking = ranking;
    row.edges = int(dag.edges.size());
    row.grad_norm = std::sqrt(norm);
    row.noop = est.noop;
    row.ties_broken = oracle.last_ties();
    if (hooks.after_step) row.eval_return = hooks.after_step(st.x, st.iteration);
    st.trace.rows.push_back(std::move(row));
    st.trace.oracle_calls = carried + (oracle.calls() - calls_before);
    if (hooks.on_row) hooks.on_row(st.trace);
  }
  st.trace.oracle_calls = carried + (oracle.calls() - calls_before);
  return {st.x, st.trace};
}

namespace {

json config_json(const TunerConfig& c) {
  json j = {{"T", c.T}, {"m", c.m}, {"k", c.k}, {"mu", c.mu}, {"eta", c.eta}, {"seed", c.seed}};
  if (!c.scale.empty()) j["scale"] = c.scale;
  return j;
}

TunerConfig config_from(const json& j) {
  TunerConfig c;
  c.T = j.at("T");
  c.m = j.at("m");
  c.k = j.at("k");
  c.mu = j.at("mu");
  c.eta = j.at("eta");
  c.seed = j.at("seed");
  if (j.contains("scale")) c.scale = j.at("scale").get<std::vector<double>>();
  return c;
}

json row_json(const TraceRow& r) {
  json j = {{"kind", "iteration"}, {"iteration", r.iteration}, {"x", r.x},       {"ranking", r.ranking},
            {"edges", r.edges},    {"grad_norm", r.grad_norm}, {"noop", r.noop}, {"ties_broken", r.ties_broken}};
  if (r.values) j["values"] = *r.values;
  if (r.eval_return) j["eval_return"] = *r.eval_return;
  return j;
}

}  // namespace

std::string trace_row_json(const TraceRow& row) { return row_json(row).dump(); }

void write_trace(std::ostream& out, const TuneTrace& t) {
  json header = {{"kind", "header"},
                 {"format_version", kTraceFormatVersion},
                 {"config_hash", t.config_hash},
                 {"d_x", t.d_x},
                 {"model_parameters", t.model_parameters},
                 {"parameter_ratio", t.parameter_ratio()},
                 {"config", config_json(t.config)},
                 {"x0", t.x0}};
  out << header.dump() << '\n';
  for (const auto& r : t.rows) out << row_json(r).dump() << '\n';
  json summary = {{"kind", "summary"}, {"iterations", t.rows.size()}, {"oracle_calls", t.oracle_calls},
                  {"aborted", t.aborted}, {"abort_reason", t.abort_reason}};
  out << summary.dump() << '\n';
}

std::string trace_to_jsonl(const TuneTrace& trace) {
  std::ostringstream out;
  write_trace(out, trace);
  return out.str();
}

TuneTrace trace_from_jsonl(const std::string& text) {
  TuneTrace t;
  std::istringstream in(text);
  std::string line;
  std::size_t line_no = 0;
  bool header = false;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    json j;
    try {
      j = json::parse(line);
    } catch (const json::exception& e) {
      throw ParseError("trace line " + std::to_string(line_no) + ": " + e.what(), line_no);
    }
    const std::string kind = j.value("kind", "");
    if (kind == "header") {
      if (j.value("format_version", -1) != kTraceFormatVersion) throw VersionError("trace format version mismatch");
      t.config_hash = j.at("config_hash");
      t.d_x = j.at("d_x");
      t.model_parameters = j.at("model_parameters");
      t.config = config_from(j.at("config"));
      t.x0 = j.at("x0").get<std::vector<double>>();
      header = true;
    } else if (kind == "iteration") {
      TraceRow r;
      r.iteration = j.at("iteration");
      r.x = j.at("x").get<std::vector<double>>();
      r.ranking = j.at("ranking").get<std::vector<int>>();
      r.edges = j.at("edges");
      r.grad_norm = j.at("grad_norm");
      r.noop = j.at("noop");
      r.ties_broken = j.at("ties_broken");
      if (j.contains("values")) r.values = j.at("values").get<std::vector<double>>();
      if (j.contains("eval_return")) r.eval_return = j.at("eval_return").get<double>();
      t.rows.push_back(std::move(r));
    } else if (kind == "summary") {
      t.oracle_calls = j.at("oracle_calls");
      t.aborted = j.at("aborted");
      t.abort_reason = j.at("abort_reason");
    } else {
      throw ParseError("trace line " + std::to_string(line_no) + ": unknown record kind", line_no);
    }
  }
  if (!header) throw ParseError("trace has no header", 1);
  return t;
}

}  // namespace ptdt::zo
