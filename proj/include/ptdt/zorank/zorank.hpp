#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "ptdt/common/rng.hpp"

namespace ptdt::zo {

struct TunerConfig {
  int T = 20;
  int m = 15;
  int k = 15;
  double mu = 0.05;
  double eta = 0.05;
  std::uint64_t seed = 0;
  // Optional per-dimension perturbation scale (empty = all ones).
  std::vector<double> scale;

  void validate() const;
};

using Candidates = std::vector<std::vector<double>>;

// candidate_i = x + mu * scale ⊙ xi_i with fresh standard-normal xi_i.
// `probes` receives the xi_i.
Candidates perturb_candidates(std::span<const double> x, const TunerConfig& cfg, Rng& rng, Candidates& probes);

struct RankingDag {
  int m = 0;
  // (i, j): candidate i ranked strictly better (lower f) than j.
  std::vector<std::pair<int, int>> edges;
  // Ranked prefix, best first.
  std::vector<int> ranking;
  bool full = false;
  // Some numeric values tied and were ordered by index.
  bool ties_broken = false;
};

// Pairs within the ranked prefix plus (ranked, unranked) pairs.
RankingDag build_dag(std::span<const int> ranking, int m);

// Ranks by value, ties broken by the lower index, keeps the best k.
std::vector<int> rank_values(std::span<const double> values, int k, bool* ties = nullptr);
RankingDag build_dag(std::span<const double> values, int k);

struct GradientEstimate {
  std::vector<double> g;
  bool noop = false;  // |E| = 0
};

// g = (1/|E|) * sum over edges (i, j) of (xi_j - xi_i).
GradientEstimate estimate_gradient(const RankingDag& dag, const Candidates& probes);

// The (m, k) ranking oracle: given m points, the indices of the k best,
// best first. Numeric values, when an implementation has them, are exposed
// only for the trace.
class RankingOracle {
 public:
  virtual ~RankingOracle() = default;
  virtual std::vector<int> rank(const Candidates& candidates, int k, int iteration) = 0;
  virtual std::optional<std::vector<double>> last_values() const { return std::nullopt; }
  virtual bool last_ties() const { return false; }
  // Objective evaluations performed so far.
  std::size_t calls() const { return calls_; }

 protected:
  std::size_t calls_ = 0;
};

// Wraps a numeric objective (lower is better).
class ValueOracle : public RankingOracle {
 public:
  using Objective = std::function<std::vector<double>(const Candidates&, int iteration)>;
  explicit ValueOracle(Objective f) : f_(std::move(f)) {}

  std::vector<int> rank(const Candidates& candidates, int k, int iteration) override;
  std::optional<std::vector<double>> last_values() const override { return values_; }
  bool last_ties() const override { return ties_; }

 private:
  Objective f_;
  std::vector<double> values_;
  bool ties_ = false;
};

struct TraceRow {
  int iteration = 0;
  std::vector<double> x;  // after the update
  std::optional<std::vector<double>> values;
  std::vector<int> ranking;
  int edges = 0;
  double grad_norm = 0.0;
  bool noop = false;
  bool ties_broken = false;
  std::optional<double> eval_return;
};

struct TuneTrace {
  int d_x = 0;
  std::size_t model_parameters = 0;  // 0 when not tuning a model prompt
  TunerConfig config;
  std::vector<double> x0;
  std::vector<TraceRow> rows;
  std::size_t oracle_calls = 0;
  bool aborted = false;
  std::string abort_reason;
  std::string config_hash;

  double parameter_ratio() const { return model_parameters ? double(d_x) / double(model_parameters) : 0.0; }
};

inline constexpr int kTraceFormatVersion = 1;

// Header line, one line per iteration, summary line.
void write_trace(std::ostream& out, const TuneTrace& trace);
std::string trace_to_jsonl(const TuneTrace& trace);
TuneTrace trace_from_jsonl(const std::string& text);
std::string trace_row_json(const TraceRow& row);

// Loop state at the start of an iteration, before its candidates are drawn.
struct ZoState {
  int iteration = 1;
  std::vector<double> x;
  std::string rng;
  TuneTrace trace;
};

ZoState initial_state(std::vector<double> x0, const TunerConfig& cfg);

struct ZoHooks {
  // Called after each update with the new point; the result is recorded as
  // the iteration's evaluation return.
  std::function<std::optional<double>(const std::vector<double>&, int iteration)> after_step;
  // Called after each row is appended.
  std::function<void(const TuneTrace&)> on_row;
  // Called before each oracle query.
  std::function<void(const ZoState&)> before_query;
};

struct ZoResult {
  std::vector<double> x;
  TuneTrace trace;
};

// T iterations of perturb -> rank -> DAG -> estimate -> x -= eta * g. An
// exception from the oracle stops the loop; the result then carries the
// partial trace with `aborted` set. `resume` continues from a saved state.
ZoResult zo_rank_sgd(RankingOracle& oracle, std::vector<double> x0, const TunerConfig& cfg, const ZoHooks& hooks = {},
                     const ZoState* resume = nullptr);

}  // namespace ptdt::zo
