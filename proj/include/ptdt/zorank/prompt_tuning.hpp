#pragma once

#include <cstdint>
#include <vector>

#include "ptdt/dtmodel/model.hpp"
#include "ptdt/dtmodel/rollout.hpp"
#include "ptdt/envs/task.hpp"
#include "ptdt/trajdata/prompt.hpp"
#include "ptdt/trajdata/windows.hpp"
#include "ptdt/zorank/zorank.hpp"

namespace ptdt::zo {

struct OfflineOracleConfig {
  // Evaluation batches per oracle value, each of `batch_size` windows.
  int eval_batches = 8;
  int batch_size = 32;
  // Draw new batches from the window pool every iteration instead of fixing
  // them for the whole run.
  bool resample = false;
  std::uint64_t seed = 0;
};

// f(x) = mean squared action error over evaluation windows with the
// candidate prompt substituted; every candidate of a query sees the same
// windows.
class OfflineLossObjective {
 public:
  OfflineLossObjective(const dt::PromptDT<float>& model, const traj::EpisodeSet& data,
                       std::vector<traj::WindowRef> windows, traj::PromptLayout layout, OfflineOracleConfig cfg);

  std::vector<double> operator()(const Candidates& candidates, int iteration) const;
  double loss(const traj::PromptSegment& prompt, int iteration) const;
  std::size_t windows_per_value() const;

 private:
  std::vector<std::vector<traj::WindowRef>> batches_for(int iteration) const;

  const dt::PromptDT<float>* model_;
  const traj::EpisodeSet* data_;
  std::vector<traj::WindowRef> windows_;
  traj::PromptLayout layout_;
  OfflineOracleConfig cfg_;
  std::vector<std::vector<traj::WindowRef>> fixed_;
};

struct OnlineOracleConfig {
  int episodes = 10;
  double target_rtg = 0.0;
  // Common seeds across the candidates of one query.
  bool paired = true;
  std::uint64_t seed = 0;
};

// f(x) = -mean episodic return of rollouts conditioned on the candidate.
class OnlineReturnObjective {
 public:
  OnlineReturnObjective(const dt::PromptDT<float>& model, envs::TaskSpec task, traj::PromptLayout layout,
                        OnlineOracleConfig cfg);

  std::vector<double> operator()(const Candidates& candidates, int iteration) const;
  // Rollout requests of one query, candidate-major.
  std::vector<dt::RolloutRequest> requests(const Candidates& candidates, int iteration) const;
  std::uint64_t episode_seed(int iteration, int candidate, int episode) const;

 private:
  const dt::PromptDT<float>* model_;
  envs::TaskSpec task_;
  traj::PromptLayout layout_;
  OnlineOracleConfig cfg_;
};

struct TuneResult {
  traj::PromptSegment prompt;
  TuneTrace trace;
};

// Flattens the prompt, runs zo_rank_sgd and unflattens the result. The model
// is never modified.
TuneResult tune_prompt(const dt::PromptDT<float>& model, const traj::PromptSegment& initial, RankingOracle& oracle,
                       const TunerConfig& cfg, const ZoHooks& hooks = {});

}  // namespace ptdt::zo
