#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "ptdt/dtmodel/model.hpp"
#include "ptdt/envs/env.hpp"
#include "ptdt/trajdata/episode.hpp"
#include "ptdt/trajdata/prompt.hpp"
#include "ptdt/trajdata/sequence.hpp"

namespace ptdt::dt {

// Streaming history of a live episode. The conditioning rtg starts at the
// target and drops by each observed reward.
class LiveHistory {
 public:
  LiveHistory(int state_dim, int action_dim) : state_dim_(state_dim), action_dim_(action_dim) {}

  void start(std::span<const double> state, double target_rtg);
  void record(std::span<const double> action, double reward, std::span<const double> next_state);

  int steps() const { return static_cast<int>(rtg_.size()); }
  double current_rtg() const { return rtg_.back(); }
  // Last `context` steps, ending at the current state with its action unknown.
  traj::History window(int context) const;

 private:
  int state_dim_;
  int action_dim_;
  std::vector<double> rtg_;
  std::vector<double> states_;
  std::vector<double> actions_;
};

std::vector<double> act(const PromptDT<float>& model, const traj::PromptSegment& prompt, const LiveHistory& history);

struct RolloutRequest {
  envs::TaskSpec task;
  traj::PromptSegment prompt;
  std::uint64_t seed = 0;
  double target_rtg = 0.0;
};

// Runs every request to its horizon, stepping all live episodes through one
// batched forward pass per timestep; requests are split across max_threads()
// workers. Reset noise comes from derive_seed(seed, {0}).
std::vector<traj::Episode> rollout_batch(const PromptDT<float>& model, std::span<const RolloutRequest> requests);

}  // namespace ptdt::dt
