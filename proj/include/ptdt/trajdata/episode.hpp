#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "ptdt/envs/task.hpp"

namespace ptdt::traj {

// Suffix sums: rtg[t] = rewards[t] + rtg[t+1].
std::vector<double> compute_rtg(std::span<const double> rewards);

// One rollout. States and actions are row-major [length x dim].
struct Episode {
  envs::Family family = envs::Family::PointVel1d;
  int task_index = 0;
  envs::Quality quality = envs::Quality::Random;
  std::uint64_t seed = 0;
  int state_dim = 0;
  int action_dim = 0;
  std::vector<double> states;
  std::vector<double> actions;
  std::vector<double> rewards;
  std::vector<double> rtg;
  std::vector<int> timesteps;

  int length() const { return static_cast<int>(rewards.size()); }
  double episodic_return() const;
  std::span<const double> state(int t) const {
    return {states.data() + std::size_t(t) * state_dim, std::size_t(state_dim)};
  }
  std::span<const double> action(int t) const {
    return {actions.data() + std::size_t(t) * action_dim, std::size_t(action_dim)};
  }
  // Recomputes rtg and timesteps from rewards; checks array lengths.
  void finalize();

  friend bool operator==(const Episode&, const Episode&) = default;
};

struct EpisodeSet {
  std::vector<Episode> episodes;

  std::size_t size() const { return episodes.size(); }
  bool empty() const { return episodes.empty(); }
  // Indices of episodes for `task_index`, optionally restricted to a quality.
  std::vector<int> select(int task_index, const envs::Quality* quality = nullptr) const;

  friend bool operator==(const EpisodeSet&, const EpisodeSet&) = default;
};

}  // namespace ptdt::traj
