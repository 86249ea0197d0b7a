#include "ptdt/trajdata/episode.hpp"

#include <numeric>

#include "ptdt/common/errors.hpp"

namespace ptdt::traj {

std::vector<double> compute_rtg(std::span<const double> rewards) {
  std::vector<double> rtg(rewards.size());
  double acc = 0.0;
  for (std::size_t i = rewards.size(); i-- > 0;) {
    acc = rewards[i] + acc;
    rtg[i] = acc;
  }
  return rtg;
}

double Episode::episodic_return() const {
  return std::accumulate(rewards.begin(), rewards.end(), 0.0);
}

void Episode::finalize() {
  const auto n = rewards.size();
  if (states.size() != n * state_dim || actions.size() != n * action_dim) {
    throw ShapeError("episode arrays disagree: " + std::to_string(n) + " rewards, " +
                     std::to_string(states.size()) + " state values (dim " + std::to_string(state_dim) +
                     "), " + std::to_string(actions.size()) + " action values (dim " +
                     std::to_string(action_dim) + ")");
  }
  rtg = compute_rtg(rewards);
  timesteps.resize(n);
  std::iota(timesteps.begin(), timesteps.end(), 0);
}

std::vector<int> EpisodeSet::select(int task_index, const envs::Quality* quality) const {
  std::vector<int> out;
  for (std::size_t i = 0; i < episodes.size(); ++i) {
    const auto& e = episodes[i];
    if (e.task_index != task_index) continue;
    if (quality != nullptr && e.quality != *quality) continue;
    out.push_back(static_cast<int>(i));
  }
  return out;
}

}  // namespace ptdt::traj
