#include "ptdt/envs/policy.hpp"

#include <algorithm>
#include <cmath>

#include "ptdt/common/errors.hpp"

namespace ptdt::envs {

std::vector<double> expert_action(const TaskSpec& task, const EnvState& state) {
  const auto& s = state.values;
  switch (task.family) {
    case Family::PointDir2d:
      return {std::cos(task.param[0]), std::sin(task.param[0])};
    case Family::PointVel1d:
      return {std::clamp(5.0 * (task.param[0] - s[0]), -1.0, 1.0)};
    case Family::PointReach2d:
      return {std::clamp(5.0 * (task.param[0] - s[0]), -1.0, 1.0),
              std::clamp(5.0 * (task.param[1] - s[1]), -1.0, 1.0)};
  }
  return {};
}

std::vector<double> scripted_policy(Quality quality, const TaskSpec& task, const EnvState& state, Rng& rng,
                                    const MediumCalibration& medium) {
  const int d_a = task.action_dim();
  std::vector<double> a(d_a);
  switch (quality) {
    case Quality::Random: {
      std::uniform_real_distribution<double> u(-1.0, 1.0);
      for (auto& x : a) x = u(rng);
      break;
    }
    case Quality::Expert:
      a = expert_action(task, state);
      break;
    case Quality::Medium: {
      a = expert_action(task, state);
      std::normal_distribution<double> n(0.0, 1.0);
      for (auto& x : a) x = std::clamp(medium.scale * x + medium.noise * n(rng), -1.0, 1.0);
      break;
    }
  }
  return a;
}

traj::Episode rollout_scripted(const TaskSpec& task, Quality quality, std::uint64_t seed,
                               const MediumCalibration& medium) {
  traj::Episode ep;
  ep.family = task.family;
  ep.task_index = task.task_index;
  ep.quality = quality;
  ep.seed = seed;
  ep.state_dim = task.state_dim();
  ep.action_dim = task.action_dim();
  EnvState s = env_reset(task, derive_seed(seed, {0}));
  Rng policy_rng(derive_seed(seed, {1}));
  while (!episode_done(task, s)) {
    auto a = scripted_policy(quality, task, s, policy_rng, medium);
    Transition tr = env_step(task, s, a);
    ep.states.insert(ep.states.end(), s.values.begin(), s.values.end());
    ep.actions.insert(ep.actions.end(), tr.action.begin(), tr.action.end());
    ep.rewards.push_back(tr.reward);
    s = std::move(tr.next_state);
  }
  ep.finalize();
  return ep;
}

double mean_scripted_return(const std::vector<TaskSpec>& tasks, Quality quality, int episodes_per_task,
                            std::uint64_t seed, const MediumCalibration& medium) {
  if (tasks.empty() || episodes_per_task < 1) throw ContractError("mean_scripted_return: nothing to evaluate");
  double total = 0.0;
  for (const auto& task : tasks) {
    for (int e = 0; e < episodes_per_task; ++e) {
      const auto s = derive_seed(seed, {static_cast<std::uint64_t>(task.task_index), static_cast<std::uint64_t>(e)});
      total += rollout_scripted(task, quality, s, medium).episodic_return();
    }
  }
  return total / (static_cast<double>(tasks.size()) * episodes_per_task);
}

MediumCalibration calibrate_medium(Family family, const std::vector<TaskSpec>& tasks, int episodes_per_task,
                                   std::uint64_t seed, double target_ratio) {
  MediumCalibration cal;
  cal.family = family;
  const double expert = mean_scripted_return(tasks, Quality::Expert, episodes_per_task, seed, cal);
  const double random = mean_scripted_return(tasks, Quality::Random, episodes_per_task, seed, cal);
  if (!(expert > random)) throw DegenerateBaselineError("calibrate_medium: expert does not beat random");
  auto ratio_at = [&](double scale) {
    MediumCalibration c = cal;
    c.scale = scale;
    return (mean_scripted_return(tasks, Quality::Medium, episodes_per_task, seed, c) - random) / (expert - random);
  };
  double lo = 0.0, hi = 1.0;
  for (int it = 0; it < 30; ++it) {
    const double mid = 0.5 * (lo + hi);
    (ratio_at(mid) < target_ratio ? lo : hi) = mid;
  }
  cal.scale = 0.5 * (lo + hi);
  cal.achieved_ratio = ratio_at(cal.scale);
  return cal;
}

QualityMix QualityMix::only(Quality q) {
  QualityMix m{0.0, 0.0, 0.0};
  switch (q) {
    case Quality::Random: m.random = 1.0; break;
    case Quality::Medium: m.medium = 1.0; break;
    case Quality::Expert: m.expert = 1.0; break;
  }
  return m;
}

traj::EpisodeSet generate_dataset(const TaskSpec& task, const QualityMix& mix, int n_episodes, std::uint64_t seed,
                                  const MediumCalibration& medium) {
  if (n_episodes < 1) throw ContractError("generate_dataset: n_episodes must be >= 1");
  const double total = mix.random + mix.medium + mix.expert;
  if (!(total > 0) || mix.random < 0 || mix.medium < 0 || mix.expert < 0) {
    throw ContractError("generate_dataset: quality fractions must be non-negative and not all zero");
  }
  const int n_random = static_cast<int>(std::lround(n_episodes * mix.random / total));
  const int n_medium = std::min(n_episodes - n_random, static_cast<int>(std::lround(n_episodes * mix.medium / total)));
  traj::EpisodeSet set;
  for (int e = 0; e < n_episodes; ++e) {
    const Quality q = e < n_random ? Quality::Random : e < n_random + n_medium ? Quality::Medium : Quality::Expert;
    const auto ep_seed = derive_seed(seed, {static_cast<std::uint64_t>(task.task_index), static_cast<std::uint64_t>(e)});
    set.episodes.push_back(rollout_scripted(task, q, ep_seed, medium));
  }
  return set;
}

}  // namespace ptdt::envs
