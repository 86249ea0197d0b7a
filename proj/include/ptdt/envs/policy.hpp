#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "ptdt/common/rng.hpp"
#include "ptdt/envs/env.hpp"
#include "ptdt/trajdata/episode.hpp"

namespace ptdt::envs {

// Medium behavior: clip(scale * expert + noise * N(0, 1)). `scale` is fitted
// per family so the medium normalized score lands near one third.
struct MediumCalibration {
  Family family = Family::PointVel1d;
  double scale = 0.5;
  double noise = 0.5;
  double achieved_ratio = 0.0;  // normalized medium return / 100 at the fit
};

std::vector<double> expert_action(const TaskSpec& task, const EnvState& state);

std::vector<double> scripted_policy(Quality quality, const TaskSpec& task, const EnvState& state, Rng& rng,
                                    const MediumCalibration& medium);

// Full scripted rollout; reset and policy streams are derived from `seed`.
traj::Episode rollout_scripted(const TaskSpec& task, Quality quality, std::uint64_t seed,
                               const MediumCalibration& medium);

double mean_scripted_return(const std::vector<TaskSpec>& tasks, Quality quality, int episodes_per_task,
                            std::uint64_t seed, const MediumCalibration& medium);

// Bisection on the medium scale so (medium - random) / (expert - random)
// approaches `target_ratio` on the given tasks.
MediumCalibration calibrate_medium(Family family, const std::vector<TaskSpec>& tasks, int episodes_per_task,
                                   std::uint64_t seed, double target_ratio = 1.0 / 3.0);

// Fractions of random / medium / expert episodes; episodes are emitted in
// that order so slicing first / middle / last selects by quality.
struct QualityMix {
  double random = 1.0 / 3.0;
  double medium = 1.0 / 3.0;
  double expert = 1.0 / 3.0;

  static QualityMix gradient() { return {}; }
  static QualityMix only(Quality q);
};

traj::EpisodeSet generate_dataset(const TaskSpec& task, const QualityMix& mix, int n_episodes, std::uint64_t seed,
                                  const MediumCalibration& medium);

}  // namespace ptdt::envs
