#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "ptdt/common/errors.hpp"
#include "ptdt/common/rng.hpp"
#include "ptdt/envs/task.hpp"

namespace ptdt::envs {

inline constexpr double kDt = 0.1;
inline constexpr double kDirMaxSpeed = 2.0;
inline constexpr double kVelMaxSpeed = 3.5;
inline constexpr double kArena = 2.0;

// dir-2d: (px, py, vx, vy); vel-1d: (v, previous action); reach-2d: (px, py).
struct EnvState {
  std::vector<double> values;
  int t = 0;
  friend bool operator==(const EnvState&, const EnvState&) = default;
};

struct Transition {
  EnvState state;
  std::vector<double> action;
  double reward = 0.0;
  EnvState next_state;
  int t = 0;
};

EnvState env_reset(const TaskSpec& task, std::uint64_t seed);

// Clips the action to [-1, 1]^d_a and advances one step. Throws EpisodeDone
// once `state.t` reaches the horizon.
Transition env_step(const TaskSpec& task, const EnvState& state, std::span<const double> action);

bool episode_done(const TaskSpec& task, const EnvState& state);

// Per-step reward bound implied by the clipping limits.
double reward_bound(Family f);

// Evenly enumerated tasks of a family; see split_tasks for the held-out rule.
std::vector<TaskSpec> enumerate_tasks(Family family, int count);

struct TaskSplit {
  std::vector<TaskSpec> train;
  std::vector<TaskSpec> test;
};

// Enumerates n_train + n_test tasks and holds out test indices spread through
// the parameter range: index j of the held-out set is
// round((j + 0.5) * n / n_test) - 1 (10 tasks, 2 held out -> {2, 7}).
TaskSplit split_tasks(Family family, int n_train, int n_test);

}  // namespace ptdt::envs
