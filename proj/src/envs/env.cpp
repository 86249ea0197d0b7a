#include "ptdt/envs/env.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>

#include "ptdt/common/errors.hpp"

namespace ptdt::envs {

EnvState env_reset(const TaskSpec& task, std::uint64_t seed) {
  validate(task);
  EnvState s;
  switch (task.family) {
    case Family::PointDir2d: s.values.assign(4, 0.0); break;
    case Family::PointVel1d: s.values.assign(2, 0.0); break;
    case Family::PointReach2d: {
      Rng rng(seed);
      std::uniform_real_distribution<double> u(-1.0, 1.0);
      const double x = u(rng);
      const double y = u(rng);
      s.values = {x, y};
      break;
    }
  }
  return s;
}

bool episode_done(const TaskSpec& task, const EnvState& state) { return state.t >= task.horizon; }

Transition env_step(const TaskSpec& task, const EnvState& state, std::span<const double> action) {
  if (episode_done(task, state)) {
    throw EpisodeDone("episode finished at t=" + std::to_string(state.t) + " (horizon " +
                      std::to_string(task.horizon) + ")");
  }
  const int d_a = task.action_dim();
  if (static_cast<int>(action.size()) != d_a) {
    throw ShapeError("env_step: expected action of size " + std::to_string(d_a) + ", got " +
                     std::to_string(action.size()));
  }
  Transition tr;
  tr.state = state;
  tr.t = state.t;
  tr.action.resize(d_a);
  for (int i = 0; i < d_a; ++i) {
    const double a = std::isfinite(action[i]) ? action[i] : 0.0;
    tr.action[i] = std::clamp(a, -1.0, 1.0);
  }
  EnvState next = state;
  next.t = state.t + 1;
  auto& v = next.values;
  switch (task.family) {
    case Family::PointDir2d: {
      double vx = v[2] + kDt * tr.action[0];
      double vy = v[3] + kDt * tr.action[1];
      const double speed = std::hypot(vx, vy);
      if (speed > kDirMaxSpeed) {
        vx *= kDirMaxSpeed / speed;
        vy *= kDirMaxSpeed / speed;
      }
      v[0] += kDt * vx;
      v[1] += kDt * vy;
      v[2] = vx;
      v[3] = vy;
      const double theta = task.param[0];
      tr.reward = vx * std::cos(theta) + vy * std::sin(theta);
      break;
    }
    case Family::PointVel1d: {
      v[0] = std::clamp(v[0] + kDt * tr.action[0], -kVelMaxSpeed, kVelMaxSpeed);
      v[1] = tr.action[0];
      tr.reward = -std::abs(v[0] - task.param[0]);
      break;
    }
    case Family::PointReach2d: {
      v[0] = std::clamp(v[0] + kDt * tr.action[0], -kArena, kArena);
      v[1] = std::clamp(v[1] + kDt * tr.action[1], -kArena, kArena);
      tr.reward = -std::hypot(v[0] - task.param[0], v[1] - task.param[1]);
      break;
    }
  }
  tr.next_state = std::move(next);
  return tr;
}

double reward_bound(Family f) {
  switch (f) {
    case Family::PointDir2d: return kDirMaxSpeed;
    case Family::PointVel1d: return kVelMaxSpeed;
    case Family::PointReach2d: return 4.0 * std::numbers::sqrt2;
  }
  return 0.0;
}

std::vector<TaskSpec> enumerate_tasks(Family family, int count) {
  if (count < 1) throw ContractError("enumerate_tasks: count must be >= 1");
  std::vector<TaskSpec> out;
  const int horizon = family_dims(family).horizon;
  for (int i = 0; i < count; ++i) {
    TaskSpec t;
    t.family = family;
    t.task_index = i;
    t.horizon = horizon;
    const double angle = 2.0 * std::numbers::pi * i / count;
    switch (family) {
      case Family::PointDir2d: t.param = {angle}; break;
      case Family::PointVel1d: t.param = {count == 1 ? 1.5 : 3.0 * i / (count - 1)}; break;
      case Family::PointReach2d: t.param = {1.5 * std::cos(angle), 1.5 * std::sin(angle)}; break;
    }
    out.push_back(std::move(t));
  }
  return out;
}

TaskSplit split_tasks(Family family, int n_train, int n_test) {
  if (n_train < 0 || n_test < 0 || n_train + n_test < 1) {
    throw ContractError("split_tasks: need at least one task");
  }
  const int n = n_train + n_test;
  auto all = enumerate_tasks(family, n);
  std::vector<bool> held(n, false);
  for (int j = 0; j < n_test; ++j) {
    const int idx = static_cast<int>(std::lround((j + 0.5) * n / n_test)) - 1;
    held[std::clamp(idx, 0, n - 1)] = true;
  }
  TaskSplit split;
  for (int i = 0; i < n; ++i) (held[i] ? split.test : split.train).push_back(all[i]);
  if (static_cast<int>(split.test.size()) != n_test) {
    throw ContractError("split_tasks: held-out rule collided for n_test=" + std::to_string(n_test));
  }
  return split;
}

}  // namespace ptdt::envs
