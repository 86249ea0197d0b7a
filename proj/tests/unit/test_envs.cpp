#include <doctest.h>

#include <cmath>
#include <numbers>
#include <set>
#include <sstream>

#include "ptdt/envs/env.hpp"
#include "ptdt/envs/policy.hpp"
#include "ptdt/trajdata/dataset_io.hpp"

using namespace ptdt;
using namespace ptdt::envs;

namespace {

TaskSpec vel_task(double target) {
  return TaskSpec{Family::PointVel1d, {target}, 0, 100};
}

MediumCalibration fitted(Family f) {
  auto tasks = split_tasks(f, f == Family::PointDir2d ? 2 : 8, 0).train;
  return calibrate_medium(f, tasks, 25, 2024);
}

}  // namespace

TEST_CASE("env_reset: fixed and seeded starts") {
  TaskSpec dir{Family::PointDir2d, {0.0}, 0, 100};
  CHECK(env_reset(dir, 1).values == std::vector<double>{0, 0, 0, 0});
  CHECK(env_reset(dir, 777).values == std::vector<double>{0, 0, 0, 0});
  CHECK(env_reset(vel_task(1.0), 5).values[0] == 0.0);
  TaskSpec reach{Family::PointReach2d, {1.0, 0.5}, 0, 50};
  auto a = env_reset(reach, 42), b = env_reset(reach, 42), c = env_reset(reach, 43);
  CHECK(a == b);
  CHECK(a != c);
  for (double v : a.values) CHECK(std::abs(v) <= 1.0);
}

TEST_CASE("env_step: reward semantics") {
  auto vel = vel_task(1.0);
  EnvState s{{1.0, 0.0}, 0};
  CHECK(env_step(vel, s, std::vector<double>{0.0}).reward == 0.0);

  TaskSpec reach{Family::PointReach2d, {1.0, -0.5}, 0, 50};
  EnvState at_goal{{1.0, -0.5}, 3};
  CHECK(env_step(reach, at_goal, std::vector<double>{0.0, 0.0}).reward == 0.0);

  TaskSpec dir{Family::PointDir2d, {0.0}, 0, 100};
  EnvState moving{{0.0, 0.0, 1.0, 0.0}, 0};
  CHECK(env_step(dir, moving, std::vector<double>{0.0, 0.0}).reward == doctest::Approx(1.0));
}

TEST_CASE("env_step: clipping, speed limits, episode end") {
  auto vel = vel_task(3.0);
  EnvState s{{3.45, 0.0}, 0};
  auto tr = env_step(vel, s, std::vector<double>{7.0});
  CHECK(tr.action[0] == 1.0);
  CHECK(tr.next_state.values[0] == kVelMaxSpeed);

  TaskSpec dir{Family::PointDir2d, {0.3}, 0, 100};
  EnvState fast{{0, 0, 2.0, 0.0}, 0};
  auto tr2 = env_step(dir, fast, std::vector<double>{1.0, 1.0});
  CHECK(std::hypot(tr2.next_state.values[2], tr2.next_state.values[3]) <= kDirMaxSpeed + 1e-12);

  EnvState done{{0.0, 0.0}, 100};
  CHECK_THROWS_AS(env_step(vel, done, std::vector<double>{0.0}), EpisodeDone);
  CHECK_THROWS_AS(env_step(vel, s, std::vector<double>{0.0, 1.0}), ShapeError);
}

TEST_CASE("task invariants") {
  CHECK_THROWS_AS(env_reset(vel_task(3.5), 0), ContractError);
  CHECK_NOTHROW(env_reset(vel_task(3.0), 0));
}

TEST_CASE("scripted_policy: expert and random behavior") {
  MediumCalibration cal;
  Rng rng(0);
  auto a = scripted_policy(Quality::Expert, vel_task(1.0), EnvState{{0.0, 0.0}, 0}, rng, cal);
  CHECK(a == std::vector<double>{1.0});

  TaskSpec reach{Family::PointReach2d, {0.0, 0.0}, 0, 50};
  double sum0 = 0, sum1 = 0;
  const int n = 100000;
  for (int i = 0; i < n; ++i) {
    auto r = scripted_policy(Quality::Random, reach, EnvState{{0.0, 0.0}, 0}, rng, cal);
    CHECK(std::abs(r[0]) <= 1.0);
    sum0 += r[0];
    sum1 += r[1];
  }
  CHECK(std::abs(sum0 / n) < 0.02);
  CHECK(std::abs(sum1 / n) < 0.02);

  TaskSpec dir{Family::PointDir2d, {std::numbers::pi / 2}, 0, 100};
  auto e = expert_action(dir, EnvState{{0, 0, 0, 0}, 0});
  CHECK(std::hypot(e[0], e[1]) == doctest::Approx(1.0));
}

TEST_CASE("medium calibration on dir-2d lands near one third of expert over 50 episodes") {
  auto cal = fitted(Family::PointDir2d);
  auto tasks = split_tasks(Family::PointDir2d, 2, 0).train;
  const double medium = mean_scripted_return(tasks, Quality::Medium, 25, 5150, cal);
  const double expert = mean_scripted_return(tasks, Quality::Expert, 25, 5150, cal);
  const double ratio = medium / expert;
  CHECK(ratio >= 0.23);
  CHECK(ratio <= 0.43);
}

TEST_CASE("strict ordering expert > medium > random and bounded rewards on every family") {
  for (Family f : {Family::PointDir2d, Family::PointVel1d, Family::PointReach2d}) {
    auto cal = fitted(f);
    auto tasks = split_tasks(f, f == Family::PointDir2d ? 2 : 8, f == Family::PointDir2d ? 0 : 2).train;
    const double ex = mean_scripted_return(tasks, Quality::Expert, 20, 9, cal);
    const double md = mean_scripted_return(tasks, Quality::Medium, 20, 9, cal);
    const double rd = mean_scripted_return(tasks, Quality::Random, 20, 9, cal);
    CHECK(ex > md);
    CHECK(md > rd);
    for (Quality q : {Quality::Random, Quality::Medium, Quality::Expert}) {
      auto ep = rollout_scripted(tasks[0], q, 3, cal);
      CHECK(ep.length() == tasks[0].horizon);
      for (double r : ep.rewards) CHECK(std::abs(r) <= reward_bound(f));
    }
  }
}

TEST_CASE("same (task, seed, policy) gives an identical episode") {
  TaskSpec reach{Family::PointReach2d, {0.5, 1.0}, 3, 50};
  MediumCalibration cal{Family::PointReach2d, 0.3, 0.5, 0};
  CHECK(rollout_scripted(reach, Quality::Medium, 17, cal) == rollout_scripted(reach, Quality::Medium, 17, cal));
}

TEST_CASE("generate_dataset: quality gradient order, determinism, expert beats random") {
  for (Family f : {Family::PointDir2d, Family::PointVel1d, Family::PointReach2d}) {
    auto task = enumerate_tasks(f, 4)[1];
    auto cal = fitted(f);
    auto set = generate_dataset(task, QualityMix::gradient(), 30, 8, cal);
    REQUIRE(set.size() == 30u);
    double first = 0, last = 0;
    for (int i = 0; i < 10; ++i) {
      CHECK(set.episodes[i].quality == Quality::Random);
      CHECK(set.episodes[20 + i].quality == Quality::Expert);
      CHECK(set.episodes[i].task_index == task.task_index);
      first += set.episodes[i].episodic_return();
      last += set.episodes[20 + i].episodic_return();
    }
    CHECK(set.episodes[15].quality == Quality::Medium);
    CHECK(last > first);

    auto again = generate_dataset(task, QualityMix::gradient(), 30, 8, cal);
    std::ostringstream a, b;
    for (const auto& ep : set.episodes) a << traj::episode_to_jsonl(ep, "h") << '\n';
    for (const auto& ep : again.episodes) b << traj::episode_to_jsonl(ep, "h") << '\n';
    CHECK(a.str() == b.str());
  }
}

TEST_CASE("split_tasks: interleaved held-out indices, disjoint sets") {
  auto split = split_tasks(Family::PointVel1d, 8, 2);
  REQUIRE(split.test.size() == 2u);
  CHECK(split.test[0].task_index == 2);
  CHECK(split.test[1].task_index == 7);
  CHECK(split.test[0].param[0] == doctest::Approx(2.0 / 3.0));
  CHECK(split.test[1].param[0] == doctest::Approx(7.0 / 3.0));
  std::set<int> train_ids;
  for (const auto& t : split.train) train_ids.insert(t.task_index);
  CHECK(train_ids.size() == 8u);
  for (const auto& t : split.test) CHECK(train_ids.count(t.task_index) == 0);
  CHECK(split.train.front().param[0] == 0.0);
  CHECK(split.train.back().param[0] == 3.0);

  auto dir = split_tasks(Family::PointDir2d, 2, 0);
  REQUIRE(dir.train.size() == 2u);
  CHECK(dir.train[0].param[0] == 0.0);
  CHECK(dir.train[1].param[0] == doctest::Approx(std::numbers::pi));
}
