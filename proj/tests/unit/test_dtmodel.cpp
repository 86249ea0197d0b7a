#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <json.hpp>
#include <random>

#include "ptdt/diffcore/adamw.hpp"
#include "ptdt/dtmodel/checkpoint.hpp"
#include "ptdt/dtmodel/model.hpp"
#include "ptdt/dtmodel/rollout.hpp"
#include "ptdt/envs/policy.hpp"
#include "support/gradcheck.hpp"
#include "support/tiny_model.hpp"

using namespace ptdt;
using namespace ptdt::dt;
using diff::Graph;
using testing::forward_values;
using testing::random_batch;
using testing::tiny_config;

namespace {

InputNorm vel_norm() { return InputNorm{{1.0, 0.0}, {1.0, 0.5}, 50.0}; }

std::filesystem::path temp_dir(const std::string& name) {
  auto dir = std::filesystem::temp_directory_path() / ("ptdt_test_" + name);
  std::filesystem::remove_all(dir);
  return dir;
}

}  // namespace

TEST_CASE("forward: output shape, tanh range, determinism") {
  auto cfg = tiny_config(4, 2);
  PromptDT<float> m(cfg, InputNorm::identity(4), 3);
  std::mt19937_64 rng(1);
  auto b = random_batch(cfg, 5, rng, {0, 1, 2});
  Graph<float> g;
  auto out = m.forward(g, b);
  CHECK(g.value(out).shape() == diff::Shape{5 * (2 + 3), 2});
  for (float v : g.value(out).data()) {
    CHECK(v >= -1.0f);
    CHECK(v <= 1.0f);
  }
  CHECK(forward_values(m, b) == forward_values(m, b));
  PromptDT<float> twin(cfg, InputNorm::identity(4), 3);
  CHECK(forward_values(twin, b) == forward_values(m, b));
}

TEST_CASE("forward: layout mismatch raises ShapeError") {
  auto cfg = tiny_config();
  PromptDT<float> m(cfg, InputNorm::identity(2), 0);
  std::mt19937_64 rng(2);
  auto other = cfg;
  other.context_len = 4;
  auto b = random_batch(other, 1, rng);
  Graph<float> g;
  CHECK_THROWS_AS(m.forward(g, b), ShapeError);
}

TEST_CASE("causality: 100 random future perturbations leave earlier predictions bitwise unchanged") {
  ModelConfig cfg = tiny_config(2, 2);
  cfg.n_layers = 2;
  cfg.n_heads = 2;
  cfg.context_len = 5;
  cfg.prompt_len = 3;
  cfg.init_std = 0.3;
  PromptDT<float> m(cfg, InputNorm::identity(2), 11);
  std::mt19937_64 rng(12);
  const auto base = random_batch(cfg, 1, rng);
  const auto before = forward_values(m, base);
  const int steps = cfg.prompt_len + cfg.context_len;
  std::uniform_int_distribution<int> pick_token(1, 3 * steps - 1);
  std::normal_distribution<double> n(0.0, 3.0);
  int changed_later = 0;
  for (int trial = 0; trial < 100; ++trial) {
    auto b = base;
    const int token = pick_token(rng);
    const int step = token / 3, modality = token % 3;
    const bool prompt = step < cfg.prompt_len;
    const int s = prompt ? step : step - cfg.prompt_len;
    if (modality == 0) {
      (prompt ? b.prompt_rtg : b.rtg)[s] += n(rng);
    } else if (modality == 1) {
      (prompt ? b.prompt_states : b.states)[s * 2 + trial % 2] += n(rng);
    } else {
      (prompt ? b.prompt_actions : b.actions)[s * 2 + trial % 2] += n(rng);
    }
    const auto after = forward_values(m, b);
    for (int t = 0; t < steps; ++t) {
      if (traj::SequenceBatch::token_index(t, 1) >= token) {
        if (after[t * 2] != before[t * 2]) ++changed_later;
        continue;
      }
      CHECK(after[t * 2] == before[t * 2]);
      CHECK(after[t * 2 + 1] == before[t * 2 + 1]);
    }
  }
  CHECK(changed_later > 0);
}

TEST_CASE("padding tokens do not influence real positions") {
  auto cfg = tiny_config();
  cfg.init_std = 0.3;
  PromptDT<float> m(cfg, InputNorm::identity(2), 5);
  std::mt19937_64 rng(6);
  auto b = random_batch(cfg, 1, rng, {2});
  const auto before = forward_values(m, b);
  b.states[0] = 99.0;
  b.rtg[1] = -40.0;
  b.timesteps[0] = 7;
  const auto after = forward_values(m, b);
  const int last = cfg.prompt_len + cfg.context_len - 1;
  CHECK(after[last] == before[last]);
}

TEST_CASE("gradcheck: dt_loss on the tiny config against central differences") {
  auto cfg = tiny_config(3, 2);
  cfg.init_std = 0.4;
  InputNorm norm{{0.1, -0.2, 0.3}, {1.5, 0.7, 1.0}, 4.0};
  PromptDT<double> m(cfg, norm, 21);
  std::mt19937_64 rng(22);
  auto b = random_batch(cfg, 2, rng, {1, 0});
  b.has_target[5] = 0;
  auto loss = [&](Graph<double>& g) { return m.loss(g, b); };
  CHECK(testing::max_rel_error(m.params(), loss) < 1e-3);

  auto with_prompt = cfg;
  with_prompt.prompt_loss = true;
  PromptDT<double> mp(with_prompt, norm, 23);
  auto loss_p = [&](Graph<double>& g) { return mp.loss(g, b); };
  CHECK(testing::max_rel_error(mp.params(), loss_p) < 1e-3);
}

TEST_CASE("dt_loss: zero at exact predictions, non-negative, prompt excluded by default") {
  auto cfg = tiny_config();
  PromptDT<float> m(cfg, InputNorm::identity(2), 1);
  m.params().get("head.w").value.fill(0.0f);
  std::mt19937_64 rng(3);
  auto b = random_batch(cfg, 3, rng, {1});
  std::fill(b.actions.begin(), b.actions.end(), 0.0);
  CHECK(m.evaluate_loss(b) == 0.0);
  // Prompt actions are nonzero and must not count.
  CHECK(std::abs(b.prompt_actions[0]) > 0.0);

  PromptDT<float> r(cfg, InputNorm::identity(2), 2);
  for (int i = 0; i < 20; ++i) CHECK(r.evaluate_loss(random_batch(cfg, 2, rng, {i % 3})) >= 0.0);
}

TEST_CASE("prompt-free configuration builds no prompt parameters") {
  auto cfg = tiny_config();
  cfg.prompt_len = 0;
  PromptDT<float> m(cfg, InputNorm::identity(2), 1);
  for (const auto& p : m.params()) CHECK(p.name.rfind("prompt.", 0) == std::string::npos);
  std::mt19937_64 rng(1);
  auto b = random_batch(cfg, 2, rng);
  Graph<float> g;
  CHECK(g.value(m.forward(g, b)).shape() == diff::Shape{6, 1});
}

TEST_CASE("200 AdamW steps on a fixed tiny dataset halve the loss") {
  auto tasks = envs::split_tasks(envs::Family::PointVel1d, 2, 0).train;
  envs::MediumCalibration cal{envs::Family::PointVel1d, 0.5, 0.5, 0.0};
  std::vector<traj::EpisodeSet> sets;
  for (const auto& t : tasks) sets.push_back(envs::generate_dataset(t, envs::QualityMix::only(envs::Quality::Expert), 4, 9, cal));

  ModelConfig cfg;
  cfg.n_layers = 1;
  cfg.d_embed = 16;
  cfg.context_len = 5;
  cfg.prompt_len = 2;
  cfg.state_dim = 2;
  cfg.action_dim = 1;
  PromptDT<float> m(cfg, vel_norm(), 7);
  Rng rng(8);
  traj::SequenceBatch batch;
  for (std::size_t i = 0; i < sets.size(); ++i) {
    for (int w = 0; w < 8; ++w) {
      auto prompt = traj::sample_prompt(sets[i], tasks[i].task_index, {2, {}, 1}, rng);
      const auto& ep = sets[i].episodes[w % sets[i].size()];
      const int end = 4 + 11 * w;
      traj::append(batch, traj::assemble_input(prompt, traj::history_window(ep, end, 5), 5));
    }
  }
  const double initial = m.evaluate_loss(batch);
  diff::AdamWConfig opt;
  opt.lr = 3e-3;
  diff::AdamWState<float> state;
  for (int step = 0; step < 200; ++step) {
    m.params().zero_grad();
    Graph<float> g;
    g.backward(m.loss(g, batch));
    diff::adamw_step(m.params(), opt, state);
  }
  const double final_loss = m.evaluate_loss(batch);
  MESSAGE("loss " << initial << " -> " << final_loss);
  CHECK(final_loss <= 0.5 * initial);
}

TEST_CASE("checkpoint: bitwise round trip and version rejection") {
  auto cfg = tiny_config();
  PromptDT<float> m(cfg, vel_norm(), 4);
  CheckpointMeta meta{envs::Family::PointVel1d, "abc123", {{"pretrain", 4}, {"data", 9}}, "unit"};
  auto dir = temp_dir("ckpt");
  save_checkpoint(dir, m, meta);
  auto loaded = load_checkpoint(dir);
  CHECK(loaded.meta == meta);
  CHECK(loaded.model.config() == cfg);
  CHECK(loaded.model.norm() == m.norm());
  REQUIRE(loaded.model.params().size() == m.params().size());
  for (std::size_t i = 0; i < m.params().size(); ++i) {
    CHECK(loaded.model.params()[i].name == m.params()[i].name);
    CHECK(loaded.model.params()[i].value == m.params()[i].value);
  }
  CHECK(parameter_digest(loaded.model) == parameter_digest(m));

  auto again = temp_dir("ckpt2");
  save_checkpoint(again, loaded.model, loaded.meta);
  auto slurp = [](const std::filesystem::path& p) {
    std::ifstream f(p, std::ios::binary);
    return std::string((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
  };
  CHECK(slurp(dir / "params.bin") == slurp(again / "params.bin"));
  CHECK(slurp(dir / "manifest.json") == slurp(again / "manifest.json"));

  auto manifest = nlohmann::json::parse(slurp(dir / "manifest.json"));
  manifest["format_version"] = 99;
  std::ofstream(dir / "manifest.json") << manifest.dump();
  CHECK_THROWS_AS(load_checkpoint(dir), VersionError);

  auto blob = slurp(again / "params.bin");
  blob[5] ^= 1;
  std::ofstream(again / "params.bin", std::ios::binary) << blob;
  CHECK_THROWS_AS(load_checkpoint(again), DataError);
  CHECK_THROWS_AS(load_checkpoint(temp_dir("missing")), DataError);
}

TEST_CASE("live history: first step and rtg decrement") {
  LiveHistory h(2, 1);
  h.start(std::vector<double>{0.0, 0.0}, 80.0);
  auto w = h.window(3);
  CHECK(w.length() == 1);
  CHECK(w.rtg[0] == 80.0);
  CHECK(w.actions_known() == 0);
  h.record(std::vector<double>{0.5}, -2.5, std::vector<double>{0.05, 0.5});
  CHECK(h.current_rtg() == 82.5);
  for (int i = 0; i < 4; ++i) h.record(std::vector<double>{0.1}, 1.0, std::vector<double>{0.0, 0.1});
  w = h.window(3);
  CHECK(w.length() == 3);
  CHECK(w.timesteps == std::vector<int>{3, 4, 5});
  CHECK(w.actions_known() == 2);
  CHECK(w.rtg.back() == 78.5);
}

TEST_CASE("act and rollout_batch: deterministic, batching matches single rollouts") {
  ModelConfig cfg = tiny_config(2, 2);
  cfg.max_timestep = 50;
  cfg.init_std = 0.2;
  PromptDT<float> m(cfg, InputNorm{{0, 0}, {1, 1}, 10.0}, 31);
  auto tasks = envs::enumerate_tasks(envs::Family::PointReach2d, 4);
  envs::MediumCalibration cal{envs::Family::PointReach2d, 0.5, 0.5, 0.0};
  std::vector<RolloutRequest> reqs;
  for (int i = 0; i < 3; ++i) {
    auto ep = envs::rollout_scripted(tasks[i], envs::Quality::Expert, 100 + i, cal);
    reqs.push_back({tasks[i], traj::cut_prompt(ep, 3, 2, -1), std::uint64_t(50 + i), -20.0});
  }
  LiveHistory h(2, 2);
  h.start(envs::env_reset(tasks[0], derive_seed(50, {0})).values, -20.0);
  CHECK(act(m, reqs[0].prompt, h) == act(m, reqs[0].prompt, h));

  auto batched = rollout_batch(m, reqs);
  REQUIRE(batched.size() == 3u);
  for (int i = 0; i < 3; ++i) {
    auto single = rollout_batch(m, std::span(reqs).subspan(i, 1));
    CHECK(batched[i].length() == 50);
    CHECK(batched[i].task_index == tasks[i].task_index);
    CHECK(batched[i].episodic_return() == doctest::Approx(single[0].episodic_return()).epsilon(1e-4));
  }
  CHECK(rollout_batch(m, reqs) == batched);
  // First step's action is the model's action on the one-step history.
  auto a0 = act(m, reqs[0].prompt, h);
  CHECK(batched[0].actions[0] == doctest::Approx(a0[0]));
}
