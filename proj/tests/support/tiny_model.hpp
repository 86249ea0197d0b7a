#pragma once

#include <cmath>
#include <random>
#include <vector>

#include "ptdt/diffcore/graph.hpp"
#include "ptdt/dtmodel/model.hpp"
#include "ptdt/trajdata/sequence.hpp"

namespace ptdt::testing {

using dt::ModelConfig;
using dt::PromptDT;
using diff::Graph;

inline ModelConfig tiny_config(int d_s = 2, int d_a = 1) {
  ModelConfig c;
  c.n_layers = 1;
  c.n_heads = 1;
  c.d_embed = 8;
  c.context_len = 3;
  c.prompt_len = 2;
  c.state_dim = d_s;
  c.action_dim = d_a;
  c.max_timestep = 16;
  return c;
}

// Random batch; sequence b has `pad[b]` left-padded history steps.
inline traj::SequenceBatch random_batch(const ModelConfig& c, int B, std::mt19937_64& rng, std::vector<int> pad = {}) {
  std::normal_distribution<double> n(0.0, 1.0);
  std::uniform_int_distribution<int> ts(0, c.max_timestep - 1);
  traj::SequenceBatch b;
  b.batch = B;
  b.prompt_len = c.prompt_len;
  b.context_len = c.context_len;
  b.state_dim = c.state_dim;
  b.action_dim = c.action_dim;
  auto fill = [&](std::vector<double>& v, std::size_t count, bool squash) {
    v.resize(count);
    for (auto& x : v) x = squash ? std::tanh(n(rng)) : n(rng);
  };
  const std::size_t Kp = c.prompt_len, K = c.context_len;
  fill(b.prompt_rtg, B * Kp, false);
  fill(b.prompt_states, B * Kp * c.state_dim, false);
  fill(b.prompt_actions, B * Kp * c.action_dim, true);
  fill(b.rtg, B * K, false);
  fill(b.states, B * K * c.state_dim, false);
  fill(b.actions, B * K * c.action_dim, true);
  for (std::size_t i = 0; i < B * Kp; ++i) b.prompt_timesteps.push_back(ts(rng));
  for (std::size_t i = 0; i < B * K; ++i) b.timesteps.push_back(ts(rng));
  b.valid.assign(B * K, 1);
  b.has_target.assign(B * K, 1);
  for (int s = 0; s < int(pad.size()); ++s) {
    for (int k = 0; k < pad[s]; ++k) b.valid[s * K + k] = b.has_target[s * K + k] = 0;
  }
  return b;
}

inline std::vector<float> forward_values(PromptDT<float>& m, const traj::SequenceBatch& b) {
  Graph<float> g;
  g.set_grad_enabled(false);
  const auto& v = g.value(m.forward(g, b));
  return {v.data().begin(), v.data().end()};
}

}  // namespace ptdt::testing
