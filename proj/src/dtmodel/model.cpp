#include "ptdt/dtmodel/model.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "ptdt/common/errors.hpp"
#include "ptdt/common/rng.hpp"

namespace ptdt::dt {

using diff::Graph;
using diff::NdArray;
using diff::Shape;
using diff::Var;

void ModelConfig::validate() const {
  if (n_layers < 1 || n_heads < 1 || d_embed < 1) throw ConfigError("model: layers, heads, embedding must be >= 1");
  if (d_embed % n_heads != 0) throw ConfigError("model: d_embed must be divisible by n_heads");
  if (context_len < 1) throw ConfigError("model: context length K must be >= 1");
  if (prompt_len < 0) throw ConfigError("model: prompt length K* must be >= 0");
  if (state_dim < 1 || action_dim < 1) throw ConfigError("model: state/action dims must be >= 1");
  if (rtg_dim != 1) throw ConfigError("model: only a scalar reward-to-go is supported");
  if (max_timestep < 1 || mlp_ratio < 1) throw ConfigError("model: max_timestep and mlp_ratio must be >= 1");
  if (activation != "relu") throw ConfigError("model: unsupported activation '" + activation + "'");
}

InputNorm InputNorm::identity(int state_dim) {
  return InputNorm{std::vector<double>(state_dim, 0.0), std::vector<double>(state_dim, 1.0), 1.0};
}

template <typename T>
PromptDT<T>::PromptDT(ModelConfig config, InputNorm norm, std::uint64_t seed)
    : config_(std::move(config)), norm_(std::move(norm)) {
  config_.validate();
  if (norm_.state_mean.size() != std::size_t(config_.state_dim) ||
      norm_.state_std.size() != std::size_t(config_.state_dim) || !(norm_.rtg_scale > 0)) {
    throw ConfigError("model: input normalization does not match state_dim");
  }
  Rng rng(seed);
  const int D = config_.d_embed;
  const double sd = config_.init_std;
  auto weight = [&](const std::string& name, Shape shape) {
    params_.add(name, diff::normal_init<T>(std::move(shape), sd, rng));
  };
  auto zeros = [&](const std::string& name, int n) { params_.add(name, NdArray<T>(Shape{n}, T{0})); };
  auto ones = [&](const std::string& name, int n) { params_.add(name, NdArray<T>(Shape{n}, T{1})); };

  std::vector<std::string> blocks{"hist"};
  if (config_.prompt_len > 0) blocks.insert(blocks.begin(), "prompt");
  for (const auto& b : blocks) {
    weight(b + ".embed_rtg.w", {config_.rtg_dim, D});
    zeros(b + ".embed_rtg.b", D);
    weight(b + ".embed_state.w", {config_.state_dim, D});
    zeros(b + ".embed_state.b", D);
    weight(b + ".embed_action.w", {config_.action_dim, D});
    zeros(b + ".embed_action.b", D);
    weight(b + ".embed_timestep", {config_.max_timestep, D});
  }
  ones("embed_ln.g", D);
  zeros("embed_ln.b", D);
  const int H = D * config_.mlp_ratio;
  for (int l = 0; l < config_.n_layers; ++l) {
    const std::string p = "block" + std::to_string(l) + ".";
    ones(p + "ln1.g", D);
    zeros(p + "ln1.b", D);
    for (const char* m : {"q", "k", "v", "o"}) {
      weight(p + "attn.w" + m, {D, D});
      zeros(p + "attn.b" + m, D);
    }
    ones(p + "ln2.g", D);
    zeros(p + "ln2.b", D);
    weight(p + "mlp.w1", {D, H});
    zeros(p + "mlp.b1", H);
    weight(p + "mlp.w2", {H, D});
    zeros(p + "mlp.b2", D);
  }
  ones("ln_f.g", D);
  zeros("ln_f.b", D);
  weight("head.w", {D, config_.action_dim});
  zeros("head.b", config_.action_dim);
}

template <typename T>
void PromptDT<T>::check_batch(const traj::SequenceBatch& b) const {
  if (b.batch < 1) throw ShapeError("model: empty batch");
  if (b.prompt_len != config_.prompt_len || b.context_len != config_.context_len ||
      b.state_dim != config_.state_dim || b.action_dim != config_.action_dim) {
    throw ShapeError("model: batch layout (K*=" + std::to_string(b.prompt_len) + ", K=" +
                     std::to_string(b.context_len) + ", d_s=" + std::to_string(b.state_dim) + ", d_a=" +
                     std::to_string(b.action_dim) + ") does not match config (K*=" +
                     std::to_string(config_.prompt_len) + ", K=" + std::to_string(config_.context_len) +
                     ", d_s=" + std::to_string(config_.state_dim) + ", d_a=" +
                     std::to_string(config_.action_dim) + ")");
  }
  const std::size_t B = b.batch, Kp = b.prompt_len, K = b.context_len;
  if (b.prompt_rtg.size() != B * Kp || b.prompt_states.size() != B * Kp * b.state_dim ||
      b.prompt_actions.size() != B * Kp * b.action_dim || b.prompt_timesteps.size() != B * Kp ||
      b.rtg.size() != B * K || b.states.size() != B * K * b.state_dim || b.actions.size() != B * K * b.action_dim ||
      b.timesteps.size() != B * K || b.valid.size() != B * K || b.has_target.size() != B * K) {
    throw ShapeError("model: batch arrays do not match the declared batch size");
  }
}

namespace {

template <typename T>
struct Embedded {
  Var rtg, state, action;
};

// Projects one block (prompt or history) of `rows` steps into token
// embeddings, timestep embedding added to each modality.
template <typename T>
Embedded<T> embed_block(Graph<T>& g, diff::ParamStore<T>& P, const std::string& prefix, const ModelConfig& cfg,
                        const InputNorm& norm, int rows, std::span<const double> rtg, std::span<const double> states,
                        std::span<const double> actions, std::span<const int> timesteps,
                        const std::vector<std::uint8_t>* valid) {
  const int d_s = cfg.state_dim, d_a = cfg.action_dim;
  NdArray<T> r(Shape{rows, 1}), s(Shape{rows, d_s}), a(Shape{rows, d_a});
  std::vector<int> ts(rows);
  for (int i = 0; i < rows; ++i) {
    const bool real = valid == nullptr || (*valid)[i] != 0;
    if (!real) {
      ts[i] = 0;
      continue;
    }
    r[i] = static_cast<T>(rtg[i] / norm.rtg_scale);
    for (int j = 0; j < d_s; ++j) {
      s[std::size_t(i) * d_s + j] =
          static_cast<T>((states[std::size_t(i) * d_s + j] - norm.state_mean[j]) / norm.state_std[j]);
    }
    for (int j = 0; j < d_a; ++j) a[std::size_t(i) * d_a + j] = static_cast<T>(actions[std::size_t(i) * d_a + j]);
    ts[i] = std::clamp(timesteps[i], 0, cfg.max_timestep - 1);
  }
  auto time = g.gather_rows(g.param(P.get(prefix + ".embed_timestep")), ts);
  auto proj = [&](const std::string& name, NdArray<T> x) {
    auto y = g.linear(g.input(std::move(x)), g.param(P.get(prefix + "." + name + ".w")),
                      g.param(P.get(prefix + "." + name + ".b")));
    return g.add(y, time);
  };
  return {proj("embed_rtg", std::move(r)), proj("embed_state", std::move(s)), proj("embed_action", std::move(a))};
}

}  // namespace

template <typename T>
Var PromptDT<T>::forward(Graph<T>& g, const traj::SequenceBatch& b) {
  check_batch(b);
  const int B = b.batch, Kp = b.prompt_len, K = b.context_len, steps = Kp + K, T_tok = 3 * steps;
  const int D = config_.d_embed, heads = config_.n_heads;
  auto& P = params_;

  std::vector<Var> parts;
  if (Kp > 0) {
    auto e = embed_block(g, P, "prompt", config_, norm_, B * Kp, b.prompt_rtg, b.prompt_states, b.prompt_actions,
                         b.prompt_timesteps, nullptr);
    parts.insert(parts.end(), {e.rtg, e.state, e.action});
  }
  auto e = embed_block(g, P, "hist", config_, norm_, B * K, b.rtg, b.states, b.actions, b.timesteps, &b.valid);
  parts.insert(parts.end(), {e.rtg, e.state, e.action});
  auto stacked = g.concat_rows(parts);

  // Interleave into per-sequence token order (r, s, a) per step.
  std::vector<int> order(std::size_t(B) * T_tok);
  const int prompt_rows = B * Kp;
  for (int s = 0; s < B; ++s) {
    for (int step = 0; step < steps; ++step) {
      for (int m = 0; m < 3; ++m) {
        const int src = step < Kp ? m * prompt_rows + s * Kp + step
                                  : 3 * prompt_rows + m * (B * K) + s * K + (step - Kp);
        order[std::size_t(s) * T_tok + traj::SequenceBatch::token_index(step, m)] = src;
      }
    }
  }
  auto x = g.gather_rows(stacked, order);
  x = g.layer_norm(x, g.param(P.get("embed_ln.g")), g.param(P.get("embed_ln.b")));

  NdArray<T> mask(Shape{B * heads, T_tok, T_tok}, T{0});
  const T ninf = -std::numeric_limits<T>::infinity();
  for (int s = 0; s < B; ++s) {
    for (int q = 0; q < T_tok; ++q) {
      for (int k = 0; k < T_tok; ++k) {
        if (b.visible(s, q, k)) continue;
        for (int h = 0; h < heads; ++h) mask[((std::size_t(s) * heads + h) * T_tok + q) * T_tok + k] = ninf;
      }
    }
  }

  const T att_scale = T{1} / std::sqrt(static_cast<T>(D / heads));
  for (int l = 0; l < config_.n_layers; ++l) {
    const std::string p = "block" + std::to_string(l) + ".";
    auto lin = [&](Var in, const std::string& w, const std::string& bias) {
      return g.linear(in, g.param(P.get(p + w)), g.param(P.get(p + bias)));
    };
    auto h = g.layer_norm(x, g.param(P.get(p + "ln1.g")), g.param(P.get(p + "ln1.b")));
    auto q = g.split_heads(lin(h, "attn.wq", "attn.bq"), B, T_tok, heads);
    auto k = g.split_heads(lin(h, "attn.wk", "attn.bk"), B, T_tok, heads);
    auto v = g.split_heads(lin(h, "attn.wv", "attn.bv"), B, T_tok, heads);
    auto att = g.masked_softmax(g.scale(g.bmm(q, k, true), att_scale), mask);
    auto o = g.merge_heads(g.bmm(att, v), B, T_tok, heads);
    x = g.add(x, lin(o, "attn.wo", "attn.bo"));
    h = g.layer_norm(x, g.param(P.get(p + "ln2.g")), g.param(P.get(p + "ln2.b")));
    h = g.relu(lin(h, "mlp.w1", "mlp.b1"));
    x = g.add(x, lin(h, "mlp.w2", "mlp.b2"));
  }
  x = g.layer_norm(x, g.param(P.get("ln_f.g")), g.param(P.get("ln_f.b")));

  std::vector<int> state_rows(std::size_t(B) * steps);
  for (int s = 0; s < B; ++s)
    for (int step = 0; step < steps; ++step)
      state_rows[std::size_t(s) * steps + step] = s * T_tok + traj::SequenceBatch::token_index(step, 1);
  auto sx = g.gather_rows(x, state_rows);
  return g.tanh(g.linear(sx, g.param(P.get("head.w")), g.param(P.get("head.b"))));
}

template <typename T>
void loss_targets(const ModelConfig& cfg, const traj::SequenceBatch& b, NdArray<T>& target, NdArray<T>& weights) {
  const int B = b.batch, Kp = b.prompt_len, K = b.context_len, steps = Kp + K, d_a = b.action_dim;
  target = NdArray<T>(Shape{B * steps, d_a}, T{0});
  weights = NdArray<T>(Shape{B * steps, d_a}, T{0});
  for (int s = 0; s < B; ++s) {
    for (int step = 0; step < steps; ++step) {
      const std::size_t row = std::size_t(s) * steps + step;
      bool use = false;
      const double* src = nullptr;
      if (step < Kp) {
        use = cfg.prompt_loss;
        src = b.prompt_actions.data() + (std::size_t(s) * Kp + step) * d_a;
      } else {
        const std::size_t h = std::size_t(s) * K + (step - Kp);
        use = b.valid[h] != 0 && b.has_target[h] != 0;
        src = b.actions.data() + h * d_a;
      }
      if (!use) continue;
      for (int j = 0; j < d_a; ++j) {
        target[row * d_a + j] = static_cast<T>(src[j]);
        weights[row * d_a + j] = T{1};
      }
    }
  }
}

template <typename T>
Var PromptDT<T>::loss(Graph<T>& g, const traj::SequenceBatch& b) {
  auto pred = forward(g, b);
  NdArray<T> target, weights;
  loss_targets(config_, b, target, weights);
  return g.mse(pred, target, weights);
}

template <typename T>
std::vector<std::vector<double>> PromptDT<T>::predict_last(const traj::SequenceBatch& b) const {
  Graph<T> g;
  g.set_grad_enabled(false);
  auto out = const_cast<PromptDT*>(this)->forward(g, b);
  const auto& v = g.value(out);
  const int steps = b.steps(), d_a = b.action_dim;
  std::vector<std::vector<double>> actions(b.batch, std::vector<double>(d_a));
  for (int s = 0; s < b.batch; ++s) {
    const std::size_t row = std::size_t(s) * steps + steps - 1;
    for (int j = 0; j < d_a; ++j) actions[s][j] = static_cast<double>(v[row * d_a + j]);
  }
  return actions;
}

template <typename T>
double PromptDT<T>::evaluate_loss(const traj::SequenceBatch& b) const {
  Graph<T> g;
  g.set_grad_enabled(false);
  return static_cast<double>(g.value(const_cast<PromptDT*>(this)->loss(g, b))[0]);
}

template class PromptDT<float>;
template class PromptDT<double>;
template void loss_targets<float>(const ModelConfig&, const traj::SequenceBatch&, NdArray<float>&, NdArray<float>&);
template void loss_targets<double>(const ModelConfig&, const traj::SequenceBatch&, NdArray<double>&,
                                   NdArray<double>&);

}  // namespace ptdt::dt
