#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "ptdt/diffcore/graph.hpp"
#include "ptdt/diffcore/params.hpp"
#include "ptdt/trajdata/sequence.hpp"

namespace ptdt::dt {

struct ModelConfig {
  int n_layers = 3;
  int n_heads = 1;
  int d_embed = 128;
  std::string activation = "relu";
  int context_len = 20;  // K
  int prompt_len = 5;    // K*; 0 builds the prompt-free ablation
  int state_dim = 1;
  int action_dim = 1;
  int rtg_dim = 1;
  int max_timestep = 100;
  int mlp_ratio = 4;
  // Include prompt positions in the imitation loss.
  bool prompt_loss = false;
  double init_std = 0.02;

  void validate() const;
  friend bool operator==(const ModelConfig&, const ModelConfig&) = default;
};

// Input scaling applied inside the model: states are standardized with
// dataset statistics, reward-to-go is divided by rtg_scale. Prompt and
// history tokens share the same scaling.
struct InputNorm {
  std::vector<double> state_mean;
  std::vector<double> state_std;
  double rtg_scale = 1.0;

  static InputNorm identity(int state_dim);
  friend bool operator==(const InputNorm&, const InputNorm&) = default;
};

// Prompt-conditioned causal transformer. Prompt and history blocks have
// separate modality projections and timestep tables; everything after the
// token embedding is shared.
template <typename T>
class PromptDT {
 public:
  PromptDT(ModelConfig config, InputNorm norm, std::uint64_t seed);

  const ModelConfig& config() const { return config_; }
  const InputNorm& norm() const { return norm_; }
  diff::ParamStore<T>& params() { return params_; }
  const diff::ParamStore<T>& params() const { return params_; }
  std::size_t parameter_count() const { return params_.count(); }

  // Action predictions at every state token: [B * (K* + K), d_a], rows
  // ordered by sequence then step, squashed by tanh.
  diff::Var forward(diff::Graph<T>& g, const traj::SequenceBatch& batch);

  // Mean squared action error over history steps with a known action
  // (and over prompt steps when prompt_loss is set).
  diff::Var loss(diff::Graph<T>& g, const traj::SequenceBatch& batch);

  // Inference at the final history slot of each sequence: [B][d_a].
  std::vector<std::vector<double>> predict_last(const traj::SequenceBatch& batch) const;

  // Loss value without recording gradients.
  double evaluate_loss(const traj::SequenceBatch& batch) const;

 private:
  void check_batch(const traj::SequenceBatch& batch) const;

  ModelConfig config_;
  InputNorm norm_;
  diff::ParamStore<T> params_;
};

extern template class PromptDT<float>;
extern template class PromptDT<double>;

// Per-sequence target layout used by `loss`: values and weights shaped like
// the forward output.
template <typename T>
void loss_targets(const ModelConfig& cfg, const traj::SequenceBatch& batch, diff::NdArray<T>& target,
                  diff::NdArray<T>& weights);

}  // namespace ptdt::dt
