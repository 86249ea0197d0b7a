#pragma once

#include <cstdint>
#include <functional>
#include <ostream>
#include <vector>

#include "ptdt/diffcore/adamw.hpp"
#include "ptdt/dtmodel/model.hpp"
#include "ptdt/envs/task.hpp"
#include "ptdt/trajdata/episode.hpp"
#include "ptdt/trajdata/prompt.hpp"
#include "ptdt/trajdata/windows.hpp"

namespace ptdt::pretrain {

struct TaskData {
  envs::TaskSpec task;
  traj::EpisodeSet data;
};

struct TrainConfig {
  int iterations = 5000;
  int steps_per_iteration = 10;
  int batch_per_task = 32;
  diff::AdamWConfig optimizer{};
  // Quality of the episodes prompts are cut from during training.
  envs::Quality prompt_quality = envs::Quality::Expert;
  // Evaluate every this many iterations through `on_eval` (0 = never).
  int eval_every = 0;
  std::uint64_t seed = 0;
};

// State standardization over every state of the given sets; `rtg_scale`
// is passed through.
dt::InputNorm compute_input_norm(const std::vector<TaskData>& tasks, int state_dim, double rtg_scale);

struct TrainLogRow {
  int iteration = 0;
  std::vector<int> task_index;
  std::vector<double> task_loss;  // mean over the iteration's steps
  std::vector<double> eval_return;
  double wall_seconds = 0.0;
  std::uint64_t seed = 0;
};

std::string to_jsonl(const TrainLogRow& row);

struct TrainHooks {
  // Called on eval iterations with the current model; returns per-task returns.
  std::function<std::vector<double>(const dt::PromptDT<float>&)> on_eval;
  std::ostream* log = nullptr;
};

// Multi-task pretraining: each inner step takes one optimizer step per task
// (round robin) on a batch of (expert prompt, history window) pairs from
// that task's data. Model init uses derive_seed(seed, {0}), sampling
// derive_seed(seed, {1}).
dt::PromptDT<float> train_multitask(const std::vector<TaskData>& tasks, const dt::ModelConfig& model_config,
                                    const dt::InputNorm& norm, const TrainConfig& cfg, const TrainHooks& hooks = {},
                                    std::vector<TrainLogRow>* log_rows = nullptr);

struct FinetuneConfig {
  int steps = 100;
  int batch = 32;
  diff::AdamWConfig optimizer{};
  std::uint64_t seed = 0;
};

// Full-model fine-tuning on a fixed set of windows with a fixed prompt;
// batches are drawn with replacement from `windows` only.
dt::PromptDT<float> finetune_full(const dt::PromptDT<float>& model, const traj::EpisodeSet& data,
                                  std::span<const traj::WindowRef> windows, const traj::PromptSegment& prompt,
                                  const FinetuneConfig& cfg, std::vector<traj::WindowRef>* touched = nullptr);

}  // namespace ptdt::pretrain
