#include "ptdt/pretrain/pretrain.hpp"

#include <chrono>
#include <cmath>
#include <json.hpp>

#include "ptdt/common/errors.hpp"
#include "ptdt/common/rng.hpp"

namespace ptdt::pretrain {

dt::InputNorm compute_input_norm(const std::vector<TaskData>& tasks, int state_dim, double rtg_scale) {
  std::vector<double> sum(state_dim, 0.0), sq(state_dim, 0.0);
  std::size_t n = 0;
  for (const auto& t : tasks) {
    for (const auto& ep : t.data.episodes) {
      if (ep.state_dim != state_dim) throw ShapeError("compute_input_norm: state dim mismatch");
      for (int s = 0; s < ep.length(); ++s) {
        auto row = ep.state(s);
        for (int j = 0; j < state_dim; ++j) {
          sum[j] += row[j];
          sq[j] += row[j] * row[j];
        }
        ++n;
      }
    }
  }
  if (n == 0) throw DataError("compute_input_norm: no states");
  dt::InputNorm norm;
  norm.rtg_scale = rtg_scale;
  for (int j = 0; j < state_dim; ++j) {
    const double mean = sum[j] / double(n);
    const double var = std::max(0.0, sq[j] / double(n) - mean * mean);
    norm.state_mean.push_back(mean);
    norm.state_std.push_back(std::max(std::sqrt(var), 1e-6));
  }
  return norm;
}

std::string to_jsonl(const TrainLogRow& row) {
  nlohmann::json j = {{"iteration", row.iteration}, {"task_index", row.task_index}, {"task_loss", row.task_loss},
                      {"wall_seconds", row.wall_seconds}, {"seed", row.seed}};
  if (!row.eval_return.empty()) j["eval_return"] = row.eval_return;
  return j.dump();
}

namespace {

traj::SequenceBatch training_batch(const TaskData& td, const std::vector<int>& all, const std::vector<int>& prompt_pool,
                                   int batch, const dt::ModelConfig& mc, Rng& rng) {
  traj::SequenceBatch b;
  std::uniform_int_distribution<std::size_t> pick_prompt(0, prompt_pool.empty() ? 0 : prompt_pool.size() - 1);
  for (int i = 0; i < batch; ++i) {
    traj::PromptSegment prompt;
    if (mc.prompt_len > 0) {
      const int e = prompt_pool[pick_prompt(rng)];
      const auto& ep = td.data.episodes[e];
      const int len = std::min(mc.prompt_len, ep.length());
      std::uniform_int_distribution<int> start(0, ep.length() - len);
      prompt = traj::cut_prompt(ep, start(rng), len, e);
    }
    const auto w = traj::random_window(td.data, all, rng);
    traj::append(b, traj::assemble_input(
                        prompt, traj::history_window(td.data.episodes[w.episode], w.end, mc.context_len),
                        mc.context_len));
  }
  return b;
}

double optimizer_step(dt::PromptDT<float>& model, const traj::SequenceBatch& batch, const diff::AdamWConfig& opt,
                      diff::AdamWState<float>& state) {
  model.params().zero_grad();
  diff::Graph<float> g;
  auto loss = model.loss(g, batch);
  const double value = g.value(loss)[0];
  if (!std::isfinite(value)) throw NumericError("training loss is not finite");
  g.backward(loss);
  diff::adamw_step(model.params(), opt, state);
  return value;
}

}  // namespace

dt::PromptDT<float> train_multitask(const std::vector<TaskData>& tasks, const dt::ModelConfig& mc,
                                    const dt::InputNorm& norm, const TrainConfig& cfg, const TrainHooks& hooks,
                                    std::vector<TrainLogRow>* log_rows) {
  if (tasks.empty()) throw DataError("train_multitask: no training tasks");
  std::vector<std::vector<int>> all(tasks.size()), prompts(tasks.size());
  for (std::size_t i = 0; i < tasks.size(); ++i) {
    const auto& td = tasks[i];
    if (td.data.empty()) throw DataError("train_multitask: empty dataset for task " + std::to_string(td.task.task_index));
    for (std::size_t e = 0; e < td.data.size(); ++e) {
      if (td.data.episodes[e].length() == 0) continue;
      all[i].push_back(int(e));
      if (td.data.episodes[e].quality == cfg.prompt_quality) prompts[i].push_back(int(e));
    }
    if (all[i].empty()) throw DataError("train_multitask: only empty episodes for task " + std::to_string(td.task.task_index));
    if (mc.prompt_len > 0 && prompts[i].empty()) {
      throw DataError("train_multitask: no " + std::string(envs::to_string(cfg.prompt_quality)) +
                      " episodes for prompts of task " + std::to_string(td.task.task_index));
    }
  }

  dt::PromptDT<float> model(mc, norm, derive_seed(cfg.seed, {0}));
  Rng rng(derive_seed(cfg.seed, {1}));
  diff::AdamWState<float> state;
  const auto t0 = std::chrono::steady_clock::now();
  for (int it = 1; it <= cfg.iterations; ++it) {
    TrainLogRow row;
    row.iteration = it;
    row.seed = cfg.seed;
    row.task_loss.assign(tasks.size(), 0.0);
    for (const auto& td : tasks) row.task_index.push_back(td.task.task_index);
    for (int s = 0; s < cfg.steps_per_iteration; ++s) {
      for (std::size_t i = 0; i < tasks.size(); ++i) {
        auto batch = training_batch(tasks[i], all[i], prompts[i], cfg.batch_per_task, mc, rng);
        row.task_loss[i] += optimizer_step(model, batch, cfg.optimizer, state) / cfg.steps_per_iteration;
      }
    }
    if (cfg.eval_every > 0 && it % cfg.eval_every == 0 && hooks.on_eval) row.eval_return = hooks.on_eval(model);
    row.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    if (hooks.log) *hooks.log << to_jsonl(row) << '\n' << std::flush;
    if (log_rows) log_rows->push_back(std::move(row));
  }
  return model;
}

dt::PromptDT<float> finetune_full(const dt::PromptDT<float>& base, const traj::EpisodeSet& data,
                                  std::span<const traj::WindowRef> windows, const traj::PromptSegment& prompt,
                                  const FinetuneConfig& cfg, std::vector<traj::WindowRef>* touched) {
  dt::PromptDT<float> model = base;
  if (cfg.steps <= 0) return model;
  if (windows.empty()) throw DataError("finetune_full: no fine-tuning windows");
  Rng rng(derive_seed(cfg.seed, {2}));
  diff::AdamWState<float> state;
  std::uniform_int_distribution<std::size_t> pick(0, windows.size() - 1);
  const int K = model.config().context_len;
  std::vector<traj::WindowRef> chosen(cfg.batch);
  for (int s = 0; s < cfg.steps; ++s) {
    for (auto& w : chosen) w = windows[pick(rng)];
    if (touched) touched->insert(touched->end(), chosen.begin(), chosen.end());
    optimizer_step(model, traj::window_batch(data, chosen, prompt, K), cfg.optimizer, state);
  }
  return model;
}

}  // namespace ptdt::pretrain
