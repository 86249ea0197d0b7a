#include "ptdt/zorank/prompt_tuning.hpp"

#include <algorithm>

#include "ptdt/common/errors.hpp"
#include "ptdt/common/rng.hpp"

namespace ptdt::zo {

OfflineLossObjective::OfflineLossObjective(const dt::PromptDT<float>& model, const traj::EpisodeSet& data,
                                           std::vector<traj::WindowRef> windows, traj::PromptLayout layout,
                                           OfflineOracleConfig cfg)
    : model_(&model), data_(&data), windows_(std::move(windows)), layout_(std::move(layout)), cfg_(cfg) {
  if (windows_.empty()) throw DataError("offline oracle: no evaluation windows");
  if (cfg_.eval_batches < 1 || cfg_.batch_size < 1) throw ConfigError("offline oracle: batches must be >= 1");
  if (!cfg_.resample) fixed_ = batches_for(0);
}

std::vector<std::vector<traj::WindowRef>> OfflineLossObjective::batches_for(int iteration) const {
  std::vector<traj::WindowRef> pool = windows_;
  const std::size_t want = std::size_t(cfg_.eval_batches) * cfg_.batch_size;
  if (pool.size() > want) {
    Rng rng(derive_seed(cfg_.seed, {std::uint64_t(iteration)}));
    std::shuffle(pool.begin(), pool.end(), rng);
    pool.resize(want);
  }
  std::vector<std::vector<traj::WindowRef>> out;
  for (std::size_t i = 0; i < pool.size(); i += cfg_.batch_size) {
    out.emplace_back(pool.begin() + i, pool.begin() + std::min(pool.size(), i + cfg_.batch_size));
  }
  return out;
}

std::size_t OfflineLossObjective::windows_per_value() const {
  return std::min(windows_.size(), std::size_t(cfg_.eval_batches) * cfg_.batch_size);
}

double OfflineLossObjective::loss(const traj::PromptSegment& prompt, int iteration) const {
  const auto batches = cfg_.resample ? batches_for(iteration) : fixed_;
  const int K = model_->config().context_len;
  double total = 0.0;
  std::size_t n = 0;
  for (const auto& b : batches) {
    total += model_->evaluate_loss(traj::window_batch(*data_, b, prompt, K)) * double(b.size());
    n += b.size();
  }
  return total / double(n);
}

std::vector<double> OfflineLossObjective::operator()(const Candidates& candidates, int iteration) const {
  std::vector<double> out;
  out.reserve(candidates.size());
  for (const auto& x : candidates) out.push_back(loss(traj::unflatten_prompt(x, layout_), iteration));
  return out;
}

OnlineReturnObjective::OnlineReturnObjective(const dt::PromptDT<float>& model, envs::TaskSpec task,
                                             traj::PromptLayout layout, OnlineOracleConfig cfg)
    : model_(&model), task_(std::move(task)), layout_(std::move(layout)), cfg_(cfg) {
  if (cfg_.episodes < 1) throw ConfigError("online oracle: episodes must be >= 1");
}

std::uint64_t OnlineReturnObjective::episode_seed(int iteration, int candidate, int episode) const {
  if (cfg_.paired) return derive_seed(cfg_.seed, {std::uint64_t(iteration), std::uint64_t(episode)});
  return derive_seed(cfg_.seed, {std::uint64_t(iteration), std::uint64_t(episode), 1000003ULL + std::uint64_t(candidate)});
}

std::vector<dt::RolloutRequest> OnlineReturnObjective::requests(const Candidates& candidates, int iteration) const {
  std::vector<dt::RolloutRequest> reqs;
  for (std::size_t i = 0; i < candidates.size(); ++i) {
    auto prompt = traj::unflatten_prompt(candidates[i], layout_);
    for (int e = 0; e < cfg_.episodes; ++e) {
      reqs.push_back({task_, prompt, episode_seed(iteration, int(i), e), cfg_.target_rtg});
    }
  }
  return reqs;
}

std::vector<double> OnlineReturnObjective::operator()(const Candidates& candidates, int iteration) const {
  const auto episodes = dt::rollout_batch(*model_, requests(candidates, iteration));
  std::vector<double> out(candidates.size(), 0.0);
  for (std::size_t i = 0; i < candidates.size(); ++i) {
    for (int e = 0; e < cfg_.episodes; ++e) out[i] -= episodes[i * cfg_.episodes + e].episodic_return();
    out[i] /= cfg_.episodes;
  }
  return out;
}

TuneResult tune_prompt(const dt::PromptDT<float>& model, const traj::PromptSegment& initial, RankingOracle& oracle,
                       const TunerConfig& cfg, const ZoHooks& hooks) {
  const auto& mc = model.config();
  if (initial.length() != mc.prompt_len || initial.state_dim != mc.state_dim || initial.action_dim != mc.action_dim) {
    throw ShapeError("tune_prompt: prompt layout does not match the model");
  }
  auto flat = traj::flatten_prompt(initial);
  auto start = initial_state(flat.x, cfg);
  start.trace.model_parameters = model.parameter_count();
  auto result = zo_rank_sgd(oracle, flat.x, cfg, hooks, &start);
  return {traj::unflatten_prompt(result.x, flat.layout), std::move(result.trace)};
}

}  // namespace ptdt::zo
