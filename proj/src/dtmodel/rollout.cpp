#include "ptdt/dtmodel/rollout.hpp"

#include <algorithm>
#include <exception>
#include <iterator>
#include <thread>

#include "ptdt/common/errors.hpp"
#include "ptdt/common/rng.hpp"
#include "ptdt/common/runtime.hpp"

namespace ptdt::dt {

void LiveHistory::start(std::span<const double> state, double target_rtg) {
  if (state.size() != std::size_t(state_dim_)) throw ShapeError("live history: wrong state size");
  rtg_.assign(1, target_rtg);
  states_.assign(state.begin(), state.end());
  actions_.clear();
}

void LiveHistory::record(std::span<const double> action, double reward, std::span<const double> next_state) {
  if (rtg_.empty()) throw ContractError("live history: record before start");
  if (action.size() != std::size_t(action_dim_) || next_state.size() != std::size_t(state_dim_)) {
    throw ShapeError("live history: wrong action or state size");
  }
  actions_.insert(actions_.end(), action.begin(), action.end());
  states_.insert(states_.end(), next_state.begin(), next_state.end());
  rtg_.push_back(rtg_.back() - reward);
}

traj::History LiveHistory::window(int context) const {
  const int n = steps();
  const int first = std::max(0, n - context);
  traj::History h;
  h.state_dim = state_dim_;
  h.action_dim = action_dim_;
  h.rtg.assign(rtg_.begin() + first, rtg_.end());
  h.states.assign(states_.begin() + std::size_t(first) * state_dim_, states_.end());
  h.actions.assign(actions_.begin() + std::size_t(first) * action_dim_, actions_.end());
  for (int t = first; t < n; ++t) h.timesteps.push_back(t);
  return h;
}

std::vector<double> act(const PromptDT<float>& model, const traj::PromptSegment& prompt, const LiveHistory& history) {
  const int K = model.config().context_len;
  return model.predict_last(traj::assemble_input(prompt, history.window(K), K)).front();
}

namespace {

std::vector<traj::Episode> rollout_serial(const PromptDT<float>& model, std::span<const RolloutRequest> requests) {
  const auto& cfg = model.config();
  const int K = cfg.context_len;
  struct Live {
    envs::EnvState state;
    LiveHistory history;
    traj::Episode record;
  };
  std::vector<Live> live;
  live.reserve(requests.size());
  for (const auto& r : requests) {
    const auto dims = envs::family_dims(r.task.family);
    if (dims.state_dim != cfg.state_dim || dims.action_dim != cfg.action_dim) {
      throw ShapeError("rollout: task family does not match the model's state/action dims");
    }
    Live l{envs::env_reset(r.task, derive_seed(r.seed, {0})), LiveHistory(dims.state_dim, dims.action_dim), {}};
    l.history.start(l.state.values, r.target_rtg);
    l.record.family = r.task.family;
    l.record.task_index = r.task.task_index;
    l.record.seed = r.seed;
    l.record.state_dim = dims.state_dim;
    l.record.action_dim = dims.action_dim;
    live.push_back(std::move(l));
  }

  std::vector<int> active;
  while (true) {
    active.clear();
    for (std::size_t i = 0; i < live.size(); ++i) {
      if (!envs::episode_done(requests[i].task, live[i].state)) active.push_back(static_cast<int>(i));
    }
    if (active.empty()) break;
    traj::SequenceBatch batch;
    for (int i : active) traj::append(batch, traj::assemble_input(requests[i].prompt, live[i].history.window(K), K));
    const auto actions = model.predict_last(batch);
    for (std::size_t j = 0; j < active.size(); ++j) {
      auto& l = live[active[j]];
      auto tr = envs::env_step(requests[active[j]].task, l.state, actions[j]);
      auto& rec = l.record;
      rec.states.insert(rec.states.end(), l.state.values.begin(), l.state.values.end());
      rec.actions.insert(rec.actions.end(), tr.action.begin(), tr.action.end());
      rec.rewards.push_back(tr.reward);
      l.history.record(tr.action, tr.reward, tr.next_state.values);
      l.state = std::move(tr.next_state);
    }
  }
  std::vector<traj::Episode> out;
  out.reserve(live.size());
  for (auto& l : live) {
    l.record.finalize();
    out.push_back(std::move(l.record));
  }
  return out;
}

}  // namespace

std::vector<traj::Episode> rollout_batch(const PromptDT<float>& model, std::span<const RolloutRequest> requests) {
  const std::size_t workers = std::min<std::size_t>(max_threads(), requests.size());
  if (workers <= 1) return rollout_serial(model, requests);
  std::vector<std::vector<traj::Episode>> parts(workers);
  std::vector<std::exception_ptr> errors(workers);
  std::vector<std::thread> pool;
  const std::size_t chunk = (requests.size() + workers - 1) / workers;
  for (std::size_t w = 0; w < workers; ++w) {
    const std::size_t lo = w * chunk, hi = std::min(requests.size(), lo + chunk);
    pool.emplace_back([&, w, lo, hi] {
      try {
        if (lo < hi) parts[w] = rollout_serial(model, requests.subspan(lo, hi - lo));
      } catch (...) {
        errors[w] = std::current_exception();
      }
    });
  }
  for (auto& t : pool) t.join();
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
  std::vector<traj::Episode> out;
  for (auto& p : parts) std::move(p.begin(), p.end(), std::back_inserter(out));
  return out;
}

}  // namespace ptdt::dt
