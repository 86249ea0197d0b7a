#include "ptdt/trajdata/sequence.hpp"

#include <algorithm>

#include "ptdt/common/errors.hpp"

namespace ptdt::traj {

History history_window(const Episode& ep, int end, int context) {
  if (end < 0 || end >= ep.length() || context < 1) {
    throw ContractError("history_window: end " + std::to_string(end) + " outside episode of length " +
                        std::to_string(ep.length()));
  }
  const int start = std::max(0, end - context + 1);
  History h;
  h.state_dim = ep.state_dim;
  h.action_dim = ep.action_dim;
  for (int t = start; t <= end; ++t) {
    h.rtg.push_back(ep.rtg[t]);
    auto s = ep.state(t);
    h.states.insert(h.states.end(), s.begin(), s.end());
    auto a = ep.action(t);
    h.actions.insert(h.actions.end(), a.begin(), a.end());
    h.timesteps.push_back(ep.timesteps[t]);
  }
  return h;
}

bool SequenceBatch::token_is_padding(int b, int token) const {
  const int step = token / 3;
  if (step < prompt_len) return false;
  return valid[std::size_t(b) * context_len + (step - prompt_len)] == 0;
}

bool SequenceBatch::visible(int b, int query, int key) const {
  if (key > query) return false;
  if (key == query) return true;
  return !token_is_padding(b, key);
}

SequenceBatch assemble_input(const PromptSegment& prompt, const History& history, int context_len) {
  const int len = history.length();
  if (len == 0) throw ContractError("assemble_input: empty history");
  if (context_len < 1) throw ContractError("assemble_input: context length must be >= 1");
  if (prompt.length() > 0 && (prompt.state_dim != history.state_dim || prompt.action_dim != history.action_dim)) {
    throw ShapeError("assemble_input: prompt and history dimensions differ");
  }
  const int d_s = history.state_dim, d_a = history.action_dim;
  const int known = history.actions_known();
  if (history.states.size() != std::size_t(len) * d_s || history.timesteps.size() != std::size_t(len) ||
      known < len - 1 || known > len) {
    throw ShapeError("assemble_input: inconsistent history arrays");
  }

  SequenceBatch b;
  b.batch = 1;
  b.prompt_len = prompt.length();
  b.context_len = context_len;
  b.state_dim = d_s;
  b.action_dim = d_a;
  b.prompt_rtg = prompt.rtg;
  b.prompt_states = prompt.states;
  b.prompt_actions = prompt.actions;
  b.prompt_timesteps = prompt.timesteps;

  b.rtg.assign(context_len, 0.0);
  b.states.assign(std::size_t(context_len) * d_s, 0.0);
  b.actions.assign(std::size_t(context_len) * d_a, 0.0);
  b.timesteps.assign(context_len, 0);
  b.valid.assign(context_len, 0);
  b.has_target.assign(context_len, 0);

  // Keep the most recent `context_len` steps, right-aligned.
  const int take = std::min(len, context_len);
  const int first = len - take;
  const int pad = context_len - take;
  for (int i = 0; i < take; ++i) {
    const int src = first + i, dst = pad + i;
    b.rtg[dst] = history.rtg[src];
    std::copy_n(history.states.begin() + std::size_t(src) * d_s, d_s, b.states.begin() + std::size_t(dst) * d_s);
    if (src < known) {
      std::copy_n(history.actions.begin() + std::size_t(src) * d_a, d_a, b.actions.begin() + std::size_t(dst) * d_a);
      b.has_target[dst] = 1;
    }
    b.timesteps[dst] = history.timesteps[src];
    b.valid[dst] = 1;
  }
  return b;
}

void append(SequenceBatch& dst, const SequenceBatch& src) {
  if (dst.batch == 0) {
    dst = src;
    return;
  }
  if (dst.prompt_len != src.prompt_len || dst.context_len != src.context_len || dst.state_dim != src.state_dim ||
      dst.action_dim != src.action_dim) {
    throw ShapeError("append: sequence layouts differ");
  }
  auto cat = [](auto& a, const auto& b) { a.insert(a.end(), b.begin(), b.end()); };
  dst.batch += src.batch;
  cat(dst.prompt_rtg, src.prompt_rtg);
  cat(dst.prompt_states, src.prompt_states);
  cat(dst.prompt_actions, src.prompt_actions);
  cat(dst.prompt_timesteps, src.prompt_timesteps);
  cat(dst.rtg, src.rtg);
  cat(dst.states, src.states);
  cat(dst.actions, src.actions);
  cat(dst.timesteps, src.timesteps);
  cat(dst.valid, src.valid);
  cat(dst.has_target, src.has_target);
}

}  // namespace ptdt::traj
