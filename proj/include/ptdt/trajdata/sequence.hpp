#pragma once

#include <cstdint>
#include <vector>

#include "ptdt/trajdata/episode.hpp"
#include "ptdt/trajdata/prompt.hpp"

namespace ptdt::traj {

// Recent steps of an episode. `actions` may hold one step fewer than `rtg`
// when the last action is the one being predicted.
struct History {
  int state_dim = 0;
  int action_dim = 0;
  std::vector<double> rtg;
  std::vector<double> states;
  std::vector<double> actions;
  std::vector<int> timesteps;

  int length() const { return static_cast<int>(rtg.size()); }
  int actions_known() const { return action_dim == 0 ? 0 : static_cast<int>(actions.size() / action_dim); }
};

// Steps max(0, end - context + 1) ..= end of an episode, actions included.
History history_window(const Episode& ep, int end, int context);

// A batch of model inputs: per sequence, prompt_len prompt steps then
// context_len history steps, each step contributing (rtg, state, action)
// tokens. Short histories are left-padded inside the history block.
struct SequenceBatch {
  int batch = 0;
  int prompt_len = 0;
  int context_len = 0;
  int state_dim = 0;
  int action_dim = 0;

  std::vector<double> prompt_rtg;      // [B, K*]
  std::vector<double> prompt_states;   // [B, K*, d_s]
  std::vector<double> prompt_actions;  // [B, K*, d_a]
  std::vector<int> prompt_timesteps;   // [B, K*]

  std::vector<double> rtg;        // [B, K]
  std::vector<double> states;     // [B, K, d_s]
  std::vector<double> actions;    // [B, K, d_a]
  std::vector<int> timesteps;     // [B, K]
  std::vector<std::uint8_t> valid;       // [B, K] real step (1) or padding (0)
  std::vector<std::uint8_t> has_target;  // [B, K] action target known

  int steps() const { return prompt_len + context_len; }
  int tokens() const { return 3 * steps(); }

  // Token position of step `step` (prompt steps first), modality 0 = rtg,
  // 1 = state, 2 = action.
  static int token_index(int step, int modality) { return 3 * step + modality; }

  bool token_is_padding(int b, int token) const;
  // Causal visibility: key <= query, keys that are padding are hidden
  // except from themselves.
  bool visible(int b, int query, int key) const;
};

SequenceBatch assemble_input(const PromptSegment& prompt, const History& history, int context_len);

// Appends the sequences of `src` to `dst`; layouts must agree (an empty
// `dst` adopts the layout of `src`).
void append(SequenceBatch& dst, const SequenceBatch& src);

}  // namespace ptdt::traj
