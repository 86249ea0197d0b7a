#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "ptdt/common/errors.hpp"
#include "ptdt/common/rng.hpp"
#include "ptdt/trajdata/episode.hpp"

namespace ptdt::traj {

// K*-step trajectory prompt. The reward-to-go channel is one-dimensional.
struct PromptSegment {
  int state_dim = 0;
  int action_dim = 0;
  std::vector<double> rtg;
  std::vector<double> states;
  std::vector<double> actions;
  std::vector<int> timesteps;
  // Index into the EpisodeSet the segment was cut from; -1 when built from
  // several segments or synthesized.
  int source_episode = -1;

  int length() const { return static_cast<int>(rtg.size()); }
  friend bool operator==(const PromptSegment&, const PromptSegment&) = default;
};

struct PromptLayout {
  int rtg_dim = 1;
  int state_dim = 0;
  int action_dim = 0;
  int length = 0;
  std::vector<int> timesteps;
  int source_episode = -1;

  int step_dim() const { return rtg_dim + state_dim + action_dim; }
  int dim() const { return step_dim() * length; }
  friend bool operator==(const PromptLayout&, const PromptLayout&) = default;
};

// The prompt as one real vector, grouped per step as (rtg, state, action).
struct FlatPrompt {
  std::vector<double> x;
  PromptLayout layout;
};

FlatPrompt flatten_prompt(const PromptSegment& p);
PromptSegment unflatten_prompt(std::span<const double> x, const PromptLayout& layout);

struct PromptSampling {
  int length = 5;
  std::optional<envs::Quality> quality;
  // >1 concatenates that many shorter windows, each from an independently
  // drawn episode; lengths split as evenly as possible.
  int segments = 1;
};

// Uniform episode among those matching the filter, then a uniform window of
// `length` steps. Throws DataError when no episode qualifies.
PromptSegment sample_prompt(const EpisodeSet& data, int task_index, const PromptSampling& cfg, Rng& rng);

// Window [start, start + length) of one episode.
PromptSegment cut_prompt(const Episode& ep, int start, int length, int source_episode);

std::string prompt_to_json(const FlatPrompt& p);
FlatPrompt prompt_from_json(const std::string& text);

}  // namespace ptdt::traj
