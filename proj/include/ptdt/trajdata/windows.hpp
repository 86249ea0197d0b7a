#pragma once

#include <span>
#include <vector>

#include "ptdt/common/rng.hpp"
#include "ptdt/trajdata/episode.hpp"
#include "ptdt/trajdata/prompt.hpp"
#include "ptdt/trajdata/sequence.hpp"

namespace ptdt::traj {

// One training sample: the K-step history window of `episode` ending at
// step `end`.
struct WindowRef {
  int episode = 0;
  int end = 0;
  friend bool operator==(const WindowRef&, const WindowRef&) = default;
  friend auto operator<=>(const WindowRef&, const WindowRef&) = default;
};

// Every window end of the listed episodes, in episode then step order.
std::vector<WindowRef> all_windows(const EpisodeSet& data, std::span<const int> episodes);

// `n` distinct windows drawn uniformly without replacement from the listed
// episodes; n larger than the pool returns the whole pool (shuffled).
std::vector<WindowRef> sample_windows(const EpisodeSet& data, std::span<const int> episodes, int n, Rng& rng);

// Uniform episode from the list, then a uniform end step.
WindowRef random_window(const EpisodeSet& data, std::span<const int> episodes, Rng& rng);

SequenceBatch window_batch(const EpisodeSet& data, std::span<const WindowRef> windows, const PromptSegment& prompt,
                           int context_len);

}  // namespace ptdt::traj
