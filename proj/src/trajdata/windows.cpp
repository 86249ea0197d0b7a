#include "ptdt/trajdata/windows.hpp"

#include <algorithm>

#include "ptdt/common/errors.hpp"

namespace ptdt::traj {

std::vector<WindowRef> all_windows(const EpisodeSet& data, std::span<const int> episodes) {
  std::vector<WindowRef> out;
  for (int e : episodes) {
    for (int t = 0; t < data.episodes.at(e).length(); ++t) out.push_back({e, t});
  }
  return out;
}

std::vector<WindowRef> sample_windows(const EpisodeSet& data, std::span<const int> episodes, int n, Rng& rng) {
  auto pool = all_windows(data, episodes);
  if (pool.empty()) throw DataError("no windows to sample from");
  std::shuffle(pool.begin(), pool.end(), rng);
  if (n >= 0 && std::size_t(n) < pool.size()) pool.resize(n);
  return pool;
}

WindowRef random_window(const EpisodeSet& data, std::span<const int> episodes, Rng& rng) {
  if (episodes.empty()) throw DataError("no episodes to sample from");
  std::uniform_int_distribution<std::size_t> pick(0, episodes.size() - 1);
  const int e = episodes[pick(rng)];
  const int len = data.episodes.at(e).length();
  if (len == 0) throw DataError("episode " + std::to_string(e) + " is empty");
  std::uniform_int_distribution<int> end(0, len - 1);
  return {e, end(rng)};
}

SequenceBatch window_batch(const EpisodeSet& data, std::span<const WindowRef> windows, const PromptSegment& prompt,
                           int context_len) {
  SequenceBatch b;
  for (const auto& w : windows) {
    append(b, assemble_input(prompt, history_window(data.episodes.at(w.episode), w.end, context_len), context_len));
  }
  return b;
}

}  // namespace ptdt::traj
