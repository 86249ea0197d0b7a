#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "ptdt/dtmodel/model.hpp"
#include "ptdt/envs/policy.hpp"
#include "ptdt/trajdata/prompt.hpp"

namespace ptdt::eval {

inline constexpr int kBaselineFormatVersion = 1;

// Scripted expert and random mean returns for a family, averaged over the
// family's tasks. The expert mean doubles as the evaluation target rtg.
struct FamilyBaseline {
  envs::Family family = envs::Family::PointDir2d;
  double expert_return = 0.0;
  double random_return = 0.0;
  int episodes = 0;
  friend bool operator==(const FamilyBaseline&, const FamilyBaseline&) = default;
};

// Runs at least 100 episodes per policy spread across `tasks`.
FamilyBaseline compute_baseline(envs::Family family, const std::vector<envs::TaskSpec>& tasks, int min_episodes,
                                std::uint64_t seed);

class BaselineTable {
 public:
  void set(const FamilyBaseline& b) { rows_[b.family] = b; }
  bool has(envs::Family f) const { return rows_.count(f) != 0; }
  const FamilyBaseline& at(envs::Family f) const;

  void save(const std::filesystem::path& path) const;
  static BaselineTable load(const std::filesystem::path& path);

 private:
  std::map<envs::Family, FamilyBaseline> rows_;
};

// 100 * (raw - random) / (expert - random); DegenerateBaselineError when the
// two baselines coincide.
double normalized_score(double raw, const FamilyBaseline& baseline);

struct EvalResult {
  std::vector<double> returns;
  double mean = 0.0;
  double std = 0.0;
};

EvalResult summarize(std::vector<double> returns);

// Episode e is seeded with derive_seed(seed, {task_index, e}).
EvalResult evaluate(const dt::PromptDT<float>& model, const traj::PromptSegment& prompt, const envs::TaskSpec& task,
                    int n_episodes, double target_rtg, std::uint64_t seed);

// Scripted policy through the same seeding as `evaluate`.
EvalResult evaluate_scripted(envs::Quality quality, const envs::TaskSpec& task, int n_episodes, std::uint64_t seed,
                             const envs::MediumCalibration& medium);

}  // namespace ptdt::eval
