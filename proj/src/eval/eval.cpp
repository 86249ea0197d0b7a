#include "ptdt/eval/eval.hpp"

#include <cmath>
#include <fstream>
#include <json.hpp>

#include "ptdt/common/errors.hpp"
#include "ptdt/common/rng.hpp"
#include "ptdt/dtmodel/rollout.hpp"

namespace ptdt::eval {

FamilyBaseline compute_baseline(envs::Family family, const std::vector<envs::TaskSpec>& tasks, int min_episodes,
                                std::uint64_t seed) {
  if (tasks.empty()) throw ContractError("compute_baseline: no tasks");
  const int per_task = std::max(1, int((std::max(min_episodes, 100) + tasks.size() - 1) / tasks.size()));
  envs::MediumCalibration unused{family};
  FamilyBaseline b{family, 0.0, 0.0, per_task * int(tasks.size())};
  b.expert_return = envs::mean_scripted_return(tasks, envs::Quality::Expert, per_task, seed, unused);
  b.random_return = envs::mean_scripted_return(tasks, envs::Quality::Random, per_task, seed, unused);
  return b;
}

const FamilyBaseline& BaselineTable::at(envs::Family f) const {
  auto it = rows_.find(f);
  if (it == rows_.end()) throw ContractError("no baseline for family " + std::string(envs::to_string(f)));
  return it->second;
}

void BaselineTable::save(const std::filesystem::path& path) const {
  nlohmann::json rows = nlohmann::json::array();
  for (const auto& [f, b] : rows_) {
    rows.push_back({{"family", std::string(envs::to_string(f))},
                    {"expert_return", b.expert_return},
                    {"random_return", b.random_return},
                    {"episodes", b.episodes}});
  }
  std::ofstream out(path);
  if (!out) throw DataError("cannot write " + path.string());
  out << nlohmann::json{{"format_version", kBaselineFormatVersion}, {"baselines", rows}}.dump(2) << '\n';
}

BaselineTable BaselineTable::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("baseline table not found: " + path.string());
  auto j = nlohmann::json::parse(in);
  if (j.value("format_version", -1) != kBaselineFormatVersion) throw VersionError("baseline table version mismatch");
  BaselineTable t;
  for (const auto& r : j.at("baselines")) {
    t.set({envs::parse_family(r.at("family").get<std::string>()), r.at("expert_return"), r.at("random_return"),
           r.at("episodes")});
  }
  return t;
}

double normalized_score(double raw, const FamilyBaseline& b) {
  const double gap = b.expert_return - b.random_return;
  if (gap == 0.0) {
    throw DegenerateBaselineError("expert and random baselines coincide for " + std::string(envs::to_string(b.family)));
  }
  return 100.0 * (raw - b.random_return) / gap;
}

EvalResult summarize(std::vector<double> returns) {
  EvalResult r;
  r.returns = std::move(returns);
  if (r.returns.empty()) return r;
  double sum = 0.0;
  for (double v : r.returns) sum += v;
  r.mean = sum / double(r.returns.size());
  double sq = 0.0;
  for (double v : r.returns) sq += (v - r.mean) * (v - r.mean);
  r.std = std::sqrt(sq / double(r.returns.size()));
  return r;
}

EvalResult evaluate(const dt::PromptDT<float>& model, const traj::PromptSegment& prompt, const envs::TaskSpec& task,
                    int n_episodes, double target_rtg, std::uint64_t seed) {
  std::vector<dt::RolloutRequest> reqs;
  for (int e = 0; e < n_episodes; ++e) {
    reqs.push_back({task, prompt, derive_seed(seed, {std::uint64_t(task.task_index), std::uint64_t(e)}), target_rtg});
  }
  std::vector<double> returns;
  for (const auto& ep : dt::rollout_batch(model, reqs)) returns.push_back(ep.episodic_return());
  return summarize(std::move(returns));
}

EvalResult evaluate_scripted(envs::Quality quality, const envs::TaskSpec& task, int n_episodes, std::uint64_t seed,
                             const envs::MediumCalibration& medium) {
  std::vector<double> returns;
  for (int e = 0; e < n_episodes; ++e) {
    returns.push_back(
        envs::rollout_scripted(task, quality, derive_seed(seed, {std::uint64_t(task.task_index), std::uint64_t(e)}),
                               medium)
            .episodic_return());
  }
  return summarize(std::move(returns));
}

}  // namespace ptdt::eval
