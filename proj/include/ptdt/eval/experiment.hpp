#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "ptdt/dtmodel/model.hpp"
#include "ptdt/envs/env.hpp"
#include "ptdt/envs/policy.hpp"
#include "ptdt/eval/eval.hpp"
#include "ptdt/pretrain/pretrain.hpp"
#include "ptdt/zorank/prompt_tuning.hpp"

namespace ptdt::eval {

// Everything one family-level experiment needs. Defaults are the desk-scale
// settings; desk_config() fills the family-dependent fields.
struct ExperimentConfig {
  envs::Family family = envs::Family::PointVel1d;
  int n_train = 8;
  int n_test = 2;
  int train_episodes = 30;  // per training task, quality gradient
  int target_episodes = 30;  // per held-out task, quality gradient
  int calibration_episodes = 25;
  int baseline_episodes = 100;
  dt::ModelConfig model;
  pretrain::TrainConfig train;
  zo::TunerConfig tuner;
  zo::OfflineOracleConfig offline;
  zo::OnlineOracleConfig online;
  pretrain::FinetuneConfig finetune;
  envs::Quality prompt_init = envs::Quality::Medium;
  int n_samples = 256;  // -1 = every window of the held-out data
  int eval_episodes = 50;
  int runs = 3;
  std::uint64_t seed = 0;
};

ExperimentConfig desk_config(envs::Family family);

nlohmann::json to_json(const ExperimentConfig& cfg);
// Reads a (possibly partial) tree over the defaults of desk_config(family);
// unknown keys throw ConfigError naming the key.
ExperimentConfig experiment_from_json(const nlohmann::json& j);
std::string config_hash(const ExperimentConfig& cfg);

struct FamilyContext {
  ExperimentConfig cfg;
  envs::TaskSplit split;
  envs::MediumCalibration medium;
  FamilyBaseline baseline;
  std::vector<pretrain::TaskData> train;
  // Limited offline data of each held-out task.
  std::vector<pretrain::TaskData> test;
};

inline constexpr int kFamilyDataFormatVersion = 1;

// Calibrates the medium policy, computes baselines and generates the
// pretraining and held-out datasets.
FamilyContext prepare_family(const ExperimentConfig& cfg);

// <dir>/family.json, <dir>/train.jsonl, <dir>/test.jsonl.
void save_family(const std::filesystem::path& dir, const FamilyContext& ctx);
// Throws DataError naming the missing path, ContractError when the stored
// family or split disagrees with `cfg`.
FamilyContext load_family(const std::filesystem::path& dir, const ExperimentConfig& cfg);

const traj::EpisodeSet& target_data(const FamilyContext& ctx, const envs::TaskSpec& task);

dt::ModelConfig model_config(const FamilyContext& ctx, int prompt_len);

dt::PromptDT<float> pretrain_model(const FamilyContext& ctx, int prompt_len,
                                   const pretrain::TrainHooks& hooks = {},
                                   std::vector<pretrain::TrainLogRow>* log = nullptr);

enum class Method { PromptDT, PtdtOffline, PtdtOnline, PromptDtFt };
std::string_view to_string(Method m);
Method parse_method(std::string_view s);

// The adaptation inputs shared by every method of one run: the initial
// prompt and the sampled window budget.
struct Adaptation {
  int run = 0;
  envs::Quality prompt_quality = envs::Quality::Medium;
  std::optional<envs::Quality> data_quality;
  int n_samples = 0;  // requested; -1 = full
  traj::PromptSegment init;
  std::vector<traj::WindowRef> windows;
};

Adaptation make_adaptation(const FamilyContext& ctx, const traj::EpisodeSet& data, const envs::TaskSpec& task,
                           int run, envs::Quality prompt_quality, std::optional<envs::Quality> data_quality,
                           int n_samples, int prompt_len);

// Per-run streams, shared by every entry point so a CLI tune and an
// ablation run with the same (task, run) draw the same randomness.
zo::TunerConfig tuner_config(const FamilyContext& ctx, const envs::TaskSpec& task, int run);
zo::OnlineOracleConfig online_config(const FamilyContext& ctx, const envs::TaskSpec& task, int run);
std::uint64_t eval_seed(const FamilyContext& ctx, const envs::TaskSpec& task);

// One results-file row.
struct ResultRow {
  std::string experiment;
  std::string method;
  envs::Family family = envs::Family::PointVel1d;
  int task = 0;
  int seed = 0;
  int size = 0;  // -1 = full
  int kstar = 0;
  std::string prompt_quality;
  std::string data_quality;
  int n_samples = 0;  // windows actually used
  long oracle_calls = 0;
  double raw = 0.0;
  double raw_std = 0.0;
  double normalized = 0.0;
  std::string config_hash;
};

nlohmann::json to_json(const ResultRow& r);
ResultRow result_from_json(const nlohmann::json& j);
std::vector<ResultRow> load_results(const std::filesystem::path& path);
void append_results(const std::filesystem::path& path, const std::vector<ResultRow>& rows);

struct MethodResult {
  ResultRow row;
  traj::PromptSegment prompt;
  std::optional<zo::TuneTrace> trace;
  std::optional<dt::PromptDT<float>> model;  // fine-tuned weights
};

// Adapts with one method and evaluates over cfg.eval_episodes. The
// evaluation seed depends only on the task, so methods are compared on the
// same episodes.
MethodResult run_method(Method method, const FamilyContext& ctx, const dt::PromptDT<float>& model,
                        const envs::TaskSpec& task, const traj::EpisodeSet& data, const Adaptation& a,
                        const zo::ZoHooks& hooks = {});

// PTDT-offline vs Prompt-DT-FT on equal window budgets; one row per
// (method, size, run). Size -1 means the full held-out dataset.
std::vector<ResultRow> ablate_samples(const FamilyContext& ctx, const dt::PromptDT<float>& model,
                                      const envs::TaskSpec& task, const std::vector<int>& sizes);

// prompt quality x dataset quality grid, both methods, ctx.cfg.n_samples
// windows from the matching quality slice.
std::vector<ResultRow> ablate_prompt_init(const FamilyContext& ctx, const dt::PromptDT<float>& model,
                                          const envs::TaskSpec& task);

// Prompt-DT vs PTDT-offline per prompt length on every held-out task.
// `model_for` supplies the pretrained model of each K*.
std::vector<ResultRow> ablate_prompt_length(const FamilyContext& ctx, const std::vector<int>& kstars,
                                            const std::function<dt::PromptDT<float>(int)>& model_for);

}  // namespace ptdt::eval
