#include "ptdt/eval/experiment.hpp"

#include <cmath>
#include <fstream>

#include "ptdt/common/errors.hpp"
#include "ptdt/common/hash.hpp"
#include "ptdt/common/rng.hpp"
#include "ptdt/trajdata/dataset_io.hpp"

namespace ptdt::eval {

using nlohmann::json;

namespace {

// Stream labels under the experiment seed.
enum Stream : std::uint64_t {
  kCalibration = 10,
  kBaseline,
  kTrainData,
  kTargetData,
  kTrain,
  kPrompt = 20,
  kWindows,
  kTuner,
  kOffline,
  kOnline,
  kFinetune,
  kEval,
};

std::uint64_t run_seed(const ExperimentConfig& cfg, Stream s, int task, int run) {
  return derive_seed(cfg.seed, {s, std::uint64_t(task), std::uint64_t(run)});
}

void overlay(json& base, const json& patch, const std::string& path) {
  if (!patch.is_object()) throw ConfigError("config section '" + path + "' must be a table");
  for (const auto& [key, value] : patch.items()) {
    const std::string name = path.empty() ? key : path + "." + key;
    if (!base.contains(key)) throw ConfigError("unknown config key '" + name + "'");
    if (base[key].is_object()) {
      overlay(base[key], value, name);
    } else {
      if (base[key].is_number() && !value.is_number()) throw ConfigError("config key '" + name + "' must be a number");
      if (base[key].is_string() && !value.is_string()) throw ConfigError("config key '" + name + "' must be a string");
      if (base[key].is_boolean() && !value.is_boolean()) throw ConfigError("config key '" + name + "' must be a bool");
      base[key] = value;
    }
  }
}

}  // namespace

ExperimentConfig desk_config(envs::Family family) {
  ExperimentConfig c;
  c.family = family;
  c.model.n_layers = 3;
  c.model.n_heads = 1;
  c.model.d_embed = 64;
  c.model.context_len = 10;
  c.model.prompt_len = 5;
  c.train.steps_per_iteration = 10;
  c.train.batch_per_task = 16;
  c.train.optimizer.lr = 1e-3;
  c.train.optimizer.warmup_steps = 100;
  c.train.iterations = 40;
  if (family == envs::Family::PointDir2d) {
    c.n_train = 2;
    c.n_test = 0;
    c.train.iterations = 100;
  }
  c.tuner.T = 20;
  c.tuner.m = 15;
  c.tuner.k = 15;
  c.tuner.mu = 0.1;
  c.tuner.eta = 0.1;
  c.offline.eval_batches = 4;
  c.offline.batch_size = 32;
  c.online.episodes = 1;
  c.finetune.steps = 100;
  c.finetune.batch = 16;
  c.finetune.optimizer.lr = 1e-4;
  return c;
}

json to_json(const ExperimentConfig& c) {
  return {
      {"seed", c.seed},
      {"envs",
       {{"family", std::string(envs::to_string(c.family))},
        {"n_train", c.n_train},
        {"n_test", c.n_test},
        {"train_episodes", c.train_episodes},
        {"target_episodes", c.target_episodes},
        {"calibration_episodes", c.calibration_episodes},
        {"baseline_episodes", c.baseline_episodes}}},
      {"dtmodel",
       {{"n_layers", c.model.n_layers},
        {"n_heads", c.model.n_heads},
        {"d_embed", c.model.d_embed},
        {"context_len", c.model.context_len},
        {"prompt_len", c.model.prompt_len},
        {"mlp_ratio", c.model.mlp_ratio},
        {"prompt_loss", c.model.prompt_loss},
        {"init_std", c.model.init_std}}},
      {"pretrain",
       {{"iterations", c.train.iterations},
        {"steps_per_iteration", c.train.steps_per_iteration},
        {"batch_per_task", c.train.batch_per_task},
        {"lr", c.train.optimizer.lr},
        {"weight_decay", c.train.optimizer.weight_decay},
        {"warmup_steps", c.train.optimizer.warmup_steps},
        {"prompt_quality", std::string(envs::to_string(c.train.prompt_quality))},
        {"eval_every", c.train.eval_every}}},
      {"zorank",
       {{"T", c.tuner.T},
        {"m", c.tuner.m},
        {"k", c.tuner.k},
        {"mu", c.tuner.mu},
        {"eta", c.tuner.eta},
        {"offline_batches", c.offline.eval_batches},
        {"offline_batch_size", c.offline.batch_size},
        {"offline_resample", c.offline.resample},
        {"online_episodes", c.online.episodes},
        {"online_paired", c.online.paired}}},
      {"finetune",
       {{"steps", c.finetune.steps},
        {"batch", c.finetune.batch},
        {"lr", c.finetune.optimizer.lr},
        {"weight_decay", c.finetune.optimizer.weight_decay}}},
      {"eval",
       {{"episodes", c.eval_episodes},
        {"runs", c.runs},
        {"n_samples", c.n_samples},
        {"prompt_init", std::string(envs::to_string(c.prompt_init))}}},
  };
}

ExperimentConfig experiment_from_json(const json& j) {
  auto family = envs::Family::PointVel1d;
  if (j.contains("envs") && j["envs"].contains("family")) {
    family = envs::parse_family(j["envs"]["family"].get<std::string>());
  }
  json t = to_json(desk_config(family));
  overlay(t, j, "");
  ExperimentConfig c = desk_config(family);
  c.seed = t["seed"];
  const auto& e = t["envs"];
  c.n_train = e["n_train"];
  c.n_test = e["n_test"];
  c.train_episodes = e["train_episodes"];
  c.target_episodes = e["target_episodes"];
  c.calibration_episodes = e["calibration_episodes"];
  c.baseline_episodes = e["baseline_episodes"];
  const auto& m = t["dtmodel"];
  c.model.n_layers = m["n_layers"];
  c.model.n_heads = m["n_heads"];
  c.model.d_embed = m["d_embed"];
  c.model.context_len = m["context_len"];
  c.model.prompt_len = m["prompt_len"];
  c.model.mlp_ratio = m["mlp_ratio"];
  c.model.prompt_loss = m["prompt_loss"];
  c.model.init_std = m["init_std"];
  const auto& p = t["pretrain"];
  c.train.iterations = p["iterations"];
  c.train.steps_per_iteration = p["steps_per_iteration"];
  c.train.batch_per_task = p["batch_per_task"];
  c.train.optimizer.lr = p["lr"];
  c.train.optimizer.weight_decay = p["weight_decay"];
  c.train.optimizer.warmup_steps = p["warmup_steps"];
  c.train.prompt_quality = envs::parse_quality(p["prompt_quality"].get<std::string>());
  c.train.eval_every = p["eval_every"];
  const auto& z = t["zorank"];
  c.tuner.T = z["T"];
  c.tuner.m = z["m"];
  c.tuner.k = z["k"];
  c.tuner.mu = z["mu"];
  c.tuner.eta = z["eta"];
  c.offline.eval_batches = z["offline_batches"];
  c.offline.batch_size = z["offline_batch_size"];
  c.offline.resample = z["offline_resample"];
  c.online.episodes = z["online_episodes"];
  c.online.paired = z["online_paired"];
  const auto& f = t["finetune"];
  c.finetune.steps = f["steps"];
  c.finetune.batch = f["batch"];
  c.finetune.optimizer.lr = f["lr"];
  c.finetune.optimizer.weight_decay = f["weight_decay"];
  const auto& v = t["eval"];
  c.eval_episodes = v["episodes"];
  c.runs = v["runs"];
  c.n_samples = v["n_samples"];
  c.prompt_init = envs::parse_quality(v["prompt_init"].get<std::string>());
  c.tuner.validate();
  if (c.n_train < 1 || c.n_test < 0) throw ConfigError("envs.n_train must be >= 1 and envs.n_test >= 0");
  if (c.eval_episodes < 1 || c.runs < 1) throw ConfigError("eval.episodes and eval.runs must be >= 1");
  return c;
}

std::string config_hash(const ExperimentConfig& cfg) { return hash_hex(to_json(cfg).dump()); }

FamilyContext prepare_family(const ExperimentConfig& cfg) {
  FamilyContext ctx;
  ctx.cfg = cfg;
  ctx.split = envs::split_tasks(cfg.family, cfg.n_train, cfg.n_test);
  ctx.medium = envs::calibrate_medium(cfg.family, ctx.split.train, cfg.calibration_episodes,
                                      derive_seed(cfg.seed, {kCalibration}));
  ctx.baseline = compute_baseline(cfg.family, ctx.split.train, cfg.baseline_episodes, derive_seed(cfg.seed, {kBaseline}));
  for (const auto& t : ctx.split.train) {
    ctx.train.push_back({t, envs::generate_dataset(t, envs::QualityMix::gradient(), cfg.train_episodes,
                                                   run_seed(cfg, kTrainData, t.task_index, 0), ctx.medium)});
  }
  for (const auto& t : ctx.split.test) {
    ctx.test.push_back({t, envs::generate_dataset(t, envs::QualityMix::gradient(), cfg.target_episodes,
                                                  run_seed(cfg, kTargetData, t.task_index, 0), ctx.medium)});
  }
  return ctx;
}

const traj::EpisodeSet& target_data(const FamilyContext& ctx, const envs::TaskSpec& task) {
  for (const auto& td : ctx.test) {
    if (td.task == task) return td.data;
  }
  throw ContractError("no held-out data for task " + std::to_string(task.task_index));
}

void save_family(const std::filesystem::path& dir, const FamilyContext& ctx) {
  std::filesystem::create_directories(dir);
  const auto hash = config_hash(ctx.cfg);
  auto write_sets = [&](const std::filesystem::path& path, const std::vector<pretrain::TaskData>& sets) {
    traj::EpisodeSet all;
    for (const auto& td : sets) all.episodes.insert(all.episodes.end(), td.data.episodes.begin(), td.data.episodes.end());
    traj::save_dataset(path, all, hash);
  };
  write_sets(dir / "train.jsonl", ctx.train);
  write_sets(dir / "test.jsonl", ctx.test);
  const auto& b = ctx.baseline;
  json meta = {{"format_version", kFamilyDataFormatVersion},
               {"config_hash", hash},
               {"family", std::string(envs::to_string(ctx.cfg.family))},
               {"n_train", ctx.cfg.n_train},
               {"n_test", ctx.cfg.n_test},
               {"medium", {{"scale", ctx.medium.scale}, {"noise", ctx.medium.noise}, {"achieved_ratio", ctx.medium.achieved_ratio}}},
               {"baseline", {{"expert_return", b.expert_return}, {"random_return", b.random_return}, {"episodes", b.episodes}}}};
  std::ofstream out(dir / "family.json");
  if (!out) throw DataError("cannot write " + (dir / "family.json").string());
  out << meta.dump(2) << '\n';
}

FamilyContext load_family(const std::filesystem::path& dir, const ExperimentConfig& cfg) {
  const auto meta_path = dir / "family.json";
  std::ifstream in(meta_path);
  if (!in) throw DataError("dataset not found: " + meta_path.string());
  const auto meta = json::parse(in);
  if (meta.value("format_version", -1) != kFamilyDataFormatVersion) throw VersionError("family data version mismatch");
  if (meta.at("family") != std::string(envs::to_string(cfg.family)) || meta.at("n_train") != cfg.n_train ||
      meta.at("n_test") != cfg.n_test) {
    throw ContractError("dataset " + dir.string() + " was generated for a different family or task split");
  }
  FamilyContext ctx;
  ctx.cfg = cfg;
  ctx.split = envs::split_tasks(cfg.family, cfg.n_train, cfg.n_test);
  ctx.medium = {cfg.family, meta.at("medium").at("scale"), meta.at("medium").at("noise"),
                meta.at("medium").at("achieved_ratio")};
  const auto& b = meta.at("baseline");
  ctx.baseline = {cfg.family, b.at("expert_return"), b.at("random_return"), b.at("episodes")};
  auto read_sets = [&](const std::filesystem::path& path, const std::vector<envs::TaskSpec>& tasks) {
    const auto all = traj::load_dataset(path);
    std::vector<pretrain::TaskData> out;
    for (const auto& t : tasks) {
      pretrain::TaskData td{t, {}};
      for (const auto& ep : all.episodes) {
        if (ep.task_index == t.task_index) td.data.episodes.push_back(ep);
      }
      out.push_back(std::move(td));
    }
    return out;
  };
  if (!std::filesystem::exists(dir / "train.jsonl")) throw DataError("dataset not found: " + (dir / "train.jsonl").string());
  if (!std::filesystem::exists(dir / "test.jsonl")) throw DataError("dataset not found: " + (dir / "test.jsonl").string());
  ctx.train = read_sets(dir / "train.jsonl", ctx.split.train);
  ctx.test = read_sets(dir / "test.jsonl", ctx.split.test);
  return ctx;
}

dt::ModelConfig model_config(const FamilyContext& ctx, int prompt_len) {
  auto mc = ctx.cfg.model;
  const auto dims = envs::family_dims(ctx.cfg.family);
  mc.state_dim = dims.state_dim;
  mc.action_dim = dims.action_dim;
  mc.max_timestep = dims.horizon;
  mc.prompt_len = prompt_len;
  return mc;
}

dt::PromptDT<float> pretrain_model(const FamilyContext& ctx, int prompt_len, const pretrain::TrainHooks& hooks,
                                   std::vector<pretrain::TrainLogRow>* log) {
  const auto mc = model_config(ctx, prompt_len);
  const auto norm = pretrain::compute_input_norm(ctx.train, mc.state_dim, std::abs(ctx.baseline.expert_return));
  auto tc = ctx.cfg.train;
  tc.seed = derive_seed(ctx.cfg.seed, {kTrain, std::uint64_t(prompt_len)});
  return pretrain::train_multitask(ctx.train, mc, norm, tc, hooks, log);
}

std::string_view to_string(Method m) {
  switch (m) {
    case Method::PromptDT: return "prompt_dt";
    case Method::PtdtOffline: return "ptdt_offline";
    case Method::PtdtOnline: return "ptdt_online";
    case Method::PromptDtFt: return "prompt_dt_ft";
  }
  return "?";
}

Method parse_method(std::string_view s) {
  for (auto m : {Method::PromptDT, Method::PtdtOffline, Method::PtdtOnline, Method::PromptDtFt}) {
    if (to_string(m) == s) return m;
  }
  throw ContractError("unknown method '" + std::string(s) + "'");
}

Adaptation make_adaptation(const FamilyContext& ctx, const traj::EpisodeSet& data, const envs::TaskSpec& task,
                           int run, envs::Quality prompt_quality, std::optional<envs::Quality> data_quality,
                           int n_samples, int prompt_len) {
  Adaptation a;
  a.run = run;
  a.prompt_quality = prompt_quality;
  a.data_quality = data_quality;
  a.n_samples = n_samples;
  if (prompt_len > 0) {
    Rng prng(run_seed(ctx.cfg, kPrompt, task.task_index, run));
    a.init = traj::sample_prompt(data, task.task_index, {prompt_len, prompt_quality, 1}, prng);
  } else {
    const auto dims = envs::family_dims(task.family);
    a.init.state_dim = dims.state_dim;
    a.init.action_dim = dims.action_dim;
  }
  const auto episodes = data.select(task.task_index, data_quality ? &*data_quality : nullptr);
  if (n_samples < 0) {
    a.windows = traj::all_windows(data, episodes);
  } else {
    Rng wrng(run_seed(ctx.cfg, kWindows, task.task_index, run));
    a.windows = traj::sample_windows(data, episodes, n_samples, wrng);
  }
  return a;
}

zo::TunerConfig tuner_config(const FamilyContext& ctx, const envs::TaskSpec& task, int run) {
  auto t = ctx.cfg.tuner;
  t.seed = run_seed(ctx.cfg, kTuner, task.task_index, run);
  return t;
}

zo::OnlineOracleConfig online_config(const FamilyContext& ctx, const envs::TaskSpec& task, int run) {
  auto o = ctx.cfg.online;
  o.target_rtg = ctx.baseline.expert_return;
  o.seed = run_seed(ctx.cfg, kOnline, task.task_index, run);
  return o;
}

std::uint64_t eval_seed(const FamilyContext& ctx, const envs::TaskSpec& task) {
  return run_seed(ctx.cfg, kEval, task.task_index, 0);
}

json to_json(const ResultRow& r) {
  return {{"experiment", r.experiment},
          {"method", r.method},
          {"family", std::string(envs::to_string(r.family))},
          {"task", r.task},
          {"seed", r.seed},
          {"size", r.size},
          {"kstar", r.kstar},
          {"prompt_quality", r.prompt_quality},
          {"data_quality", r.data_quality},
          {"n_samples", r.n_samples},
          {"oracle_calls", r.oracle_calls},
          {"raw", r.raw},
          {"raw_std", r.raw_std},
          {"normalized", r.normalized},
          {"config_hash", r.config_hash}};
}

ResultRow result_from_json(const json& j) {
  ResultRow r;
  r.experiment = j.at("experiment");
  r.method = j.at("method");
  r.family = envs::parse_family(j.at("family").get<std::string>());
  r.task = j.at("task");
  r.seed = j.at("seed");
  r.size = j.at("size");
  r.kstar = j.at("kstar");
  r.prompt_quality = j.at("prompt_quality");
  r.data_quality = j.at("data_quality");
  r.n_samples = j.at("n_samples");
  r.oracle_calls = j.at("oracle_calls");
  r.raw = j.at("raw");
  r.raw_std = j.at("raw_std");
  r.normalized = j.at("normalized");
  r.config_hash = j.at("config_hash");
  return r;
}

std::vector<ResultRow> load_results(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("results file not found: " + path.string());
  std::vector<ResultRow> rows;
  std::string line;
  std::size_t n = 0;
  while (std::getline(in, line)) {
    ++n;
    if (line.empty()) continue;
    try {
      rows.push_back(result_from_json(json::parse(line)));
    } catch (const json::exception& e) {
      throw ParseError(path.string() + ":" + std::to_string(n) + ": " + e.what(), n);
    }
  }
  return rows;
}

void append_results(const std::filesystem::path& path, const std::vector<ResultRow>& rows) {
  std::ofstream out(path, std::ios::app);
  if (!out) throw DataError("cannot write " + path.string());
  for (const auto& r : rows) out << to_json(r).dump() << '\n';
}

MethodResult run_method(Method method, const FamilyContext& ctx, const dt::PromptDT<float>& model,
                        const envs::TaskSpec& task, const traj::EpisodeSet& data, const Adaptation& a,
                        const zo::ZoHooks& hooks) {
  const auto& cfg = ctx.cfg;
  const double target = ctx.baseline.expert_return;
  MethodResult out;
  out.prompt = a.init;
  const dt::PromptDT<float>* evaluated = &model;
  const auto tuner = tuner_config(ctx, task, a.run);
  const auto layout = traj::flatten_prompt(a.init).layout;

  switch (method) {
    case Method::PromptDT:
      break;
    case Method::PtdtOffline: {
      auto ocfg = cfg.offline;
      ocfg.seed = run_seed(cfg, kOffline, task.task_index, a.run);
      zo::OfflineLossObjective objective(model, data, a.windows, layout, ocfg);
      zo::ValueOracle oracle(objective);
      auto r = zo::tune_prompt(model, a.init, oracle, tuner, hooks);
      out.prompt = r.prompt;
      out.trace = std::move(r.trace);
      break;
    }
    case Method::PtdtOnline: {
      zo::OnlineReturnObjective objective(model, task, layout, online_config(ctx, task, a.run));
      zo::ValueOracle oracle(objective);
      auto r = zo::tune_prompt(model, a.init, oracle, tuner, hooks);
      out.prompt = r.prompt;
      out.trace = std::move(r.trace);
      break;
    }
    case Method::PromptDtFt: {
      auto fcfg = cfg.finetune;
      fcfg.seed = run_seed(cfg, kFinetune, task.task_index, a.run);
      out.model.emplace(pretrain::finetune_full(model, data, a.windows, a.init, fcfg));
      evaluated = &*out.model;
      break;
    }
  }

  if (out.trace) out.trace->config_hash = config_hash(cfg);
  const auto res = evaluate(*evaluated, out.prompt, task, cfg.eval_episodes, target, eval_seed(ctx, task));
  auto& row = out.row;
  row.method = std::string(to_string(method));
  row.family = task.family;
  row.task = task.task_index;
  row.seed = a.run;
  row.size = a.n_samples;
  row.kstar = a.init.length();
  row.prompt_quality = std::string(envs::to_string(a.prompt_quality));
  row.data_quality = a.data_quality ? std::string(envs::to_string(*a.data_quality)) : "mixed";
  row.n_samples = int(a.windows.size());
  row.oracle_calls = out.trace ? out.trace->oracle_calls : 0;
  row.raw = res.mean;
  row.raw_std = res.std;
  row.normalized = normalized_score(res.mean, ctx.baseline);
  row.config_hash = config_hash(cfg);
  return out;
}

std::vector<ResultRow> ablate_samples(const FamilyContext& ctx, const dt::PromptDT<float>& model,
                                      const envs::TaskSpec& task, const std::vector<int>& sizes) {
  const auto& data = target_data(ctx, task);
  std::vector<ResultRow> rows;
  for (int size : sizes) {
    for (int run = 0; run < ctx.cfg.runs; ++run) {
      auto a = make_adaptation(ctx, data, task, run, ctx.cfg.prompt_init, std::nullopt, size,
                               model.config().prompt_len);
      for (auto m : {Method::PtdtOffline, Method::PromptDtFt}) {
        auto r = run_method(m, ctx, model, task, data, a).row;
        r.experiment = "samples";
        rows.push_back(r);
      }
    }
  }
  return rows;
}

std::vector<ResultRow> ablate_prompt_init(const FamilyContext& ctx, const dt::PromptDT<float>& model,
                                          const envs::TaskSpec& task) {
  const auto& data = target_data(ctx, task);
  const envs::Quality qualities[] = {envs::Quality::Expert, envs::Quality::Medium, envs::Quality::Random};
  std::vector<ResultRow> rows;
  for (auto pq : qualities) {
    for (auto dq : qualities) {
      for (int run = 0; run < ctx.cfg.runs; ++run) {
        auto a = make_adaptation(ctx, data, task, run, pq, dq, ctx.cfg.n_samples, model.config().prompt_len);
        for (auto m : {Method::PtdtOffline, Method::PromptDtFt}) {
          auto r = run_method(m, ctx, model, task, data, a).row;
          r.experiment = "prompt_init";
          rows.push_back(r);
        }
      }
    }
  }
  return rows;
}

std::vector<ResultRow> ablate_prompt_length(const FamilyContext& ctx, const std::vector<int>& kstars,
                                            const std::function<dt::PromptDT<float>(int)>& model_for) {
  std::vector<ResultRow> rows;
  for (int kstar : kstars) {
    const auto model = model_for(kstar);
    if (model.config().prompt_len != kstar) throw ShapeError("model prompt length differs from requested K*");
    for (const auto& task : ctx.split.test) {
      const auto& data = target_data(ctx, task);
      for (int run = 0; run < ctx.cfg.runs; ++run) {
        auto a = make_adaptation(ctx, data, task, run, ctx.cfg.prompt_init, std::nullopt, ctx.cfg.n_samples, kstar);
        for (auto m : {Method::PromptDT, Method::PtdtOffline}) {
          auto r = run_method(m, ctx, model, task, data, a).row;
          r.experiment = "prompt_length";
          rows.push_back(r);
        }
      }
    }
  }
  return rows;
}

}  // namespace ptdt::eval
