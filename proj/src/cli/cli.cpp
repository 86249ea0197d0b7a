#include "ptdt/cli/cli.hpp"

#include <CLI11.hpp>
#include <chrono>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <toml.hpp>

#include "ptdt/common/errors.hpp"
#include "ptdt/common/runtime.hpp"
#include "ptdt/dtmodel/checkpoint.hpp"
#include "ptdt/eval/experiment.hpp"
#include "ptdt/eval/plot.hpp"
#include "ptdt/rankserve/render.hpp"
#include "ptdt/rankserve/server.hpp"
#include "ptdt/rankserve/session.hpp"

namespace ptdt::cli {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

json toml_node(const toml::node& n) {
  if (auto t = n.as_table()) {
    json out = json::object();
    for (const auto& [k, v] : *t) out[std::string(k.str())] = toml_node(v);
    return out;
  }
  if (auto a = n.as_array()) {
    json out = json::array();
    for (const auto& v : *a) out.push_back(toml_node(v));
    return out;
  }
  if (auto v = n.as_integer()) return v->get();
  if (auto v = n.as_floating_point()) return v->get();
  if (auto v = n.as_boolean()) return v->get();
  if (auto v = n.as_string()) return v->get();
  throw ConfigError("unsupported TOML value type");
}

std::string toml_scalar(const json& v) {
  if (v.is_array()) {
    std::string s = "[";
    for (std::size_t i = 0; i < v.size(); ++i) s += (i ? ", " : "") + toml_scalar(v[i]);
    return s + "]";
  }
  return v.dump();
}

struct Common {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> family;
  int threads = 1;
  bool json_out = false;
  std::string run_dir;
  std::string name;
  std::vector<std::string> sets;
};

void add_common(CLI::App* app, Common& c) {
  app->add_option("--config", c.config, "TOML config file");
  app->add_option("--seed", c.seed, "Experiment seed");
  app->add_option("--family", c.family, "Task family (point-dir-2d, point-vel-1d, point-reach-2d)");
  app->add_option("--threads", c.threads, "Worker thread cap")->check(CLI::PositiveNumber);
  app->add_flag("--json", c.json_out, "Print the summary as JSON");
  app->add_option("--run-dir", c.run_dir, "Output directory (default runs/<timestamp>-<name>)");
  app->add_option("--name", c.name, "Run name used in the default output directory");
  app->add_option("--set", c.sets, "Override a config key: section.key=value");
}

void set_path(json& j, const std::string& dotted, const json& value) {
  json* node = &j;
  std::stringstream ss(dotted);
  std::string part;
  std::vector<std::string> parts;
  while (std::getline(ss, part, '.')) parts.push_back(part);
  if (parts.empty()) throw ConfigError("empty config key");
  for (std::size_t i = 0; i + 1 < parts.size(); ++i) {
    if (!node->contains(parts[i])) (*node)[parts[i]] = json::object();
    node = &(*node)[parts[i]];
  }
  (*node)[parts.back()] = value;
}

json parse_value(const std::string& text) {
  try {
    return json::parse(text);
  } catch (const json::exception&) {
    return text;
  }
}

std::string timestamp() {
  const auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  localtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y%m%d-%H%M%S", &tm);
  return buf;
}

// User config tree: file, then --family/--seed, then --set, then the
// subcommand's own flags (applied by the caller through `extra`).
json user_tree(const Common& c, const json& extra) {
  json j = json::object();
  if (!c.config.empty()) {
    std::ifstream in(c.config);
    if (!in) throw DataError("config file not found: " + c.config);
    std::stringstream ss;
    ss << in.rdbuf();
    j = toml_to_json(ss.str());
  }
  if (c.family) set_path(j, "envs.family", *c.family);
  if (c.seed) set_path(j, "seed", *c.seed);
  for (const auto& s : c.sets) {
    const auto eq = s.find('=');
    if (eq == std::string::npos) throw ConfigError("--set expects section.key=value, got '" + s + "'");
    set_path(j, s.substr(0, eq), parse_value(s.substr(eq + 1)));
  }
  for (const auto& [k, v] : extra.items()) set_path(j, k, v);
  return j;
}

struct Run {
  eval::ExperimentConfig cfg;
  json user;
  fs::path dir;
  std::string hash;
};

Run start_run(const Common& c, const std::string& command, const json& extra = json::object()) {
  Run r;
  r.user = user_tree(c, extra);
  r.cfg = eval::experiment_from_json(r.user);
  r.hash = eval::config_hash(r.cfg);
  r.dir = c.run_dir.empty() ? fs::path("runs") / (timestamp() + "-" + (c.name.empty() ? command : c.name))
                            : fs::path(c.run_dir);
  fs::create_directories(r.dir);
  std::ofstream(r.dir / "config.toml") << "# config_hash = \"" << r.hash << "\"\n"
                                       << json_to_toml(eval::to_json(r.cfg));
  set_max_threads(c.threads);
  return r;
}

void emit(const Common& c, const json& summary) {
  if (c.json_out) {
    std::cout << summary.dump() << '\n';
    return;
  }
  for (const auto& [k, v] : summary.items()) std::cout << k << ": " << (v.is_string() ? v.get<std::string>() : v.dump()) << '\n';
}

eval::FamilyContext family_data(const Run& r, const std::string& data_dir) {
  if (!data_dir.empty()) return eval::load_family(data_dir, r.cfg);
  auto ctx = eval::prepare_family(r.cfg);
  eval::save_family(r.dir / "data", ctx);
  return ctx;
}

const pretrain::TaskData& find_task(const eval::FamilyContext& ctx, std::optional<int> task_index) {
  if (!task_index) {
    if (ctx.test.empty()) throw ContractError("the family has no held-out tasks; pass --task");
    return ctx.test.front();
  }
  for (const auto* sets : {&ctx.test, &ctx.train}) {
    for (const auto& td : *sets) {
      if (td.task.task_index == *task_index) return td;
    }
  }
  throw ContractError("no task with index " + std::to_string(*task_index));
}

dt::ModelCheckpoint load_model(const std::string& path, const Run& r) {
  if (path.empty()) throw ConfigError("--checkpoint is required");
  auto ck = dt::load_checkpoint(path);
  if (ck.meta.family != r.cfg.family) {
    throw ContractError("checkpoint family " + std::string(envs::to_string(ck.meta.family)) + " differs from config family " +
                        std::string(envs::to_string(r.cfg.family)));
  }
  return ck;
}

void write_file(const fs::path& path, const std::string& text) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write " + path.string());
  out << text;
}

json row_summary(const eval::ResultRow& row, const fs::path& dir) {
  return {{"run_dir", dir.string()},     {"method", row.method},         {"task", row.task},
          {"seed", row.seed},            {"n_samples", row.n_samples},   {"oracle_calls", row.oracle_calls},
          {"raw", row.raw},              {"normalized", row.normalized}, {"config_hash", row.config_hash}};
}

std::vector<int> parse_list(const std::string& s) {
  std::vector<int> out;
  std::stringstream ss(s);
  std::string part;
  while (std::getline(ss, part, ',')) {
    if (part == "full") {
      out.push_back(-1);
      continue;
    }
    try {
      out.push_back(std::stoi(part));
    } catch (const std::exception&) {
      throw ConfigError("bad list entry '" + part + "'");
    }
  }
  return out;
}

}  // namespace

json toml_to_json(const std::string& text) {
  try {
    return toml_node(toml::parse(text));
  } catch (const toml::parse_error& e) {
    std::ostringstream msg;
    msg << "invalid TOML: " << e.description() << " at line " << e.source().begin.line;
    throw ConfigError(msg.str());
  }
}

std::string json_to_toml(const json& j) {
  std::string out;
  for (const auto& [k, v] : j.items()) {
    if (!v.is_object()) out += k + " = " + toml_scalar(v) + "\n";
  }
  for (const auto& [k, v] : j.items()) {
    if (!v.is_object()) continue;
    out += "\n[" + k + "]\n";
    for (const auto& [kk, vv] : v.items()) out += kk + " = " + toml_scalar(vv) + "\n";
  }
  return out;
}

int run(int argc, char** argv) {
  configure_allocator();
  CLI::App app{"Prompt-tuned decision transformer experiments"};
  app.require_subcommand(1);
  Common c;

  std::string data_dir, checkpoint, oracle = "offline", prompt_init, prompt_file, kind, sizes = "32,64,128,256,full",
                                    kstars = "2,5,10", results, out_dir, session_dir, ui_dir, host = "127.0.0.1";
  std::optional<int> samples, kstar, task;
  int run_index = 0, port = 8080;
  bool reveal = false;

  auto* gen = app.add_subcommand("gen-data", "Generate train and held-out datasets for a task split");
  auto* pre = app.add_subcommand("pretrain", "Multi-task pretraining");
  auto* tune = app.add_subcommand("tune", "Tune the prompt of a pretrained model with ZO-RankSGD");
  auto* ft = app.add_subcommand("finetune-full", "Fine-tune all model parameters on limited data");
  auto* ev = app.add_subcommand("eval", "Evaluate a model with a prompt");
  auto* abl = app.add_subcommand("ablate", "Run an ablation sweep");
  auto* serve = app.add_subcommand("serve", "Serve an external ranking session over HTTP");
  auto* plot = app.add_subcommand("plot", "Write SVG plots for a results file");
  for (auto* s : {gen, pre, tune, ft, ev, abl, serve, plot}) add_common(s, c);
  for (auto* s : {pre, tune, ft, ev, abl, serve}) s->add_option("--data", data_dir, "Dataset directory from gen-data");
  for (auto* s : {tune, ft, ev, abl, serve}) s->add_option("--checkpoint", checkpoint, "Checkpoint directory");
  for (auto* s : {tune, ft, ev, serve}) {
    s->add_option("--task", task, "Task index (default: first held-out task)");
    s->add_option("--run", run_index, "Run index selecting the seed streams")->check(CLI::NonNegativeNumber);
  }
  for (auto* s : {tune, ft, ev, abl, serve}) {
    s->add_option("--prompt-init", prompt_init, "Initial prompt quality")->check(CLI::IsMember({"expert", "medium", "random"}));
    s->add_option("--samples", samples, "Window budget (-1 = full)");
  }
  for (auto* s : {pre, tune, abl, serve}) s->add_option("--kstar", kstar, "Prompt length K*");
  tune->add_option("--oracle", oracle, "Ranking oracle")->check(CLI::IsMember({"offline", "online", "external"}));
  for (auto* s : {tune, serve}) {
    s->add_option("--port", port, "HTTP port for the external oracle (0 = any)");
    s->add_option("--host", host, "Bind address");
    s->add_option("--session-dir", session_dir, "Session state directory (default: run dir)");
    s->add_flag("--reveal-returns", reveal, "Expose candidate returns to the client");
    s->add_option("--ui", ui_dir, "Static UI bundle served at /");
  }
  ev->add_option("--prompt", prompt_file, "Prompt JSON (default: sampled initial prompt)");
  abl->add_option("--kind", kind, "Ablation")->required()->check(CLI::IsMember({"samples", "prompt-init", "prompt-length"}));
  abl->add_option("--sizes", sizes, "Sample sizes for --kind samples");
  abl->add_option("--kstars", kstars, "Prompt lengths for --kind prompt-length");
  plot->add_option("--results", results, "Results JSON Lines file")->required();
  plot->add_option("--out", out_dir, "Output directory (default: next to the results file)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    json extra = json::object();
    if (samples) extra["eval.n_samples"] = *samples;
    if (!prompt_init.empty()) extra["eval.prompt_init"] = prompt_init;
    if (kstar) extra["dtmodel.prompt_len"] = *kstar;

    if (gen->parsed()) {
      auto r = start_run(c, "gen-data", extra);
      auto ctx = eval::prepare_family(r.cfg);
      eval::save_family(r.dir / "data", ctx);
      emit(c, {{"run_dir", r.dir.string()},
               {"data_dir", (r.dir / "data").string()},
               {"expert_return", ctx.baseline.expert_return},
               {"random_return", ctx.baseline.random_return},
               {"medium_scale", ctx.medium.scale},
               {"config_hash", r.hash}});
      return 0;
    }

    if (pre->parsed()) {
      auto r = start_run(c, "pretrain", extra);
      auto ctx = family_data(r, data_dir);
      std::ofstream log(r.dir / "train_log.jsonl");
      pretrain::TrainHooks hooks;
      hooks.log = &log;
      auto model = eval::pretrain_model(ctx, r.cfg.model.prompt_len, hooks);
      dt::save_checkpoint(r.dir / "checkpoint", model,
                          {r.cfg.family, r.hash, {{"experiment", r.cfg.seed}}, "pretrain"});
      emit(c, {{"run_dir", r.dir.string()},
               {"checkpoint", (r.dir / "checkpoint").string()},
               {"parameters", model.parameter_count()},
               {"digest", dt::parameter_digest(model)},
               {"config_hash", r.hash}});
      return 0;
    }

    if (tune->parsed() || serve->parsed()) {
      const bool external = serve->parsed() || oracle == "external";
      auto r = start_run(c, serve->parsed() ? "serve" : "tune", extra);
      if (external) {
        const auto& z = r.user.contains("zorank") ? r.user["zorank"] : json::object();
        if (!z.contains("m")) r.cfg.tuner.m = 6;
        if (!z.contains("k")) r.cfg.tuner.k = std::min(r.cfg.tuner.k, r.cfg.tuner.m);
        r.cfg.tuner.validate();
      }
      auto ck = load_model(checkpoint, r);
      const int k = ck.model.config().prompt_len;
      if (kstar && *kstar != k) {
        throw ContractError("--kstar " + std::to_string(*kstar) + " differs from the checkpoint prompt length " + std::to_string(k));
      }
      auto ctx = family_data(r, data_dir);
      const auto& td = find_task(ctx, task);
      auto a = eval::make_adaptation(ctx, td.data, td.task, run_index, r.cfg.prompt_init, std::nullopt, r.cfg.n_samples, k);
      eval::ResultRow row;
      if (!external) {
        const auto method = oracle == "offline" ? eval::Method::PtdtOffline : eval::Method::PtdtOnline;
        auto res = eval::run_method(method, ctx, ck.model, td.task, td.data, a);
        std::ofstream trace(r.dir / "trace.jsonl");
        zo::write_trace(trace, *res.trace);
        write_file(r.dir / "prompt.json", traj::prompt_to_json(traj::flatten_prompt(res.prompt)) + "\n");
        row = res.row;
      } else {
        rank::SessionConfig scfg;
        scfg.tuner = eval::tuner_config(ctx, td.task, run_index);
        scfg.session_id = r.dir.filename().string();
        scfg.task = td.task.describe();
        scfg.reveal_returns = reveal;
        const fs::path sdir = session_dir.empty() ? r.dir : fs::path(session_dir);
        rank::RankingSession session(scfg, sdir);
        rank::RankServer server(session, ui_dir.empty() ? fs::path{} : fs::path(ui_dir));
        const auto flat = traj::flatten_prompt(a.init);
        const int bound = server.start(host, port);
        std::cerr << "ranking service on http://" << host << ":" << bound << "/\n";
        auto state = zo::initial_state(flat.x, scfg.tuner);
        state.trace.model_parameters = ck.model.parameter_count();
        state.trace.config_hash = r.hash;
        auto res = rank::run_session(session, state,
                                     rank::rollout_renderer(ck.model, td.task, flat.layout, eval::online_config(ctx, td.task, run_index)));
        server.stop();
        const auto prompt = traj::unflatten_prompt(res.x, flat.layout);
        write_file(r.dir / "prompt.json", traj::prompt_to_json({res.x, flat.layout}) + "\n");
        const auto ev_res = eval::evaluate(ck.model, prompt, td.task, r.cfg.eval_episodes, ctx.baseline.expert_return,
                                           eval::eval_seed(ctx, td.task));
        row.method = "ptdt_external";
        row.family = r.cfg.family;
        row.task = td.task.task_index;
        row.seed = run_index;
        row.size = a.n_samples;
        row.kstar = k;
        row.prompt_quality = std::string(envs::to_string(a.prompt_quality));
        row.data_quality = "mixed";
        row.n_samples = int(a.windows.size());
        row.oracle_calls = long(res.trace.oracle_calls);
        row.raw = ev_res.mean;
        row.raw_std = ev_res.std;
        row.normalized = eval::normalized_score(ev_res.mean, ctx.baseline);
        row.config_hash = r.hash;
        if (res.trace.aborted) throw OracleError("session aborted: " + res.trace.abort_reason);
      }
      row.experiment = "tune";
      eval::append_results(r.dir / "results.jsonl", {row});
      emit(c, row_summary(row, r.dir));
      return 0;
    }

    if (ft->parsed() || ev->parsed()) {
      auto r = start_run(c, ft->parsed() ? "finetune-full" : "eval", extra);
      auto ck = load_model(checkpoint, r);
      auto ctx = family_data(r, data_dir);
      const auto& td = find_task(ctx, task);
      auto a = eval::make_adaptation(ctx, td.data, td.task, run_index, r.cfg.prompt_init, std::nullopt, r.cfg.n_samples,
                                     ck.model.config().prompt_len);
      if (!prompt_file.empty()) {
        std::ifstream in(prompt_file);
        if (!in) throw DataError("prompt file not found: " + prompt_file);
        std::stringstream ss;
        ss << in.rdbuf();
        const auto flat = traj::prompt_from_json(ss.str());
        a.init = traj::unflatten_prompt(flat.x, flat.layout);
      }
      auto res = eval::run_method(ft->parsed() ? eval::Method::PromptDtFt : eval::Method::PromptDT, ctx, ck.model, td.task,
                                  td.data, a);
      if (res.model) {
        auto meta = ck.meta;
        meta.config_hash = r.hash;
        meta.origin = "finetune-full";
        meta.lineage.push_back({"finetune", r.cfg.seed});
        dt::save_checkpoint(r.dir / "checkpoint", *res.model, meta);
      }
      res.row.experiment = ft->parsed() ? "finetune" : "eval";
      eval::append_results(r.dir / "results.jsonl", {res.row});
      emit(c, row_summary(res.row, r.dir));
      return 0;
    }

    if (abl->parsed()) {
      auto r = start_run(c, "ablate-" + kind, extra);
      auto ctx = family_data(r, data_dir);
      std::vector<eval::ResultRow> rows;
      if (kind == "prompt-length") {
        const auto ks = parse_list(kstars);
        rows = eval::ablate_prompt_length(ctx, ks, [&](int k) {
          auto model = eval::pretrain_model(ctx, k);
          dt::save_checkpoint(r.dir / ("checkpoint_k" + std::to_string(k)), model,
                              {r.cfg.family, r.hash, {{"experiment", r.cfg.seed}}, "pretrain"});
          return model;
        });
      } else {
        auto ck = load_model(checkpoint, r);
        if (ctx.test.empty()) throw ContractError("the family has no held-out tasks");
        for (const auto& td : ctx.test) {
          auto part = kind == "samples" ? eval::ablate_samples(ctx, ck.model, td.task, parse_list(sizes))
                                        : eval::ablate_prompt_init(ctx, ck.model, td.task);
          rows.insert(rows.end(), part.begin(), part.end());
        }
      }
      const auto path = r.dir / "results.jsonl";
      eval::append_results(path, rows);
      for (const auto& [stem, svg] : eval::plot_results(rows)) write_file(r.dir / (stem + ".svg"), svg);
      emit(c, {{"run_dir", r.dir.string()}, {"results", path.string()}, {"rows", rows.size()}, {"config_hash", r.hash}});
      return 0;
    }

    if (plot->parsed()) {
      const auto rows = eval::load_results(results);
      const fs::path dir = out_dir.empty() ? fs::path(results).parent_path() : fs::path(out_dir);
      if (!dir.empty()) fs::create_directories(dir);
      json files = json::array();
      for (const auto& [stem, svg] : eval::plot_results(rows)) {
        write_file(dir / (stem + ".svg"), svg);
        files.push_back((dir / (stem + ".svg")).string());
      }
      emit(c, {{"plots", files}});
      return 0;
    }
  } catch (const ConfigError& e) {
    std::cerr << json{{"error", e.kind()}, {"message", e.what()}}.dump() << '\n';
    return 2;
  } catch (const Error& e) {
    std::cerr << json{{"error", e.kind()}, {"message", e.what()}}.dump() << '\n';
    return 1;
  } catch (const std::exception& e) {
    std::cerr << json{{"error", "Error"}, {"message", e.what()}}.dump() << '\n';
    return 1;
  }
  return 0;
}

}  // namespace ptdt::cli
