#include "ptdt/trajdata/prompt.hpp"

#include <json.hpp>

#include "ptdt/common/errors.hpp"

namespace ptdt::traj {

namespace {
constexpr int kPromptFormatVersion = 1;
}

FlatPrompt flatten_prompt(const PromptSegment& p) {
  const int k = p.length();
  if (p.states.size() != std::size_t(k) * p.state_dim || p.actions.size() != std::size_t(k) * p.action_dim ||
      p.timesteps.size() != std::size_t(k)) {
    throw ShapeError("flatten_prompt: inconsistent prompt arrays for length " + std::to_string(k));
  }
  FlatPrompt out;
  out.layout = PromptLayout{1, p.state_dim, p.action_dim, k, p.timesteps, p.source_episode};
  out.x.reserve(out.layout.dim());
  for (int i = 0; i < k; ++i) {
    out.x.push_back(p.rtg[i]);
    for (int j = 0; j < p.state_dim; ++j) out.x.push_back(p.states[std::size_t(i) * p.state_dim + j]);
    for (int j = 0; j < p.action_dim; ++j) out.x.push_back(p.actions[std::size_t(i) * p.action_dim + j]);
  }
  return out;
}

PromptSegment unflatten_prompt(std::span<const double> x, const PromptLayout& layout) {
  if (layout.rtg_dim != 1) throw ShapeError("unflatten_prompt: only a 1-D reward-to-go channel is supported");
  if (x.size() != std::size_t(layout.dim())) {
    throw ShapeError("unflatten_prompt: vector has " + std::to_string(x.size()) + " values, layout needs " +
                     std::to_string(layout.dim()));
  }
  if (layout.timesteps.size() != std::size_t(layout.length)) {
    throw ShapeError("unflatten_prompt: layout timesteps do not match length");
  }
  PromptSegment p;
  p.state_dim = layout.state_dim;
  p.action_dim = layout.action_dim;
  p.timesteps = layout.timesteps;
  p.source_episode = layout.source_episode;
  std::size_t at = 0;
  for (int i = 0; i < layout.length; ++i) {
    p.rtg.push_back(x[at++]);
    for (int j = 0; j < layout.state_dim; ++j) p.states.push_back(x[at++]);
    for (int j = 0; j < layout.action_dim; ++j) p.actions.push_back(x[at++]);
  }
  return p;
}

PromptSegment cut_prompt(const Episode& ep, int start, int length, int source_episode) {
  if (length < 1 || start < 0 || start + length > ep.length()) {
    throw ContractError("cut_prompt: window [" + std::to_string(start) + ", " + std::to_string(start + length) +
                        ") outside episode of length " + std::to_string(ep.length()));
  }
  PromptSegment p;
  p.state_dim = ep.state_dim;
  p.action_dim = ep.action_dim;
  p.source_episode = source_episode;
  for (int t = start; t < start + length; ++t) {
    p.rtg.push_back(ep.rtg[t]);
    auto s = ep.state(t);
    p.states.insert(p.states.end(), s.begin(), s.end());
    auto a = ep.action(t);
    p.actions.insert(p.actions.end(), a.begin(), a.end());
    p.timesteps.push_back(ep.timesteps[t]);
  }
  return p;
}

PromptSegment sample_prompt(const EpisodeSet& data, int task_index, const PromptSampling& cfg, Rng& rng) {
  if (cfg.length < 1 || cfg.segments < 1 || cfg.segments > cfg.length) {
    throw ContractError("sample_prompt: need 1 <= segments <= length");
  }
  std::vector<int> pool;
  for (int idx : data.select(task_index, cfg.quality ? &*cfg.quality : nullptr)) {
    if (data.episodes[idx].length() >= cfg.length) pool.push_back(idx);
  }
  if (pool.empty()) {
    throw DataError("sample_prompt: no episode for task " + std::to_string(task_index) +
                    (cfg.quality ? " with quality " + std::string(envs::to_string(*cfg.quality)) : std::string()) +
                    " of length >= " + std::to_string(cfg.length));
  }
  PromptSegment out;
  for (int s = 0; s < cfg.segments; ++s) {
    const int len = cfg.length / cfg.segments + (s < cfg.length % cfg.segments ? 1 : 0);
    const int ep_idx = pool[std::uniform_int_distribution<std::size_t>(0, pool.size() - 1)(rng)];
    const Episode& ep = data.episodes[ep_idx];
    const int start = std::uniform_int_distribution<int>(0, ep.length() - len)(rng);
    PromptSegment part = cut_prompt(ep, start, len, ep_idx);
    if (s == 0) {
      out = std::move(part);
      continue;
    }
    out.source_episode = -1;
    out.rtg.insert(out.rtg.end(), part.rtg.begin(), part.rtg.end());
    out.states.insert(out.states.end(), part.states.begin(), part.states.end());
    out.actions.insert(out.actions.end(), part.actions.begin(), part.actions.end());
    out.timesteps.insert(out.timesteps.end(), part.timesteps.begin(), part.timesteps.end());
  }
  return out;
}

std::string prompt_to_json(const FlatPrompt& p) {
  nlohmann::json j;
  j["format_version"] = kPromptFormatVersion;
  j["layout"] = {{"rtg_dim", p.layout.rtg_dim},       {"state_dim", p.layout.state_dim},
                 {"action_dim", p.layout.action_dim}, {"length", p.layout.length},
                 {"timesteps", p.layout.timesteps},   {"source_episode", p.layout.source_episode}};
  j["x"] = p.x;
  return j.dump();
}

FlatPrompt prompt_from_json(const std::string& text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("prompt file: ") + e.what(), 1);
  }
  if (j.value("format_version", -1) != kPromptFormatVersion) {
    throw VersionError("prompt file: unsupported format_version");
  }
  try {
    FlatPrompt p;
    const auto& l = j.at("layout");
    p.layout.rtg_dim = l.at("rtg_dim").get<int>();
    p.layout.state_dim = l.at("state_dim").get<int>();
    p.layout.action_dim = l.at("action_dim").get<int>();
    p.layout.length = l.at("length").get<int>();
    p.layout.timesteps = l.at("timesteps").get<std::vector<int>>();
    p.layout.source_episode = l.at("source_episode").get<int>();
    p.x = j.at("x").get<std::vector<double>>();
    if (p.x.size() != std::size_t(p.layout.dim())) throw ShapeError("prompt file: x does not match layout");
    return p;
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("prompt file: ") + e.what(), 1);
  }
}

}  // namespace ptdt::traj
