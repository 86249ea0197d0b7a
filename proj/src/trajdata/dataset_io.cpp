#include "ptdt/trajdata/dataset_io.hpp"

#include <fstream>
#include <json.hpp>

#include "ptdt/common/errors.hpp"

namespace ptdt::traj {
namespace {

using nlohmann::json;

json rows(const std::vector<double>& flat, int dim) {
  json out = json::array();
  for (std::size_t i = 0; i < flat.size(); i += dim) {
    out.push_back(std::vector<double>(flat.begin() + i, flat.begin() + i + dim));
  }
  return out;
}

std::vector<double> unrows(const json& j, int& dim, const char* field) {
  std::vector<double> flat;
  dim = -1;
  for (const auto& row : j) {
    auto r = row.get<std::vector<double>>();
    if (dim < 0) dim = static_cast<int>(r.size());
    if (static_cast<int>(r.size()) != dim || dim == 0) {
      throw ShapeError(std::string("ragged or empty rows in '") + field + "'");
    }
    flat.insert(flat.end(), r.begin(), r.end());
  }
  return flat;
}

}  // namespace

std::string episode_to_jsonl(const Episode& ep, const std::string& config_hash) {
  json j;
  j["format_version"] = kDatasetFormatVersion;
  j["config_hash"] = config_hash;
  j["task_index"] = ep.task_index;
  j["family"] = envs::to_string(ep.family);
  j["quality"] = envs::to_string(ep.quality);
  j["seed"] = ep.seed;
  j["states"] = rows(ep.states, ep.state_dim);
  j["actions"] = rows(ep.actions, ep.action_dim);
  j["rewards"] = ep.rewards;
  return j.dump();
}

Episode episode_from_jsonl(const std::string& line, std::size_t line_no) {
  try {
    const json j = json::parse(line);
    if (j.at("format_version").get<int>() != kDatasetFormatVersion) {
      throw ParseError("line " + std::to_string(line_no) + ": unsupported format_version", line_no);
    }
    Episode ep;
    ep.task_index = j.at("task_index").get<int>();
    ep.family = envs::parse_family(j.at("family").get<std::string>());
    ep.quality = envs::parse_quality(j.at("quality").get<std::string>());
    ep.seed = j.at("seed").get<std::uint64_t>();
    ep.rewards = j.at("rewards").get<std::vector<double>>();
    const auto dims = envs::family_dims(ep.family);
    ep.state_dim = dims.state_dim;
    ep.action_dim = dims.action_dim;
    int sd = 0, ad = 0;
    ep.states = unrows(j.at("states"), sd, "states");
    ep.actions = unrows(j.at("actions"), ad, "actions");
    if (!ep.rewards.empty() && (sd != dims.state_dim || ad != dims.action_dim)) {
      throw ShapeError("state/action width does not match family " + std::string(envs::to_string(ep.family)));
    }
    ep.finalize();
    return ep;
  } catch (const ParseError&) {
    throw;
  } catch (const std::exception& e) {
    throw ParseError("line " + std::to_string(line_no) + ": " + e.what(), line_no);
  }
}

void save_dataset(const std::filesystem::path& path, const EpisodeSet& set, const std::string& config_hash) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("cannot write dataset '" + path.string() + "'");
  for (const auto& ep : set.episodes) out << episode_to_jsonl(ep, config_hash) << '\n';
  if (!out) throw DataError("write failed for dataset '" + path.string() + "'");
}

EpisodeSet load_dataset(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open dataset '" + path.string() + "'");
  EpisodeSet set;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    set.episodes.push_back(episode_from_jsonl(line, line_no));
  }
  return set;
}

}  // namespace ptdt::traj
