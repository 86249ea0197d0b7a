#include "ptdt/dtmodel/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <json.hpp>

#include "ptdt/common/errors.hpp"
#include "ptdt/common/hash.hpp"

namespace ptdt::dt {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::string blob(const PromptDT<float>& model) {
  std::string out;
  out.reserve(model.parameter_count() * 4);
  for (const auto& p : model.params()) {
    for (float v : p.value.data()) {
      const auto u = std::bit_cast<std::uint32_t>(v);
      for (int b = 0; b < 4; ++b) out.push_back(static_cast<char>((u >> (8 * b)) & 0xff));
    }
  }
  return out;
}

json config_json(const ModelConfig& c) {
  return {{"n_layers", c.n_layers},         {"n_heads", c.n_heads},           {"d_embed", c.d_embed},
          {"activation", c.activation},     {"context_len", c.context_len}, {"prompt_len", c.prompt_len},
          {"state_dim", c.state_dim},       {"action_dim", c.action_dim},   {"rtg_dim", c.rtg_dim},
          {"max_timestep", c.max_timestep}, {"mlp_ratio", c.mlp_ratio},     {"prompt_loss", c.prompt_loss},
          {"init_std", c.init_std}};
}

ModelConfig config_from_json(const json& j) {
  ModelConfig c;
  c.n_layers = j.at("n_layers");
  c.n_heads = j.at("n_heads");
  c.d_embed = j.at("d_embed");
  c.activation = j.at("activation");
  c.context_len = j.at("context_len");
  c.prompt_len = j.at("prompt_len");
  c.state_dim = j.at("state_dim");
  c.action_dim = j.at("action_dim");
  c.rtg_dim = j.at("rtg_dim");
  c.max_timestep = j.at("max_timestep");
  c.mlp_ratio = j.at("mlp_ratio");
  c.prompt_loss = j.at("prompt_loss");
  c.init_std = j.at("init_std");
  return c;
}

}  // namespace

std::string parameter_digest(const PromptDT<float>& model) { return hash_hex(blob(model)); }

void save_checkpoint(const fs::path& dir, const PromptDT<float>& model, const CheckpointMeta& meta) {
  fs::create_directories(dir);
  const std::string bytes = blob(model);
  json params = json::array();
  std::size_t offset = 0;
  for (const auto& p : model.params()) {
    params.push_back({{"name", p.name}, {"shape", p.value.shape()}, {"offset", offset}});
    offset += p.value.size() * 4;
  }
  json lineage = json::array();
  for (const auto& l : meta.lineage) lineage.push_back({{"label", l.label}, {"seed", l.seed}});
  const auto& n = model.norm();
  json manifest = {
      {"format_version", kCheckpointFormatVersion},
      {"dtype", "float32"},
      {"byte_order", "little"},
      {"family", std::string(envs::to_string(meta.family))},
      {"config_hash", meta.config_hash},
      {"origin", meta.origin},
      {"seed_lineage", lineage},
      {"config", config_json(model.config())},
      {"norm", {{"state_mean", n.state_mean}, {"state_std", n.state_std}, {"rtg_scale", n.rtg_scale}}},
      {"params", params},
      {"total_bytes", bytes.size()},
      {"digest", hash_hex(bytes)},
  };
  {
    std::ofstream f(dir / "params.bin", std::ios::binary | std::ios::trunc);
    if (!f) throw DataError("cannot write " + (dir / "params.bin").string());
    f.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  }
  std::ofstream f(dir / "manifest.json", std::ios::trunc);
  if (!f) throw DataError("cannot write " + (dir / "manifest.json").string());
  f << manifest.dump(2) << '\n';
}

ModelCheckpoint load_checkpoint(const fs::path& dir) {
  std::ifstream mf(dir / "manifest.json");
  if (!mf) throw DataError("checkpoint manifest not found in " + dir.string());
  json m;
  try {
    m = json::parse(mf);
  } catch (const json::exception& e) {
    throw DataError("checkpoint manifest is not valid JSON: " + std::string(e.what()));
  }
  const int version = m.value("format_version", -1);
  if (version != kCheckpointFormatVersion) {
    throw VersionError("checkpoint format version " + std::to_string(version) + " is not supported (expected " +
                       std::to_string(kCheckpointFormatVersion) + ")");
  }
  std::ifstream bf(dir / "params.bin", std::ios::binary);
  if (!bf) throw DataError("checkpoint blob not found in " + dir.string());
  std::string bytes((std::istreambuf_iterator<char>(bf)), std::istreambuf_iterator<char>());
  if (bytes.size() != m.at("total_bytes").get<std::size_t>() || hash_hex(bytes) != m.at("digest").get<std::string>()) {
    throw DataError("checkpoint blob does not match its manifest digest");
  }

  CheckpointMeta meta;
  meta.family = envs::parse_family(m.at("family").get<std::string>());
  meta.config_hash = m.at("config_hash");
  meta.origin = m.value("origin", "");
  for (const auto& l : m.at("seed_lineage")) meta.lineage.push_back({l.at("label"), l.at("seed")});
  InputNorm norm{m.at("norm").at("state_mean"), m.at("norm").at("state_std"), m.at("norm").at("rtg_scale")};
  PromptDT<float> model(config_from_json(m.at("config")), norm, 0);

  const auto& entries = m.at("params");
  if (entries.size() != model.params().size()) throw DataError("checkpoint parameter list does not match config");
  for (std::size_t i = 0; i < entries.size(); ++i) {
    auto& p = model.params()[i];
    const auto& e = entries[i];
    if (e.at("name").get<std::string>() != p.name || e.at("shape").get<diff::Shape>() != p.value.shape()) {
      throw DataError("checkpoint parameter '" + e.at("name").get<std::string>() + "' does not match config");
    }
    std::size_t off = e.at("offset");
    if (off + p.value.size() * 4 > bytes.size()) throw DataError("checkpoint blob truncated at " + p.name);
    for (auto& v : p.value.data()) {
      std::uint32_t u = 0;
      for (int b = 0; b < 4; ++b) u |= std::uint32_t(static_cast<unsigned char>(bytes[off + b])) << (8 * b);
      v = std::bit_cast<float>(u);
      off += 4;
    }
  }
  return {std::move(model), std::move(meta)};
}

}  // namespace ptdt::dt
