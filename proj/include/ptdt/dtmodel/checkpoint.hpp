#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "ptdt/dtmodel/model.hpp"
#include "ptdt/envs/task.hpp"

namespace ptdt::dt {

inline constexpr int kCheckpointFormatVersion = 1;

struct SeedLineage {
  std::string label;
  std::uint64_t seed = 0;
  friend bool operator==(const SeedLineage&, const SeedLineage&) = default;
};

struct CheckpointMeta {
  envs::Family family = envs::Family::PointDir2d;
  std::string config_hash;
  std::vector<SeedLineage> lineage;
  // Free-form description of how the weights were produced.
  std::string origin;
  friend bool operator==(const CheckpointMeta&, const CheckpointMeta&) = default;
};

struct ModelCheckpoint {
  PromptDT<float> model;
  CheckpointMeta meta;
};

// Hex FNV-1a over the little-endian parameter blob.
std::string parameter_digest(const PromptDT<float>& model);

// Writes <dir>/manifest.json and <dir>/params.bin.
void save_checkpoint(const std::filesystem::path& dir, const PromptDT<float>& model, const CheckpointMeta& meta);

// Throws VersionError on a format mismatch, DataError on missing files or a
// blob that disagrees with the manifest.
ModelCheckpoint load_checkpoint(const std::filesystem::path& dir);

}  // namespace ptdt::dt
