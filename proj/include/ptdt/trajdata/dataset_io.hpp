#pragma once

#include <filesystem>
#include <string>

#include "ptdt/trajdata/episode.hpp"

namespace ptdt::traj {

inline constexpr int kDatasetFormatVersion = 1;

// JSON Lines, one episode per line. Reals are written in shortest
// round-trip form, so save -> load reproduces every double exactly.
std::string episode_to_jsonl(const Episode& ep, const std::string& config_hash);
Episode episode_from_jsonl(const std::string& line, std::size_t line_no);

void save_dataset(const std::filesystem::path& path, const EpisodeSet& set, const std::string& config_hash = "");
// Throws DataError if the file cannot be opened, ParseError (with line
// number) on a malformed record. An empty file is an empty set.
EpisodeSet load_dataset(const std::filesystem::path& path);

}  // namespace ptdt::traj
