#pragma once

#include <string>

#include <json.hpp>

namespace ptdt::cli {

// Exit codes: 0 success, 1 runtime failure (JSON error on stderr), 2 usage.
int run(int argc, char** argv);

nlohmann::json toml_to_json(const std::string& text);
// Top-level scalars first, then one [section] per object.
std::string json_to_toml(const nlohmann::json& j);

}  // namespace ptdt::cli
