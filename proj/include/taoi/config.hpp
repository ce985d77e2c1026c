#pragma once

#include <filesystem>
#include <string>

#include "json.hpp"

#include "taoi/engine.hpp"

namespace taoi {

/// Reads a JSON config. Keys may be nested objects or dotted paths
/// ("channel.cw"); absent keys keep their defaults. Unknown keys, wrong types
/// and out-of-range values raise ConfigError naming the key path.
SimConfig parse_config(const std::filesystem::path& path);
SimConfig parse_config_json(const nlohmann::json& doc);

/// Effective configuration as nested JSON (every key, defaults included).
nlohmann::json config_to_json(const SimConfig& config);

}  // namespace taoi
