#pragma once

// Run configuration: physics grid, model dimensions and training
// hyperparameters. Stored as an INI-style text file with [physics], [model]
// and [train] sections; every key can also be set individually by name
// (the CLI exposes each key as --<key>).

#include <filesystem>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "neurphy/model.hpp"
#include "neurphy/physics.hpp"
#include "neurphy/train.hpp"

namespace neurphy {

struct RunConfig {
  physics::GridConfig grid;
  ModelConfig model;
  TrainConfig train;
};

struct ConfigKey {
  std::string section;
  std::string name;
  std::string help;
};

/// Every recognised key, in file order.
const std::vector<ConfigKey>& config_keys();

/// Sets one key from its text form; throws kConfig for unknown keys or bad values.
void set_config_value(RunConfig& cfg, const std::string& key, const std::string& value);
std::string get_config_value(const RunConfig& cfg, const std::string& key);

/// Applies "key=value" text.
void apply_override(RunConfig& cfg, const std::string& assignment);

/// Applies the keys present in INI text on top of `cfg`.
void apply_config_text(RunConfig& cfg, const std::string& text);
RunConfig parse_config_text(const std::string& text);
RunConfig load_config_file(const std::filesystem::path& path);
std::string config_to_text(const RunConfig& cfg);

/// {"physics": {...}, "model": {...}, "train": {...}} with text values.
nlohmann::ordered_json config_to_json(const RunConfig& cfg);
RunConfig config_from_json(const nlohmann::ordered_json& j);

}  // namespace neurphy
