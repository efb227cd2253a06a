#pragma once

#include <cstddef>
#include <string>
#include <utility>
#include <vector>

#include "kcgn/training.hpp"

namespace kcgn {

/// One documented TrainConfig key.
struct ConfigKey {
  std::string name;
  std::string default_value;
  std::string description;
};

/// Every TrainConfig key in canonical order, with its default.
const std::vector<ConfigKey>& train_config_keys();

/// Ordered `key, value` pairs for a config. Doubles are printed in their
/// shortest round-trip form, so parsing the text back reproduces the config
/// exactly.
std::vector<std::pair<std::string, std::string>> config_entries(const TrainConfig& config);

/// Sets one key from its text form. Throws ConfigError on unknown keys or
/// unparseable values.
void set_config_value(TrainConfig& config, const std::string& key, const std::string& value);

/// `key = value` line of a flat text file.
struct KeyValue {
  std::string key;
  std::string value;
  std::size_t line = 0;
};

/// Parses flat `key = value` text. Blank lines and `#` comments are skipped;
/// duplicate keys and lines without `=` are errors.
std::vector<KeyValue> parse_key_values(const std::string& text, const std::string& source);

std::vector<std::string> parse_ablation_list(const std::string& text);
void apply_ablation(Ablation& ablation, const std::string& name);
std::string format_ablation(const Ablation& ablation);

/// A `kcgn train` run: the prepared bundle, the output directory and the
/// training hyper-parameters.
struct RunConfig {
  std::string bundle;
  std::string output;
  TrainConfig train;
};

/// Keys a run config must name explicitly.
const std::vector<std::string>& required_run_keys();

/// Parses a run config. Missing required keys produce one ConfigError that
/// lists them together with the table of defaulted keys.
RunConfig parse_run_config(const std::string& text, const std::string& source = "config");
RunConfig load_run_config(const std::string& path);

/// Serialized config block, one `key = value` per line.
std::string format_config(const TrainConfig& config);

/// Commented template listing every key and its default.
std::string default_config_text();

}  // namespace kcgn
