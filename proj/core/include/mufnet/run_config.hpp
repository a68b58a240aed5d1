#pragma once

#include <cstddef>
#include <string>
#include <string_view>
#include <vector>

#include "mufnet/training.hpp"

namespace mufnet {

// Everything a CLI run needs. Keys in a config file use the names below.
//   model:     dim heads alpha beta gamma mlp_hidden variant attention_residual
//   optimizer: lr clip_lr weight_decay beta1 beta2 eps frozen_groups
//   loop:      epochs batch_size seed
//   io:        provider data features out
struct RunConfig {
  TrainConfig train;
  // "stub", "store", or empty to pick "store" when a feature file is given.
  std::string provider;
  std::string data;
  std::string features;
  std::string out = "out";

  std::string resolved_provider() const;
  // Throws ConfigError on the first violated invariant.
  void validate() const;
};

struct ConfigEntry {
  std::string key;
  std::string value;
  std::size_t line = 0;
};

// "key = value" per line; '#' starts a comment; blank lines are ignored.
// Throws ParseError for lines without '=' or with an empty key, and for a key
// given twice.
std::vector<ConfigEntry> parse_config_text(std::string_view text);

// Throws ConfigError for an unknown key or an unparsable value.
void apply_setting(RunConfig& cfg, std::string_view key, std::string_view value);

// Applies every entry; errors name the line.
void apply_entries(RunConfig& cfg, const std::vector<ConfigEntry>& entries);

// Reads and applies a config file on top of `base`. Does not validate, so
// flags may still fix things up afterwards.
RunConfig load_run_config(const std::string& path, RunConfig base = {});

std::vector<std::string> config_keys();

// Writes every key, one per line; parse_config_text + apply_entries on the
// result reproduces `cfg`.
std::string format_run_config(const RunConfig& cfg);

}  // namespace mufnet
