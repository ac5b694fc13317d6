#pragma once

// Flat "key: value" configuration files. One entry per line, '#' starts a
// comment. `env` and `method` are required; everything else has a default.

#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "mep/trainer.hpp"

namespace mep {

using ConfigOverrides = std::map<std::string, std::string>;

// File values are applied first, then overrides. Unknown keys, malformed
// values and missing required keys raise Error naming the key.
TrainConfig parse_config_text(const std::string& text, const ConfigOverrides& overrides = {});
TrainConfig parse_config(const std::filesystem::path& path, const ConfigOverrides& overrides = {});

// Canonical text form (all keys, fixed order); parse_config_text round-trips it.
std::string config_to_text(const TrainConfig& config);

const std::vector<std::string>& config_keys();

}  // namespace mep
