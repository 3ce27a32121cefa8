#pragma once

#include <map>
#include <string>

#include "strange/trainer/config.hpp"

namespace strange::cli {

/// key -> value overrides, keys qualified by section ("train.seed").
using Overrides = std::map<std::string, std::string>;

/// Parses the flat config format:
///
///   # comment
///   [env]
///   kind = matrix_game
///   [train]
///   seed = 3
///
/// Sections are env, algo and train. Defaults come from the resolved
/// env.kind; `overrides` are applied after the file. Unknown sections or
/// keys, duplicates, malformed lines and out-of-range values throw
/// ConfigError with the line number. Unless set explicitly,
/// algo.use_exploration_q is true exactly for exploration = sim.
trainer::TrainConfig parse_config_text(const std::string& text, const Overrides& overrides = {});
/// Same as parse_config_text on the file's contents; IoError when unreadable.
trainer::TrainConfig parse_config(const std::string& path, const Overrides& overrides = {});
/// Every key, in a form that parses back to an identical config.
std::string serialize_config(const trainer::TrainConfig& config);

/// "qmix+sim" style algorithm shorthand to overrides.
Overrides algo_overrides(const std::string& shorthand);

/// Equality over every serialized key.
bool same_config(const trainer::TrainConfig& a, const trainer::TrainConfig& b);

}  // namespace strange::cli
