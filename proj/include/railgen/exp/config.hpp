#pragma once

#include <set>
#include <string>
#include <vector>

#include "railgen/core/config.hpp"

namespace railgen::exp {

// Every knob the pipeline reads, with desk-scale defaults.
KvConfig default_config();

// Overrides for a named scale. "desk" is the default_config itself;
// "paper" switches to full-size training settings.
void apply_scale_preset(KvConfig& cfg, const std::string& scale);

// Returns one "<field>: <problem>" line per violated constraint.
std::vector<std::string> validate_config(const KvConfig& cfg);

std::vector<std::string> split_list(const std::string& csv);
std::set<int> parse_id_set(const std::string& csv);

} // namespace railgen::exp
