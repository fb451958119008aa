#pragma once

#include <string>
#include <vector>

#include "experiments.hpp"

namespace coordiff {

// Built-in scenarios with all parameter draws fixed, so repeated runs never
// re-roll scenario randomness.
const std::vector<std::string>& preset_ids();
bool is_preset(const std::string& id);
Scenario preset_scenario(const std::string& id);

}  // namespace coordiff
