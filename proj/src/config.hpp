#pragma once

#include <string>

#include "experiments.hpp"

namespace coordiff {

// Parses a JSON scenario document (schema documented in the README) into a
// fully materialized Scenario: every random parameter spec is drawn once here
// and recorded as explicit values.  Unknown keys are rejected; syntax errors
// report line and column; semantic errors name the offending field.
Scenario parse_config(const std::string& text);
Scenario parse_config_file(const std::string& path);

// Serializes with all draws explicit, so serialize -> parse round-trips to an
// equal Scenario.
std::string serialize_scenario(const Scenario& scenario);

}  // namespace coordiff
