#pragma once

#include <string>

#include "experiments.hpp"

namespace coordiff {

// CSV with header `iteration,msd_db,er_db`; the er column appears only when
// the curve recorded excess risk.
std::string curve_to_csv(const LearningCurve& curve);

// Closed-form predictions for a scenario as a JSON document: steady states,
// rates, comparison diagnostics, and per-agent operation counts.
std::string theory_report_json(const Scenario& scenario, const CompiledScenario& compiled);

struct CompareOutcome {
  std::string report_json;
  bool within_tolerance = false;
  LearningCurve coor, grad;
};

// Runs the masked and full-gradient ensembles and checks the simulated steady
// states against the theory oracle (0.5 dB).
CompareOutcome compare_report(const Scenario& scenario, const CompiledScenario& compiled);

struct ReproduceOutcome {
  std::string report_json;
  bool passed = false;
  LearningCurve coor, grad;
};

// End-to-end reproduction of a preset with per-preset tolerance verdicts.
ReproduceOutcome reproduce_preset(const Scenario& scenario);

}  // namespace coordiff
