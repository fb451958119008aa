#include "coordiff/coordiff.h"

#include <cstdlib>
#include <cstring>
#include <string>

#include "config.hpp"
#include "errors.hpp"
#include "experiments.hpp"
#include "presets.hpp"
#include "report.hpp"

using namespace coordiff;

struct cd_scenario {
  Scenario scenario;
};

namespace {

thread_local std::string g_last_error = "no error";

char* dup_string(const std::string& text) {
  char* out = static_cast<char*>(std::malloc(text.size() + 1));
  if (out) std::memcpy(out, text.c_str(), text.size() + 1);
  return out;
}

cd_status fill(char** slot, const std::string& text) {
  if (!slot) return CD_OK;
  *slot = dup_string(text);
  if (!*slot) {
    g_last_error = "out of memory";
    return CD_ERR_INTERNAL;
  }
  return CD_OK;
}

template <typename Fn>
cd_status guarded(Fn&& fn) {
  try {
    return fn();
  } catch (const IoError& e) {
    g_last_error = e.what();
    return CD_ERR_IO;
  } catch (const NotConvergedError& e) {
    g_last_error = e.what();
    return CD_ERR_NOT_CONVERGED;
  } catch (const DivergenceError& e) {
    g_last_error = e.what();
    return CD_ERR_DIVERGED;
  } catch (const ValidationError& e) {
    g_last_error = e.what();
    return CD_ERR_VALIDATION;
  } catch (const std::exception& e) {
    g_last_error = e.what();
    return CD_ERR_INTERNAL;
  } catch (...) {
    g_last_error = "unknown error";
    return CD_ERR_INTERNAL;
  }
}

cd_status require(const void* ptr, const char* what) {
  if (ptr) return CD_OK;
  g_last_error = std::string("null ") + what;
  return CD_ERR_VALIDATION;
}

}  // namespace

extern "C" {

const char* cd_last_error(void) { return g_last_error.c_str(); }

cd_status cd_scenario_from_file(const char* path, cd_scenario** out) {
  if (require(path, "path") != CD_OK || require(out, "output pointer") != CD_OK)
    return CD_ERR_VALIDATION;
  return guarded([&] {
    *out = new cd_scenario{parse_config_file(path)};
    return CD_OK;
  });
}

cd_status cd_scenario_from_string(const char* json_text, cd_scenario** out) {
  if (require(json_text, "config text") != CD_OK || require(out, "output pointer") != CD_OK)
    return CD_ERR_VALIDATION;
  return guarded([&] {
    *out = new cd_scenario{parse_config(json_text)};
    return CD_OK;
  });
}

cd_status cd_scenario_from_preset(const char* preset_id, cd_scenario** out) {
  if (require(preset_id, "preset id") != CD_OK || require(out, "output pointer") != CD_OK)
    return CD_ERR_VALIDATION;
  return guarded([&] {
    *out = new cd_scenario{preset_scenario(preset_id)};
    return CD_OK;
  });
}

void cd_scenario_free(cd_scenario* scenario) { delete scenario; }

cd_status cd_scenario_set_runs(cd_scenario* scenario, int runs) {
  if (require(scenario, "scenario") != CD_OK) return CD_ERR_VALIDATION;
  if (runs < 1) {
    g_last_error = "runs must be positive";
    return CD_ERR_VALIDATION;
  }
  scenario->scenario.runs = runs;
  return CD_OK;
}

cd_status cd_scenario_set_seed(cd_scenario* scenario, uint64_t seed) {
  if (require(scenario, "scenario") != CD_OK) return CD_ERR_VALIDATION;
  scenario->scenario.seed = seed;
  return CD_OK;
}

cd_status cd_scenario_set_threads(cd_scenario* scenario, int threads) {
  if (require(scenario, "scenario") != CD_OK) return CD_ERR_VALIDATION;
  if (threads < 1) {
    g_last_error = "threads must be positive";
    return CD_ERR_VALIDATION;
  }
  scenario->scenario.threads = threads;
  return CD_OK;
}

cd_status cd_scenario_to_json(const cd_scenario* scenario, char** json_out) {
  if (require(scenario, "scenario") != CD_OK || require(json_out, "output pointer") != CD_OK)
    return CD_ERR_VALIDATION;
  return guarded([&] { return fill(json_out, serialize_scenario(scenario->scenario)); });
}

cd_status cd_simulate_csv(const cd_scenario* scenario, int full_gradient, char** csv_out) {
  if (require(scenario, "scenario") != CD_OK || require(csv_out, "output pointer") != CD_OK)
    return CD_ERR_VALIDATION;
  return guarded([&] {
    const CompiledScenario compiled = compile(scenario->scenario);
    const LearningCurve curve =
        monte_carlo(scenario->scenario, compiled, full_gradient != 0);
    return fill(csv_out, curve_to_csv(curve));
  });
}

cd_status cd_theory_json(const cd_scenario* scenario, char** json_out) {
  if (require(scenario, "scenario") != CD_OK || require(json_out, "output pointer") != CD_OK)
    return CD_ERR_VALIDATION;
  return guarded([&] {
    const CompiledScenario compiled = compile(scenario->scenario);
    return fill(json_out, theory_report_json(scenario->scenario, compiled));
  });
}

cd_status cd_compare_json(const cd_scenario* scenario, char** report_out, char** coor_csv_out,
                          char** grad_csv_out) {
  if (require(scenario, "scenario") != CD_OK || require(report_out, "output pointer") != CD_OK)
    return CD_ERR_VALIDATION;
  return guarded([&] {
    const CompiledScenario compiled = compile(scenario->scenario);
    const CompareOutcome outcome = compare_report(scenario->scenario, compiled);
    cd_status status = fill(report_out, outcome.report_json);
    if (status != CD_OK) return status;
    status = fill(coor_csv_out, curve_to_csv(outcome.coor));
    if (status != CD_OK) return status;
    status = fill(grad_csv_out, curve_to_csv(outcome.grad));
    if (status != CD_OK) return status;
    if (!outcome.within_tolerance) {
      g_last_error = "comparison report contains failing verdicts";
      return CD_ERR_TOLERANCE;
    }
    return CD_OK;
  });
}

cd_status cd_reproduce_json(const cd_scenario* scenario, char** report_out, char** coor_csv_out,
                            char** grad_csv_out) {
  if (require(scenario, "scenario") != CD_OK || require(report_out, "output pointer") != CD_OK)
    return CD_ERR_VALIDATION;
  return guarded([&] {
    if (!is_preset(scenario->scenario.name))
      throw ValidationError("reproduce requires a preset scenario; '" + scenario->scenario.name +
                            "' is not a known preset id");
    const ReproduceOutcome outcome = reproduce_preset(scenario->scenario);
    cd_status status = fill(report_out, outcome.report_json);
    if (status != CD_OK) return status;
    status = fill(coor_csv_out, curve_to_csv(outcome.coor));
    if (status != CD_OK) return status;
    status = fill(grad_csv_out, curve_to_csv(outcome.grad));
    if (status != CD_OK) return status;
    if (!outcome.passed) {
      g_last_error = "reproduction report contains failing verdicts";
      return CD_ERR_TOLERANCE;
    }
    return CD_OK;
  });
}

void cd_string_free(char* text) { std::free(text); }

}  // extern "C"
