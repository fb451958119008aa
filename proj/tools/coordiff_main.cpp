// Command-line front end: scenario configs in, CSV curves and JSON reports
// out.  Talks to the library exclusively through the C API.
#include <cstdint>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <memory>
#include <string>

#include <CLI11.hpp>

#include "coordiff/coordiff.h"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitError = 1;      // validation / IO / usage problems
constexpr int kExitTolerance = 2;  // report produced, but a verdict failed

struct ManagedString {
  char* value = nullptr;
  ~ManagedString() { cd_string_free(value); }
  char** slot() { return &value; }
  std::string str() const { return value ? value : ""; }
};

struct CommonOptions {
  std::string config, preset, out, format;
  int runs = 0;
  std::uint64_t seed = 0;
  bool seed_set = false;
  int threads = 0;
};

void add_common_flags(CLI::App* cmd, CommonOptions& opt, bool presets_only) {
  if (!presets_only)
    cmd->add_option("--config", opt.config, "path to a JSON scenario config");
  cmd->add_option("--preset", opt.preset, "built-in preset id");
  cmd->add_option("--runs", opt.runs, "override the number of independent runs");
  cmd->add_option("--seed", opt.seed, "override the master seed")
      ->each([&opt](const std::string&) { opt.seed_set = true; });
  cmd->add_option("--out", opt.out, "output path (stdout when omitted)");
  cmd->add_option("--format", opt.format, "output format: csv or report")
      ->check(CLI::IsMember({"csv", "report"}));
  cmd->add_option("--threads", opt.threads,
                  "worker threads (falls back to COORDIFF_THREADS)");
}

int fail(cd_status status) {
  std::cerr << "error: " << cd_last_error() << "\n";
  return status == CD_ERR_TOLERANCE ? kExitTolerance : kExitError;
}

using ScenarioPtr = std::unique_ptr<cd_scenario, decltype(&cd_scenario_free)>;

int load_scenario(const CommonOptions& opt, ScenarioPtr& scenario) {
  if (opt.config.empty() == opt.preset.empty()) {
    std::cerr << "error: exactly one of --config and --preset is required\n";
    return kExitError;
  }
  cd_scenario* raw = nullptr;
  const cd_status status = opt.config.empty()
                               ? cd_scenario_from_preset(opt.preset.c_str(), &raw)
                               : cd_scenario_from_file(opt.config.c_str(), &raw);
  if (status != CD_OK) return fail(status);
  scenario.reset(raw);

  if (opt.runs > 0) {
    const cd_status rc = cd_scenario_set_runs(scenario.get(), opt.runs);
    if (rc != CD_OK) return fail(rc);
  }
  if (opt.seed_set) {
    const cd_status rc = cd_scenario_set_seed(scenario.get(), opt.seed);
    if (rc != CD_OK) return fail(rc);
  }
  int threads = opt.threads;
  if (threads <= 0) {
    if (const char* env = std::getenv("COORDIFF_THREADS")) threads = std::atoi(env);
  }
  if (threads > 0) {
    const cd_status rc = cd_scenario_set_threads(scenario.get(), threads);
    if (rc != CD_OK) return fail(rc);
  }
  return kExitOk;
}

int write_text(const std::string& path, const std::string& text) {
  if (path.empty()) {
    std::cout << text;
    return kExitOk;
  }
  std::ofstream out(path);
  if (!out) {
    std::cerr << "error: cannot write to " << path << "\n";
    return kExitError;
  }
  out << text;
  return kExitOk;
}

// Curves from compare/reproduce land next to the report: OUT.coor.csv and
// OUT.grad.csv.
int write_report_bundle(const CommonOptions& opt, const ManagedString& report,
                        const ManagedString& coor, const ManagedString& grad) {
  const int rc = write_text(opt.out, report.str());
  if (rc != kExitOk) return rc;
  if (!opt.out.empty()) {
    const int rc_coor = write_text(opt.out + ".coor.csv", coor.str());
    if (rc_coor != kExitOk) return rc_coor;
    const int rc_grad = write_text(opt.out + ".grad.csv", grad.str());
    if (rc_grad != kExitOk) return rc_grad;
  }
  return kExitOk;
}

int run_simulate(const CommonOptions& opt) {
  ScenarioPtr scenario(nullptr, cd_scenario_free);
  if (const int rc = load_scenario(opt, scenario); rc != kExitOk) return rc;
  ManagedString csv;
  const cd_status status = cd_simulate_csv(scenario.get(), 0, csv.slot());
  if (status != CD_OK) return fail(status);
  return write_text(opt.out, csv.str());
}

int run_theory(const CommonOptions& opt) {
  ScenarioPtr scenario(nullptr, cd_scenario_free);
  if (const int rc = load_scenario(opt, scenario); rc != kExitOk) return rc;
  ManagedString report;
  const cd_status status = cd_theory_json(scenario.get(), report.slot());
  if (status != CD_OK) return fail(status);
  return write_text(opt.out, report.str());
}

int run_compare(const CommonOptions& opt) {
  ScenarioPtr scenario(nullptr, cd_scenario_free);
  if (const int rc = load_scenario(opt, scenario); rc != kExitOk) return rc;
  ManagedString report, coor, grad;
  const cd_status status =
      cd_compare_json(scenario.get(), report.slot(), coor.slot(), grad.slot());
  if (status != CD_OK && status != CD_ERR_TOLERANCE) return fail(status);
  const int rc = write_report_bundle(opt, report, coor, grad);
  if (rc != kExitOk) return rc;
  if (status == CD_ERR_TOLERANCE) {
    std::cerr << "error: " << cd_last_error() << "\n";
    return kExitTolerance;
  }
  return kExitOk;
}

int run_reproduce(const CommonOptions& opt) {
  ScenarioPtr scenario(nullptr, cd_scenario_free);
  if (const int rc = load_scenario(opt, scenario); rc != kExitOk) return rc;
  ManagedString report, coor, grad;
  const cd_status status =
      cd_reproduce_json(scenario.get(), report.slot(), coor.slot(), grad.slot());
  if (status != CD_OK && status != CD_ERR_TOLERANCE) return fail(status);
  const int rc = write_report_bundle(opt, report, coor, grad);
  if (rc != kExitOk) return rc;
  if (status == CD_ERR_TOLERANCE) {
    std::cerr << "error: " << cd_last_error() << "\n";
    return kExitTolerance;
  }
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Coordinate-descent diffusion learning over networked agents"};
  app.require_subcommand(1);

  CommonOptions sim_opt, theory_opt, compare_opt, repro_opt;
  CLI::App* simulate =
      app.add_subcommand("simulate", "run the ensemble and write the learning-curve CSV");
  add_common_flags(simulate, sim_opt, false);
  CLI::App* theory =
      app.add_subcommand("theory", "write the closed-form prediction report (JSON)");
  add_common_flags(theory, theory_opt, false);
  CLI::App* compare =
      app.add_subcommand("compare", "simulate masked and full-gradient cases, verdicts vs theory");
  add_common_flags(compare, compare_opt, false);
  CLI::App* reproduce =
      app.add_subcommand("reproduce", "run a built-in preset end-to-end with tolerance verdicts");
  add_common_flags(reproduce, repro_opt, true);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? kExitOk : kExitError;
  }

  if (simulate->parsed()) return run_simulate(sim_opt);
  if (theory->parsed()) return run_theory(theory_opt);
  if (compare->parsed()) return run_compare(compare_opt);
  if (reproduce->parsed()) return run_reproduce(repro_opt);
  return kExitError;
}
