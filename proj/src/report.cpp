#include "report.hpp"

#include <cmath>
#include <sstream>

#include <json.hpp>

#include "errors.hpp"

namespace coordiff {

namespace {

using nlohmann::json;

constexpr double kSimVsTheoryDb = 0.5;  // simulated steady state vs oracle

std::string regime_name(ComparisonRegime regime) {
  switch (regime) {
    case ComparisonRegime::coor_worse_bounded:
      return "coor_worse_bounded";
    case ComparisonRegime::mixed_bounded:
      return "mixed_bounded";
    case ComparisonRegime::coor_better_bounded:
      return "coor_better_bounded";
    default:
      return "indeterminate";
  }
}

json verdict(bool pass, double observed, double expected, double tolerance) {
  json v;
  v["pass"] = pass;
  v["observed"] = observed;
  v["expected"] = expected;
  v["tolerance"] = tolerance;
  return v;
}

json theory_section(const Scenario& scenario, const CompiledScenario& compiled) {
  const MsdResult msd = msd_theory(compiled.theory_in);
  const ErResult er = er_theory(compiled.theory_in);
  const RateResult rate = rates(compiled.theory_in);
  std::optional<Eigen::VectorXd> sigma_v2;
  if (scenario.kind == RiskKind::mse && scenario.ar1_pi.empty() && !scenario.ru.empty()) {
    bool uniform = true;
    for (const auto& ru : scenario.ru)
      if ((ru - scenario.ru[0]).cwiseAbs().maxCoeff() > 1e-12) uniform = false;
    if (uniform) sigma_v2 = scenario.sigma_v2;
  }
  const ComparisonDiagnostics diag = comparison_diagnostics(compiled.theory_in, sigma_v2);

  json out;
  out["msd_coor_db"] = to_db(msd.coor);
  out["msd_grad_db"] = to_db(msd.grad);
  out["msd_gap_db"] = to_db(msd.coor) - to_db(msd.grad);
  out["msd_coor"] = msd.coor;
  out["msd_grad"] = msd.grad;
  out["msd_gap"] = msd.gap;
  out["er_coor_db"] = to_db(er.coor);
  out["er_grad_db"] = to_db(er.grad);
  out["er_gap_db"] = to_db(er.coor) - to_db(er.grad);
  out["er_coor"] = er.coor;
  out["er_grad"] = er.grad;
  out["er_gap"] = er.gap;
  out["alpha_coor"] = rate.alpha_coor;
  out["alpha_grad"] = rate.alpha_grad;
  out["convergence_time_ratio"] = rate.time_ratio;
  if (rate.time_ratio_uniform_approx)
    out["convergence_time_ratio_uniform_approx"] = *rate.time_ratio_uniform_approx;
  out["alpha"] = diag.alpha;
  out["theta"] = diag.theta;
  out["uniform_costs"] = diag.uniform_costs;
  if (diag.regime) out["regime"] = regime_name(*diag.regime);
  if (diag.msd_gap_upper_bound) out["msd_gap_upper_bound"] = *diag.msd_gap_upper_bound;
  if (diag.mse_gap_upper_bound) out["mse_gap_upper_bound"] = *diag.mse_gap_upper_bound;
  if (diag.er_gap_uniform_costs) out["er_gap_uniform_costs"] = *diag.er_gap_uniform_costs;
  return out;
}

json complexity_section(const Scenario& scenario) {
  // Default per-entry costs of an MSE/logistic stochastic gradient: the inner
  // product plus the scaling amortize to about two multiplications and two
  // additions per entry.
  constexpr int kCm = 2, kCa = 2;
  json agents = json::array();
  for (int k = 0; k < scenario.agents(); ++k) {
    const ComplexityReport c =
        complexity(kCm, kCa, scenario.topology.degree(k), scenario.dim, scenario.r(k));
    json row;
    row["agent"] = k;
    row["mult_per_iter_grad"] = c.mult_per_iter_grad;
    row["mult_per_iter_coor"] = c.mult_per_iter_coor;
    row["add_per_iter_grad"] = c.add_per_iter_grad;
    row["add_per_iter_coor"] = c.add_per_iter_coor;
    row["mult_total_ratio"] = c.mult_total_ratio;
    row["add_total_ratio"] = c.add_total_ratio;
    agents.push_back(row);
  }
  return agents;
}

struct SimSummary {
  double msd_coor_db = 0.0, msd_grad_db = 0.0;
  double er_coor_db = 0.0, er_grad_db = 0.0;
  json section;
};

SimSummary summarize(const Scenario& scenario, const LearningCurve& coor,
                     const LearningCurve& grad) {
  SimSummary s;
  s.msd_coor_db = steady_state_db(coor.msd_db, &coor.msd_window_slopes);
  s.msd_grad_db = steady_state_db(grad.msd_db, &grad.msd_window_slopes);
  s.section["msd_coor_db"] = s.msd_coor_db;
  s.section["msd_grad_db"] = s.msd_grad_db;
  s.section["msd_gap_db"] = s.msd_coor_db - s.msd_grad_db;
  if (scenario.record_er) {
    s.er_coor_db = steady_state_db(coor.er_db, &coor.er_window_slopes);
    s.er_grad_db = steady_state_db(grad.er_db, &grad.er_window_slopes);
    s.section["er_coor_db"] = s.er_coor_db;
    s.section["er_grad_db"] = s.er_grad_db;
    s.section["er_gap_db"] = s.er_coor_db - s.er_grad_db;
  }
  return s;
}

bool all_pass(const json& verdicts) {
  for (const auto& item : verdicts.items())
    if (!item.value().at("pass").get<bool>()) return false;
  return true;
}

}  // namespace

std::string curve_to_csv(const LearningCurve& curve) {
  std::ostringstream out;
  out.precision(12);
  const bool er = !curve.er_db.empty();
  out << (er ? "iteration,msd_db,er_db\n" : "iteration,msd_db\n");
  for (std::size_t i = 0; i < curve.msd_db.size(); ++i) {
    out << i << ',' << curve.msd_db[i];
    if (er) out << ',' << curve.er_db[i];
    out << '\n';
  }
  return out.str();
}

std::string theory_report_json(const Scenario& scenario, const CompiledScenario& compiled) {
  json doc;
  doc["scenario"] = scenario.name;
  doc["agents"] = scenario.agents();
  doc["dim"] = scenario.dim;
  doc["horizon"] = compiled.horizon;
  doc["theory"] = theory_section(scenario, compiled);
  doc["complexity"] = complexity_section(scenario);
  return doc.dump(2) + "\n";
}

CompareOutcome compare_report(const Scenario& scenario, const CompiledScenario& compiled) {
  CompareOutcome out;
  out.coor = monte_carlo(scenario, compiled);
  out.grad = monte_carlo(scenario, compiled, /*force_full_gradient=*/true);
  const json theory = theory_section(scenario, compiled);
  const SimSummary sim = summarize(scenario, out.coor, out.grad);

  json verdicts;
  verdicts["msd_coor_matches_theory"] =
      verdict(std::abs(sim.msd_coor_db - theory.at("msd_coor_db").get<double>()) <= kSimVsTheoryDb,
              sim.msd_coor_db, theory.at("msd_coor_db").get<double>(), kSimVsTheoryDb);
  verdicts["msd_grad_matches_theory"] =
      verdict(std::abs(sim.msd_grad_db - theory.at("msd_grad_db").get<double>()) <= kSimVsTheoryDb,
              sim.msd_grad_db, theory.at("msd_grad_db").get<double>(), kSimVsTheoryDb);
  if (scenario.record_er) {
    verdicts["er_coor_matches_theory"] =
        verdict(std::abs(sim.er_coor_db - theory.at("er_coor_db").get<double>()) <= kSimVsTheoryDb,
                sim.er_coor_db, theory.at("er_coor_db").get<double>(), kSimVsTheoryDb);
    verdicts["er_grad_matches_theory"] =
        verdict(std::abs(sim.er_grad_db - theory.at("er_grad_db").get<double>()) <= kSimVsTheoryDb,
                sim.er_grad_db, theory.at("er_grad_db").get<double>(), kSimVsTheoryDb);
  }

  json doc;
  doc["scenario"] = scenario.name;
  doc["seed"] = scenario.seed;
  doc["runs"] = scenario.runs;
  doc["horizon"] = compiled.horizon;
  doc["theory"] = theory;
  doc["simulated"] = sim.section;
  doc["verdicts"] = verdicts;
  out.within_tolerance = all_pass(verdicts);
  doc["passed"] = out.within_tolerance;
  out.report_json = doc.dump(2) + "\n";
  return out;
}

ReproduceOutcome reproduce_preset(const Scenario& scenario) {
  const CompiledScenario compiled = compile(scenario);
  ReproduceOutcome out;
  out.coor = monte_carlo(scenario, compiled);
  out.grad = monte_carlo(scenario, compiled, /*force_full_gradient=*/true);
  const json theory = theory_section(scenario, compiled);
  const SimSummary sim = summarize(scenario, out.coor, out.grad);
  const double th_msd_gap = theory.at("msd_gap_db").get<double>();
  const double th_er_gap = theory.at("er_gap_db").get<double>();
  const double sim_msd_gap = sim.msd_coor_db - sim.msd_grad_db;

  json verdicts;
  json reference;  // externally reported values, where parameter-exact
  const std::string& id = scenario.name;

  verdicts["msd_coor_matches_theory"] =
      verdict(std::abs(sim.msd_coor_db - theory.at("msd_coor_db").get<double>()) <= kSimVsTheoryDb,
              sim.msd_coor_db, theory.at("msd_coor_db").get<double>(), kSimVsTheoryDb);
  verdicts["msd_grad_matches_theory"] =
      verdict(std::abs(sim.msd_grad_db - theory.at("msd_grad_db").get<double>()) <= kSimVsTheoryDb,
              sim.msd_grad_db, theory.at("msd_grad_db").get<double>(), kSimVsTheoryDb);

  if (id == "two_agent_a" || id == "two_agent_b") {
    const double printed_gap = (id == "two_agent_a") ? -0.41 : 1.49;
    reference["msd_gap_db"] = printed_gap;
    verdicts["theory_gap_matches_reference"] =
        verdict(std::abs(th_msd_gap - printed_gap) <= 0.02, th_msd_gap, printed_gap, 0.02);
    const double sim_tol = (id == "two_agent_a") ? 0.3 : 0.4;
    verdicts["sim_gap_matches_theory"] =
        verdict(std::abs(sim_msd_gap - th_msd_gap) <= sim_tol, sim_msd_gap, th_msd_gap, sim_tol);
    // uniform missing probabilities: the two excess risks coincide exactly
    const double th_er_rel =
        std::abs(theory.at("er_gap").get<double>()) / theory.at("er_coor").get<double>();
    verdicts["theory_er_gap_zero"] = verdict(th_er_rel <= 1e-10, th_er_rel, 0.0, 1e-10);
    const double sim_er_gap = sim.er_coor_db - sim.er_grad_db;
    verdicts["sim_er_gap_small"] = verdict(std::abs(sim_er_gap) <= 0.2, sim_er_gap, 0.0, 0.2);
  } else if (id == "mse_white") {
    const double th_rel =
        std::abs(theory.at("msd_gap").get<double>()) / theory.at("msd_coor").get<double>();
    verdicts["theory_gap_zero"] = verdict(th_rel <= 1e-12, th_rel, 0.0, 1e-12);
    verdicts["sim_gap_small"] = verdict(std::abs(sim_msd_gap) <= 0.3, sim_msd_gap, 0.0, 0.3);
    // decay-rate check against the theoretical geometric rate
    const double alpha_fit =
        fit_decay_rate(out.coor.msd_linear, std::pow(10.0, sim.msd_coor_db / 10.0));
    const double alpha_th = theory.at("alpha_coor").get<double>();
    const double slope_ratio = std::log(alpha_fit) / std::log(alpha_th);
    verdicts["decay_rate_matches_theory"] =
        verdict(std::abs(slope_ratio - 1.0) <= 0.15, slope_ratio, 1.0, 0.15);
    // convergence-time ratio under uniform r = 0.5 (theory: 2.0)
    const long t_coor = measure_convergence_time(out.coor.msd_db, sim.msd_coor_db);
    const long t_grad = measure_convergence_time(out.grad.msd_db, sim.msd_grad_db);
    const double time_ratio = static_cast<double>(t_coor) / static_cast<double>(t_grad);
    verdicts["convergence_time_ratio_in_range"] =
        verdict(time_ratio >= 1.6 && time_ratio <= 2.4, time_ratio, 2.0, 0.4);
  } else if (id == "mse_n100_smallr" || id == "mse_n25_smallr") {
    verdicts["theory_gap_small"] =
        verdict(std::abs(th_msd_gap) <= 0.3, th_msd_gap, 0.0, 0.3);
  } else if (id == "logistic_uniform") {
    const double th_er_rel =
        std::abs(theory.at("er_gap").get<double>()) / theory.at("er_coor").get<double>();
    verdicts["theory_er_gap_zero"] = verdict(th_er_rel <= 1e-10, th_er_rel, 0.0, 1e-10);
    const double sim_er_gap = sim.er_coor_db - sim.er_grad_db;
    verdicts["sim_er_gap_small"] = verdict(std::abs(sim_er_gap) <= 0.2, sim_er_gap, 0.0, 0.2);
    verdicts["er_coor_matches_theory"] =
        verdict(std::abs(sim.er_coor_db - theory.at("er_coor_db").get<double>()) <= kSimVsTheoryDb,
                sim.er_coor_db, theory.at("er_coor_db").get<double>(), kSimVsTheoryDb);
  } else if (id == "logistic_theta_neg" || id == "logistic_theta_pos") {
    const double theta = theory.at("theta").get<double>();
    const bool sign_ok = (id == "logistic_theta_neg") ? theta < 0.0 : theta > 0.0;
    verdicts["theta_sign"] = verdict(sign_ok, theta, 0.0, 0.0);
    const double sim_er_gap = sim.er_coor_db - sim.er_grad_db;
    verdicts["sim_er_gap_matches_theory"] =
        verdict(std::abs(sim_er_gap - th_er_gap) <= 0.3, sim_er_gap, th_er_gap, 0.3);
    // cross-check: with identical costs the gap collapses to (theta/4) Tr(G)
    if (theory.contains("er_gap_uniform_costs")) {
      const double closed_form = theory.at("er_gap_uniform_costs").get<double>();
      const double gap_linear = theory.at("er_gap").get<double>();
      const double rel = std::abs(closed_form - gap_linear) /
                         std::max(std::abs(gap_linear), 1e-300);
      verdicts["er_gap_closed_form_consistent"] = verdict(rel <= 1e-8, rel, 0.0, 1e-8);
    }
    verdicts["er_coor_matches_theory"] =
        verdict(std::abs(sim.er_coor_db - theory.at("er_coor_db").get<double>()) <= kSimVsTheoryDb,
                sim.er_coor_db, theory.at("er_coor_db").get<double>(), kSimVsTheoryDb);
  }

  json doc;
  doc["preset"] = id;
  doc["seed"] = scenario.seed;
  doc["runs"] = scenario.runs;
  doc["horizon"] = compiled.horizon;
  doc["theory"] = theory;
  if (!reference.is_null()) doc["reference"] = reference;
  doc["simulated"] = sim.section;
  doc["verdicts"] = verdicts;
  out.passed = all_pass(verdicts);
  doc["passed"] = out.passed;
  out.report_json = doc.dump(2) + "\n";
  return out;
}

}  // namespace coordiff
