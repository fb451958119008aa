#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include "diffusion.hpp"
#include "network.hpp"
#include "risks.hpp"
#include "theory.hpp"

namespace coordiff {

enum class RiskKind { mse, logistic };

// Fully materialized scenario: every randomly drawn parameter (topology,
// step-sizes, missing probabilities, covariance parameters) is recorded as an
// explicit value, so runs never re-roll scenario randomness.
struct Scenario {
  std::string name = "custom";

  Topology topology;
  Eigen::MatrixXd A1, A2;
  Eigen::VectorXd mu, r;

  RiskKind kind = RiskKind::mse;
  int dim = 1;
  Eigen::VectorXd w_star;  // MSE minimizer; logistic generator weights

  // MSE
  std::vector<Eigen::MatrixXd> ru;  // analytic per-agent regressor covariance
  std::vector<double> ar1_pi;       // nonempty => AR(1) sampling with these parameters
  Eigen::VectorXd sigma_v2;

  // logistic
  double rho = 0.01;
  long calibration_size = 100000;
  std::uint64_t calibration_seed = 1;

  long horizon = 0;  // 0 = auto from the convergence-rate heuristic
  int runs = 200;
  std::uint64_t seed = 1;
  bool record_er = false;
  int threads = 1;

  int agents() const { return topology.agent_count; }
  void validate() const;
};

bool operator==(const Scenario& a, const Scenario& b);

// Scenario compiled into runnable form: network analysis, per-agent models,
// theory-oracle inputs, and the resolved horizon.
struct CompiledScenario {
  NetworkAnalysis net;
  std::vector<std::shared_ptr<AgentRisk>> models;
  std::vector<const AgentRisk*> model_ptrs;
  TheoryInputs theory_in;
  Eigen::MatrixXd hbar;
  long horizon = 0;
};

CompiledScenario compile(const Scenario& scenario);

struct LearningCurve {
  std::vector<double> msd_linear, msd_db;
  std::vector<double> er_linear, er_db;  // empty unless requested
  // Per-run regression slopes (dB per iteration) over the final 10% of
  // iterations.  Runs are independent, so these give an honest standard error
  // for the flatness check even though iterations are autocorrelated.
  std::vector<double> msd_window_slopes, er_window_slopes;
  int runs = 0;
  std::uint64_t seed = 0;
};

// Ensemble average over independent runs.  `force_full_gradient` reruns the
// scenario with all missing probabilities zeroed (the full-gradient
// reference); data substreams are shared with the masked run, so the
// comparison is paired.
LearningCurve monte_carlo(const Scenario& scenario, const CompiledScenario& compiled,
                          bool force_full_gradient = false);

// Mean over the final 10% of iterations, guarded by a flatness check
// (|regression slope| <= 0.01 dB per 1000 iterations, judged against the
// noise level).  `run_slopes`, when available, supplies the per-run window
// slopes used to estimate that noise level.  Throws NotConvergedError
// suggesting a longer horizon otherwise.
double steady_state_db(const std::vector<double>& curve_db,
                       const std::vector<double>* run_slopes = nullptr);

// First iteration after which the smoothed curve (moving average, window 50)
// stays within band_db of the steady-state value.
long measure_convergence_time(const std::vector<double>& curve_db, double steady_db,
                              double band_db = 1.0);

// Least-squares fit of the geometric decay factor of (curve - steady_state)
// over the transient, for comparison against the theoretical rate.
double fit_decay_rate(const std::vector<double>& curve_linear, double steady_linear);

}  // namespace coordiff
