#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <functional>
#include <random>
#include <vector>

#include "network.hpp"
#include "risks.hpp"

namespace coordiff {

// Diagonal of the Bernoulli masking matrix for one agent and iteration.
struct Mask {
  Eigen::VectorXd indicator;  // entries exactly 0 or 1
};

// Each entry is zero with probability r, independently.  Throws
// ValidationError unless 0 <= r < 1.
Mask sample_mask(double r, int dim, std::mt19937_64& mask_stream);

// Per-iteration observation handed to an optional trace callback: the masks,
// the stacked gradient noise evaluated at the combined iterates, and the
// stacked network error after the step.  Only supported for models with a
// gradient-noise decomposition (quadratic risks).
struct StepTrace {
  Eigen::MatrixXd masks;      // N x M, entries 0/1
  Eigen::VectorXd noise;      // NM, col-stacked per agent
  Eigen::VectorXd error;      // NM, w* - w_k after the step
};
using StepCallback = std::function<void(long iteration, const StepTrace&)>;

struct TrajectoryOptions {
  long horizon = 0;
  std::uint64_t master_seed = 0;
  std::uint64_t run_index = 0;
  const Eigen::MatrixXd* er_weight = nullptr;  // Hbar; enables excess-risk records
  bool trace = false;
};

// Per-iteration network-average records.
struct TrajectoryRecord {
  std::vector<double> msd;  // (1/N) sum_k ||w* - w_k||^2
  std::vector<double> er;   // (1/N) sum_k 1/2 ||w* - w_k||^2_Hbar, empty unless requested
};

// Runs the A1 / masked-adapt / A2 recursion from w_{k,-1} = 0.  Deterministic
// given (options.master_seed, options.run_index): each (run, agent) pair owns
// separate data and mask substreams.  Throws DivergenceError when an iterate
// norm passes 1e12.
TrajectoryRecord run_trajectory(const NetworkAnalysis& net,
                                const std::vector<const AgentRisk*>& risks,
                                const TrajectoryOptions& options,
                                const StepCallback& callback = {});

// One step of the stacked error recursion under constant per-agent Hessians:
//   err = A2' (I - M Gamma H) A1' err_prev + A2' M Gamma noise
// Exact for quadratic risks, where the mean-value Hessian is constant.
Eigen::VectorXd error_recursion_reference(const Eigen::VectorXd& err_prev,
                                          const Eigen::MatrixXd& masks,
                                          const Eigen::VectorXd& noise,
                                          const std::vector<Eigen::MatrixXd>& hessians,
                                          const NetworkAnalysis& net);

}  // namespace coordiff
