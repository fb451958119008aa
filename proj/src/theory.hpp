#pragma once

#include <Eigen/Dense>
#include <optional>
#include <string>
#include <vector>

namespace coordiff {

// Inputs to the closed-form steady-state formulas: agent weights q, missing
// probabilities r, true Hessians H_k and gradient-noise covariances G_k at
// the minimizer, plus the global Hessian bounds nu_d <= delta_d.
struct TheoryInputs {
  Eigen::VectorXd q;
  Eigen::VectorXd r;
  std::vector<Eigen::MatrixXd> H;
  std::vector<Eigen::MatrixXd> G;
  double nu_d = 0.0;
  double delta_d = 0.0;

  int agents() const { return static_cast<int>(q.size()); }
  int dim() const { return H.empty() ? 0 : static_cast<int>(H[0].rows()); }
  bool uniform_r() const;
  void validate() const;
};

// Builds inputs with nu_d / delta_d computed from the Hessian spectra.
TheoryInputs make_theory_inputs(Eigen::VectorXd q, Eigen::VectorXd r,
                                std::vector<Eigen::MatrixXd> H, std::vector<Eigen::MatrixXd> G);

// Covariance of the masked gradient noise: off-diagonal entries scale by
// (1-r)^2, diagonal entries by (1-r).
Eigen::MatrixXd masked_noise_cov(const Eigen::MatrixXd& g, double r);

// Hessian of the normalized aggregate cost: sum(q_k H_k) / sum(q_k).
Eigen::MatrixXd aggregate_hessian(const TheoryInputs& in);

struct MsdResult {
  double coor = 0.0;
  double grad = 0.0;
  double gap = 0.0;  // coor - grad
};

// Steady-state MSD for the coordinate-descent and full-gradient cases.
MsdResult msd_theory(const TheoryInputs& in);

struct ErResult {
  double coor = 0.0;
  double grad = 0.0;
  double gap = 0.0;
  Eigen::MatrixXd X;  // Lyapunov solution for the coordinate case
};

// Steady-state excess risk via the Lyapunov equation
//   X A + A X = Hbar,  A = sum q_k (1-r_k) H_k.
ErResult er_theory(const TheoryInputs& in);

struct RateResult {
  double alpha_coor = 0.0;
  double alpha_grad = 0.0;
  double time_ratio = 1.0;  // ln(alpha_grad) / ln(alpha_coor)
  std::optional<double> time_ratio_uniform_approx;  // 1/(1-r) when r uniform
};

// Leading-order geometric convergence rates of the error variances.  Throws
// when either rate falls outside (0,1).
RateResult rates(const TheoryInputs& in);

struct ComplexityReport {
  double mult_per_iter_grad = 0.0;
  double mult_per_iter_coor = 0.0;
  double add_per_iter_grad = 0.0;
  double add_per_iter_coor = 0.0;
  double mult_total_ratio = 1.0;  // coordinate/full total until convergence
  double add_total_ratio = 1.0;
};

// Per-iteration and total operation counts for one agent of degree n_k, with
// c_m multiplications and c_a additions per gradient entry.
ComplexityReport complexity(int c_m, int c_a, int n_k, int dim, double r);

enum class ComparisonRegime { coor_worse_bounded, mixed_bounded, coor_better_bounded, indeterminate };

struct ComparisonDiagnostics {
  double alpha = 0.0;  // weight asymmetry entering the MSD comparison
  double theta = 0.0;  // weight asymmetry entering the ER comparison
  bool uniform_costs = false;
  std::optional<ComparisonRegime> regime;          // uniform-cost classification
  std::optional<double> msd_gap_upper_bound;       // uniform-r general bound
  std::optional<double> mse_gap_upper_bound;       // MSE uniform-covariance bound
  std::optional<double> er_gap_uniform_costs;      // (theta/4) Tr(G)
  bool msd_gap_within_bounds = true;
};

// Closed-form bounds and regime classification.  `mse_sigma_v2` supplies
// the per-agent noise variances for the MSE uniform-covariance bound.
ComparisonDiagnostics comparison_diagnostics(
    const TheoryInputs& in, const std::optional<Eigen::VectorXd>& mse_sigma_v2 = std::nullopt);

enum class TwoAgentRegime { coor_better, grad_better_or_equal };

struct TwoAgentGapResult {
  double gap = 0.0;  // MSD_coor - MSD_grad, linear
  TwoAgentRegime regime = TwoAgentRegime::grad_better_or_equal;
};

// Closed-form MSD gap for the two-agent network with covariances
// [[|pi|, pi], [pi, 1]], uniform q and r.
TwoAgentGapResult two_agent_gap(double pi1, double pi2, double sigma1_sq, double sigma2_sq,
                                double q, double r);

double to_db(double linear);

}  // namespace coordiff
