#include "theory.hpp"

#include <cmath>

#include "errors.hpp"

namespace coordiff {

namespace {

// X A + A X = rhs for symmetric positive-definite A, via eigendecomposition.
Eigen::MatrixXd solve_lyapunov_spd(const Eigen::MatrixXd& a, const Eigen::MatrixXd& rhs) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(a);
  if (es.eigenvalues().minCoeff() <= 0.0)
    throw ValidationError("lyapunov: coefficient matrix must be positive definite");
  const Eigen::MatrixXd& u = es.eigenvectors();
  const Eigen::VectorXd& lam = es.eigenvalues();
  Eigen::MatrixXd t = u.transpose() * rhs * u;
  for (int i = 0; i < t.rows(); ++i)
    for (int j = 0; j < t.cols(); ++j) t(i, j) /= lam(i) + lam(j);
  Eigen::MatrixXd x = u * t * u.transpose();
  return 0.5 * (x + x.transpose());
}

Eigen::MatrixXd weighted_hessian_sum(const TheoryInputs& in, bool masked) {
  Eigen::MatrixXd a = Eigen::MatrixXd::Zero(in.dim(), in.dim());
  for (int k = 0; k < in.agents(); ++k)
    a += in.q(k) * (masked ? 1.0 - in.r(k) : 1.0) * in.H[k];
  return a;
}

Eigen::MatrixXd weighted_noise_sum(const TheoryInputs& in, bool masked) {
  Eigen::MatrixXd s = Eigen::MatrixXd::Zero(in.dim(), in.dim());
  for (int k = 0; k < in.agents(); ++k) {
    const double q2 = in.q(k) * in.q(k);
    s += q2 * (masked ? masked_noise_cov(in.G[k], in.r(k)) : in.G[k]);
  }
  return s;
}

}  // namespace

double to_db(double linear) { return 10.0 * std::log10(linear); }

bool TheoryInputs::uniform_r() const {
  for (int k = 1; k < agents(); ++k)
    if (r(k) != r(0)) return false;
  return true;
}

void TheoryInputs::validate() const {
  const int n = agents();
  if (n < 1) throw ValidationError("theory inputs: at least one agent required");
  if (r.size() != n || static_cast<int>(H.size()) != n || static_cast<int>(G.size()) != n)
    throw ValidationError("theory inputs: q, r, H, G must all have one entry per agent");
  if (!(nu_d > 0.0) || delta_d < nu_d)
    throw ValidationError("theory inputs: need 0 < nu_d <= delta_d");
  const int m = dim();
  for (int k = 0; k < n; ++k) {
    if (!(q(k) > 0.0))
      throw ValidationError("theory inputs: q[" + std::to_string(k) + "] must be positive");
    if (r(k) < 0.0 || r(k) >= 1.0)
      throw ValidationError("theory inputs: r[" + std::to_string(k) + "] must lie in [0,1)");
    if (H[k].rows() != m || H[k].cols() != m || G[k].rows() != m || G[k].cols() != m)
      throw ValidationError("theory inputs: inconsistent matrix dimensions at agent " +
                            std::to_string(k));
    if (!H[k].isApprox(H[k].transpose(), 1e-10))
      throw ValidationError("theory inputs: H[" + std::to_string(k) + "] is not symmetric");
    if (!G[k].isApprox(G[k].transpose(), 1e-10))
      throw ValidationError("theory inputs: G[" + std::to_string(k) + "] is not symmetric");
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(H[k]);
    if (es.eigenvalues().minCoeff() < nu_d * (1.0 - 1e-8) - 1e-12 ||
        es.eigenvalues().maxCoeff() > delta_d * (1.0 + 1e-8) + 1e-12)
      throw ValidationError("theory inputs: H[" + std::to_string(k) +
                            "] spectrum falls outside [nu_d, delta_d]");
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eg(G[k]);
    if (eg.eigenvalues().minCoeff() < -1e-10)
      throw ValidationError("theory inputs: G[" + std::to_string(k) + "] is not PSD");
  }
}

TheoryInputs make_theory_inputs(Eigen::VectorXd q, Eigen::VectorXd r,
                                std::vector<Eigen::MatrixXd> H, std::vector<Eigen::MatrixXd> G) {
  TheoryInputs in;
  in.q = std::move(q);
  in.r = std::move(r);
  in.H = std::move(H);
  in.G = std::move(G);
  in.nu_d = std::numeric_limits<double>::infinity();
  in.delta_d = 0.0;
  for (const auto& h : in.H) {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(h);
    in.nu_d = std::min(in.nu_d, es.eigenvalues().minCoeff());
    in.delta_d = std::max(in.delta_d, es.eigenvalues().maxCoeff());
  }
  in.validate();
  return in;
}

Eigen::MatrixXd masked_noise_cov(const Eigen::MatrixXd& g, double r) {
  if (r < 0.0 || r >= 1.0)
    throw ValidationError("masked_noise_cov: missing probability must lie in [0,1)");
  const double keep = 1.0 - r;
  Eigen::MatrixXd out = keep * keep * g;
  out.diagonal() = keep * g.diagonal();
  return out;
}

Eigen::MatrixXd aggregate_hessian(const TheoryInputs& in) {
  return weighted_hessian_sum(in, false) / in.q.sum();
}

MsdResult msd_theory(const TheoryInputs& in) {
  in.validate();
  MsdResult out;
  const Eigen::MatrixXd a_coor = weighted_hessian_sum(in, true);
  const Eigen::MatrixXd a_grad = weighted_hessian_sum(in, false);
  out.coor = 0.5 * a_coor.ldlt().solve(weighted_noise_sum(in, true)).trace();
  out.grad = 0.5 * a_grad.ldlt().solve(weighted_noise_sum(in, false)).trace();
  out.gap = out.coor - out.grad;
  return out;
}

ErResult er_theory(const TheoryInputs& in) {
  in.validate();
  const Eigen::MatrixXd hbar = aggregate_hessian(in);
  ErResult out;
  out.X = solve_lyapunov_spd(weighted_hessian_sum(in, true), hbar);
  out.coor = 0.5 * (out.X * weighted_noise_sum(in, true)).trace();
  const Eigen::MatrixXd x_grad = solve_lyapunov_spd(weighted_hessian_sum(in, false), hbar);
  out.grad = 0.5 * (x_grad * weighted_noise_sum(in, false)).trace();
  out.gap = out.coor - out.grad;
  return out;
}

RateResult rates(const TheoryInputs& in) {
  in.validate();
  auto lambda_min = [](const Eigen::MatrixXd& a) {
    return Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(a).eigenvalues().minCoeff();
  };
  RateResult out;
  out.alpha_coor = 1.0 - 2.0 * lambda_min(weighted_hessian_sum(in, true));
  out.alpha_grad = 1.0 - 2.0 * lambda_min(weighted_hessian_sum(in, false));
  if (out.alpha_coor <= 0.0 || out.alpha_coor >= 1.0 || out.alpha_grad <= 0.0 ||
      out.alpha_grad >= 1.0)
    throw ValidationError("rates: convergence factor outside (0,1); step-sizes are outside "
                          "the supported stability range");
  out.time_ratio = std::log(out.alpha_grad) / std::log(out.alpha_coor);
  if (in.uniform_r()) out.time_ratio_uniform_approx = 1.0 / (1.0 - in.r(0));
  return out;
}

ComplexityReport complexity(int c_m, int c_a, int n_k, int dim, double r) {
  if (c_m < 0 || c_a < 0) throw ValidationError("complexity: per-entry costs must be nonnegative");
  if (n_k < 1) throw ValidationError("complexity: agent degree must be at least 1");
  if (dim < 1) throw ValidationError("complexity: dimension must be at least 1");
  if (r < 0.0 || r >= 1.0) throw ValidationError("complexity: missing probability must lie in [0,1)");
  ComplexityReport out;
  out.mult_per_iter_grad = static_cast<double>(c_m + n_k + 1) * dim;
  out.mult_per_iter_coor = out.mult_per_iter_grad - (c_m + 1) * dim * r;
  out.add_per_iter_grad = static_cast<double>(c_a + n_k) * dim;
  out.add_per_iter_coor = out.add_per_iter_grad - (c_a + 1) * dim * r;
  // Convergence takes 1/(1-r) times longer, so totals scale accordingly.
  out.mult_total_ratio = (out.mult_per_iter_coor / out.mult_per_iter_grad) / (1.0 - r);
  out.add_total_ratio = (out.add_per_iter_coor / out.add_per_iter_grad) / (1.0 - r);
  return out;
}

ComparisonDiagnostics comparison_diagnostics(const TheoryInputs& in,
                                             const std::optional<Eigen::VectorXd>& mse_sigma_v2) {
  in.validate();
  ComparisonDiagnostics out;
  double s_q = 0.0, s_q2 = 0.0, s_qm = 0.0, s_q2m = 0.0, s_q2mm = 0.0;
  for (int k = 0; k < in.agents(); ++k) {
    const double qk = in.q(k), keep = 1.0 - in.r(k);
    s_q += qk;
    s_q2 += qk * qk;
    s_qm += qk * keep;
    s_q2m += qk * qk * keep;
    s_q2mm += qk * qk * keep * keep;
  }
  out.alpha = s_q2mm / s_qm - s_q2 / s_q;
  out.theta = s_q2m / s_qm - s_q2 / s_q;

  out.uniform_costs = true;
  for (int k = 1; k < in.agents(); ++k)
    if (!in.H[k].isApprox(in.H[0], 1e-10) || !in.G[k].isApprox(in.G[0], 1e-10))
      out.uniform_costs = false;

  const MsdResult msd = msd_theory(in);

  if (in.uniform_r()) {
    double s = 0.0;
    for (int k = 0; k < in.agents(); ++k) s += in.q(k) * in.q(k) * in.G[k].trace();
    out.msd_gap_upper_bound = 0.5 * in.r(0) / s_q * (1.0 / in.nu_d - 1.0 / in.delta_d) * s;
    if (std::abs(msd.gap) > *out.msd_gap_upper_bound + 1e-12) out.msd_gap_within_bounds = false;
  }
  if (mse_sigma_v2 && in.uniform_r()) {
    double s = 0.0;
    for (int k = 0; k < in.agents(); ++k) s += in.q(k) * in.q(k) * (*mse_sigma_v2)(k);
    out.mse_gap_upper_bound =
        in.r(0) / s_q * s * (in.delta_d / in.nu_d - 1.0) * in.dim();
    if (msd.gap < -1e-12 || msd.gap > *out.mse_gap_upper_bound + 1e-12)
      out.msd_gap_within_bounds = false;
  }
  if (out.uniform_costs) {
    out.er_gap_uniform_costs = 0.25 * out.theta * in.G[0].trace();
    if (out.alpha >= 0.0) {
      out.regime = ComparisonRegime::coor_worse_bounded;
    } else if (out.theta >= (1.0 - in.delta_d / in.nu_d) * out.alpha) {
      out.regime = ComparisonRegime::mixed_bounded;
    } else if (out.theta <= (1.0 - in.nu_d / in.delta_d) * out.alpha) {
      out.regime = ComparisonRegime::coor_better_bounded;
    } else {
      out.regime = ComparisonRegime::indeterminate;
    }
  }
  return out;
}

TwoAgentGapResult two_agent_gap(double pi1, double pi2, double sigma1_sq, double sigma2_sq,
                                double q, double r) {
  if (std::abs(pi1) >= 1.0 || std::abs(pi2) >= 1.0)
    throw ValidationError("two_agent_gap: |pi| must be below 1 for a positive-definite covariance");
  if (!(sigma1_sq > 0.0) || !(sigma2_sq > 0.0))
    throw ValidationError("two_agent_gap: noise variances must be positive");
  if (!(q > 0.0)) throw ValidationError("two_agent_gap: q must be positive");
  if (r < 0.0 || r >= 1.0)
    throw ValidationError("two_agent_gap: missing probability must lie in [0,1)");
  TwoAgentGapResult out;
  const double numerator = 2.0 * r * q * (pi1 + pi2) * (pi1 * sigma1_sq + pi2 * sigma2_sq);
  const double denominator = 2.0 * (std::abs(pi1) + std::abs(pi2)) - (pi1 + pi2) * (pi1 + pi2);
  out.gap = numerator / denominator;
  out.regime = out.gap < 0.0 ? TwoAgentRegime::coor_better : TwoAgentRegime::grad_better_or_equal;
  return out;
}

}  // namespace coordiff
