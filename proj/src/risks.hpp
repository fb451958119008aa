#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <memory>
#include <random>
#include <vector>

namespace coordiff {

// True second-order quantities at the minimizer: Hessian H and gradient-noise
// covariance G.
struct AgentMoments {
  Eigen::MatrixXd H;
  Eigen::MatrixXd G;
};

// Per-agent risk model as seen by the learning engine: streaming stochastic
// gradients plus the true quantities needed by the performance oracle.
class AgentRisk {
 public:
  virtual ~AgentRisk() = default;
  virtual int dim() const = 0;
  virtual const Eigen::VectorXd& minimizer() const = 0;
  virtual AgentMoments moments() const = 0;
  // Draws a fresh datum from `rng` and returns the stochastic gradient at w.
  // When `noise_out` is non-null and the model supports it, also reports the
  // gradient noise (stochastic minus true gradient at w).
  virtual Eigen::VectorXd sample_gradient(const Eigen::VectorXd& w, std::mt19937_64& rng,
                                          Eigen::VectorXd* noise_out) const = 0;
  virtual bool supports_noise_decomposition() const { return false; }
  // Risk value J(w) in closed form, when available.
  virtual bool has_risk_value() const { return false; }
  virtual double risk_value(const Eigen::VectorXd&) const { return 0.0; }
};

struct MseDatum {
  Eigen::RowVectorXd u;
  double d = 0.0;
};

// Linear-regression (MSE) risk: d = u w* + v with Gaussian regressors of
// covariance R_u and white noise of variance sigma_v2.
class MseAgentModel : public AgentRisk {
 public:
  // Explicit covariance; samples through a symmetric square root of R_u.
  MseAgentModel(Eigen::VectorXd w_star, Eigen::MatrixXd ru, double sigma_v2);
  // First-order autoregressive regressors with unit variances; the analytic
  // covariance is Toeplitz pi^|m-n|.
  static MseAgentModel ar1(Eigen::VectorXd w_star, double pi, double sigma_v2);

  MseDatum sample(std::mt19937_64& rng) const;
  Eigen::VectorXd stochastic_gradient(const Eigen::VectorXd& w, const MseDatum& datum) const;

  int dim() const override { return static_cast<int>(w_star_.size()); }
  const Eigen::VectorXd& minimizer() const override { return w_star_; }
  AgentMoments moments() const override;  // H = 2 R_u, G = 4 sigma_v2 R_u
  Eigen::VectorXd sample_gradient(const Eigen::VectorXd& w, std::mt19937_64& rng,
                                  Eigen::VectorXd* noise_out) const override;
  bool supports_noise_decomposition() const override { return true; }
  bool has_risk_value() const override { return true; }
  double risk_value(const Eigen::VectorXd& w) const override;

  const Eigen::MatrixXd& regressor_covariance() const { return ru_; }
  double noise_variance() const { return sigma_v2_; }

 private:
  Eigen::VectorXd w_star_;
  Eigen::MatrixXd ru_;
  Eigen::MatrixXd ru_sqrt_;  // empty in AR(1) mode
  double sigma_v2_ = 0.0;
  double pi_ = 0.0;
  bool ar1_mode_ = false;
};

struct LogisticSample {
  Eigen::VectorXd h;
  double label = 1.0;  // +-1
};

// l2-regularized logistic risk over streaming Gaussian features.  Labels are
// drawn with probability sigmoid(+-h'w_true); the minimizer and its moments
// are estimated offline from a fixed calibration dataset.
class LogisticAgentModel : public AgentRisk {
 public:
  LogisticAgentModel(double rho, Eigen::VectorXd w_true);

  // Draws a calibration dataset, runs a damped Newton solve to gradient norm
  // <= 1e-10, and stores the empirical Hessian and gradient covariance at the
  // minimizer.  Throws ValidationError on non-convergence.
  void calibrate(long dataset_size, std::mt19937_64& rng);
  bool calibrated() const { return calibrated_; }

  LogisticSample sample(std::mt19937_64& rng) const;
  Eigen::VectorXd stochastic_gradient(const Eigen::VectorXd& w, const LogisticSample& s) const;

  int dim() const override { return static_cast<int>(w_true_.size()); }
  const Eigen::VectorXd& minimizer() const override;
  AgentMoments moments() const override;
  Eigen::VectorXd sample_gradient(const Eigen::VectorXd& w, std::mt19937_64& rng,
                                  Eigen::VectorXd* noise_out) const override;

  double regularization() const { return rho_; }
  const Eigen::VectorXd& generator_weights() const { return w_true_; }

 private:
  double rho_;
  Eigen::VectorXd w_true_;
  bool calibrated_ = false;
  Eigen::VectorXd w_star_;
  AgentMoments moments_;
};

}  // namespace coordiff
