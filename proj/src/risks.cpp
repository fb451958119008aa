#include "risks.hpp"

#include <cmath>

#include "errors.hpp"

namespace coordiff {

namespace {

double sigmoid(double z) {
  if (z >= 0.0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

// ln(1 + exp(-z)) without overflow
double softplus_neg(double z) {
  if (z > 0.0) return std::log1p(std::exp(-z));
  return -z + std::log1p(std::exp(z));
}

}  // namespace

MseAgentModel::MseAgentModel(Eigen::VectorXd w_star, Eigen::MatrixXd ru, double sigma_v2)
    : w_star_(std::move(w_star)), ru_(std::move(ru)), sigma_v2_(sigma_v2) {
  const int m = static_cast<int>(w_star_.size());
  if (ru_.rows() != m || ru_.cols() != m)
    throw ValidationError("mse model: R_u size does not match the parameter dimension");
  if (!ru_.isApprox(ru_.transpose(), 1e-12))
    throw ValidationError("mse model: R_u must be symmetric");
  if (sigma_v2_ < 0.0) throw ValidationError("mse model: noise variance must be nonnegative");
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(ru_);
  if (es.eigenvalues().minCoeff() <= 0.0)
    throw ValidationError("mse model: R_u must be positive definite");
  ru_sqrt_ = es.operatorSqrt();
}

MseAgentModel MseAgentModel::ar1(Eigen::VectorXd w_star, double pi, double sigma_v2) {
  if (std::abs(pi) >= 1.0)
    throw ValidationError("mse model: AR(1) parameter must satisfy |pi| < 1");
  const int m = static_cast<int>(w_star.size());
  Eigen::MatrixXd ru(m, m);
  for (int i = 0; i < m; ++i)
    for (int j = 0; j < m; ++j) ru(i, j) = std::pow(pi, std::abs(i - j));
  MseAgentModel model(std::move(w_star), std::move(ru), sigma_v2);
  model.pi_ = pi;
  model.ar1_mode_ = true;
  model.ru_sqrt_.resize(0, 0);
  return model;
}

MseDatum MseAgentModel::sample(std::mt19937_64& rng) const {
  const int m = dim();
  std::normal_distribution<double> normal(0.0, 1.0);
  MseDatum datum;
  datum.u.resize(m);
  if (ar1_mode_) {
    const double scale = std::sqrt(1.0 - pi_ * pi_);
    double prev = normal(rng);
    datum.u(0) = prev;
    for (int j = 1; j < m; ++j) {
      prev = pi_ * prev + scale * normal(rng);
      datum.u(j) = prev;
    }
  } else {
    Eigen::VectorXd z(m);
    for (int j = 0; j < m; ++j) z(j) = normal(rng);
    datum.u = (ru_sqrt_ * z).transpose();
  }
  const double v = sigma_v2_ > 0.0 ? std::sqrt(sigma_v2_) * normal(rng) : 0.0;
  datum.d = datum.u * w_star_ + v;
  return datum;
}

Eigen::VectorXd MseAgentModel::stochastic_gradient(const Eigen::VectorXd& w,
                                                   const MseDatum& datum) const {
  if (w.size() != w_star_.size())
    throw ValidationError("mse gradient: parameter dimension mismatch");
  const double residual = datum.u * w - datum.d;
  return 2.0 * residual * datum.u.transpose();
}

AgentMoments MseAgentModel::moments() const {
  return {2.0 * ru_, 4.0 * sigma_v2_ * ru_};
}

Eigen::VectorXd MseAgentModel::sample_gradient(const Eigen::VectorXd& w, std::mt19937_64& rng,
                                               Eigen::VectorXd* noise_out) const {
  const MseDatum datum = sample(rng);
  Eigen::VectorXd g = stochastic_gradient(w, datum);
  if (noise_out) *noise_out = g - 2.0 * (ru_ * (w - w_star_));
  return g;
}

double MseAgentModel::risk_value(const Eigen::VectorXd& w) const {
  const Eigen::VectorXd e = w - w_star_;
  return sigma_v2_ + e.dot(ru_ * e);
}

LogisticAgentModel::LogisticAgentModel(double rho, Eigen::VectorXd w_true)
    : rho_(rho), w_true_(std::move(w_true)) {
  if (rho_ <= 0.0) throw ValidationError("logistic model: regularization rho must be positive");
  if (w_true_.size() == 0) throw ValidationError("logistic model: empty generator weights");
}

LogisticSample LogisticAgentModel::sample(std::mt19937_64& rng) const {
  std::normal_distribution<double> normal(0.0, 1.0);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  LogisticSample s;
  s.h.resize(dim());
  for (int j = 0; j < dim(); ++j) s.h(j) = normal(rng);
  s.label = unif(rng) < sigmoid(s.h.dot(w_true_)) ? 1.0 : -1.0;
  return s;
}

Eigen::VectorXd LogisticAgentModel::stochastic_gradient(const Eigen::VectorXd& w,
                                                        const LogisticSample& s) const {
  if (w.size() != w_true_.size())
    throw ValidationError("logistic gradient: parameter dimension mismatch");
  const double z = s.label * s.h.dot(w);
  return rho_ * w - s.label * sigmoid(-z) * s.h;
}

void LogisticAgentModel::calibrate(long dataset_size, std::mt19937_64& rng) {
  if (dataset_size < 1) throw ValidationError("logistic calibration: dataset size must be positive");
  const int m = dim();
  Eigen::MatrixXd features(dataset_size, m);
  Eigen::VectorXd labels(dataset_size);
  for (long i = 0; i < dataset_size; ++i) {
    const LogisticSample s = sample(rng);
    features.row(i) = s.h.transpose();
    labels(i) = s.label;
  }

  auto risk = [&](const Eigen::VectorXd& w) {
    const Eigen::VectorXd z = labels.cwiseProduct(features * w);
    double acc = 0.0;
    for (long i = 0; i < dataset_size; ++i) acc += softplus_neg(z(i));
    return 0.5 * rho_ * w.squaredNorm() + acc / static_cast<double>(dataset_size);
  };

  // Damped Newton on the empirical regularized risk.
  Eigen::VectorXd w = Eigen::VectorXd::Zero(m);
  double grad_norm = 0.0;
  const double tol = 1e-10;
  bool converged = false;
  for (int iter = 0; iter < 100; ++iter) {
    const Eigen::VectorXd z = labels.cwiseProduct(features * w);
    Eigen::VectorXd grad = rho_ * w;
    Eigen::MatrixXd hess = rho_ * Eigen::MatrixXd::Identity(m, m);
    for (long i = 0; i < dataset_size; ++i) {
      const double s = sigmoid(-z(i));
      grad -= (labels(i) * s / dataset_size) * features.row(i).transpose();
      hess += (s * (1.0 - s) / dataset_size) * features.row(i).transpose() * features.row(i);
    }
    grad_norm = grad.norm();
    if (grad_norm <= tol) {
      converged = true;
      break;
    }
    const Eigen::VectorXd step = hess.ldlt().solve(grad);
    Eigen::VectorXd candidate = w - step;
    // Near the optimum the risk decrease falls below evaluation roundoff, so
    // the backtracking test would reject good steps; plain Newton is safely
    // contractive there.
    if (grad_norm > 1e-6) {
      const double base_risk = risk(w);
      double scale = 1.0;
      while (risk(candidate) > base_risk && scale > 1e-12) {
        scale *= 0.5;
        candidate = w - scale * step;
      }
    }
    w = candidate;
  }
  if (!converged)
    throw ValidationError("logistic calibration: Newton did not converge; final gradient norm " +
                          std::to_string(grad_norm));

  w_star_ = w;
  const Eigen::VectorXd z = labels.cwiseProduct(features * w);
  Eigen::MatrixXd hess = rho_ * Eigen::MatrixXd::Identity(m, m);
  Eigen::MatrixXd cov = Eigen::MatrixXd::Zero(m, m);
  for (long i = 0; i < dataset_size; ++i) {
    const double s = sigmoid(-z(i));
    hess += (s * (1.0 - s) / dataset_size) * features.row(i).transpose() * features.row(i);
    const Eigen::VectorXd g = rho_ * w - labels(i) * s * features.row(i).transpose();
    cov += g * g.transpose() / static_cast<double>(dataset_size);
  }
  moments_.H = 0.5 * (hess + hess.transpose());
  moments_.G = 0.5 * (cov + cov.transpose());
  calibrated_ = true;
}

const Eigen::VectorXd& LogisticAgentModel::minimizer() const {
  if (!calibrated_) throw ValidationError("logistic model: calibrate() must run first");
  return w_star_;
}

AgentMoments LogisticAgentModel::moments() const {
  if (!calibrated_) throw ValidationError("logistic model: calibrate() must run first");
  return moments_;
}

Eigen::VectorXd LogisticAgentModel::sample_gradient(const Eigen::VectorXd& w, std::mt19937_64& rng,
                                                    Eigen::VectorXd* noise_out) const {
  if (noise_out)
    throw ValidationError("logistic model: gradient-noise decomposition is only available "
                          "for quadratic risks");
  return stochastic_gradient(w, sample(rng));
}

}  // namespace coordiff
