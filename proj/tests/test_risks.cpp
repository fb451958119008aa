#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <Eigen/Dense>
#include <cmath>

#include "errors.hpp"
#include "risks.hpp"
#include "rng.hpp"

using namespace coordiff;

namespace {

std::mt19937_64 stream(std::uint64_t seed) { return make_stream(seed, 0, 0, StreamTag::data); }

Eigen::MatrixXd two_agent_cov(double pi) {
  Eigen::MatrixXd ru(2, 2);
  ru << std::abs(pi), pi, pi, 1.0;
  return ru;
}

}  // namespace

TEST_CASE("mse model validation") {
  const Eigen::VectorXd w = Eigen::VectorXd::Ones(2);
  Eigen::MatrixXd asym(2, 2);
  asym << 1.0, 0.3, 0.1, 1.0;
  CHECK_THROWS_AS(MseAgentModel(w, asym, 0.1), ValidationError);

  Eigen::MatrixXd indefinite(2, 2);
  indefinite << 1.0, 2.0, 2.0, 1.0;
  CHECK_THROWS_AS(MseAgentModel(w, indefinite, 0.1), ValidationError);

  CHECK_THROWS_AS(MseAgentModel(w, Eigen::MatrixXd::Identity(2, 2), -0.1), ValidationError);
  CHECK_THROWS_AS(MseAgentModel::ar1(w, 1.0, 0.1), ValidationError);
  CHECK_THROWS_AS(MseAgentModel::ar1(w, -1.2, 0.1), ValidationError);
}

TEST_CASE("mse moments closed forms") {
  const Eigen::VectorXd w = Eigen::VectorXd::Ones(3);
  const MseAgentModel white(w, Eigen::MatrixXd::Identity(3, 3), 0.01);
  const AgentMoments m = white.moments();
  CHECK(m.H.isApprox(2.0 * Eigen::MatrixXd::Identity(3, 3), 1e-15));
  CHECK(m.G.isApprox(0.04 * Eigen::MatrixXd::Identity(3, 3), 1e-15));

  const MseAgentModel noiseless(w, Eigen::MatrixXd::Identity(3, 3), 0.0);
  CHECK(noiseless.moments().G.cwiseAbs().maxCoeff() == 0.0);

  // Two-agent covariance with pi = 0.99.
  const MseAgentModel second(Eigen::VectorXd::Ones(2), two_agent_cov(0.99), 0.5);
  Eigen::MatrixXd expected(2, 2);
  expected << 2.0 * 0.99, 2.0 * 0.99, 2.0 * 0.99, 2.0;
  CHECK(second.moments().H.isApprox(expected, 1e-14));
}

TEST_CASE("ar1 analytic covariance is Toeplitz with unit variances") {
  const MseAgentModel model = MseAgentModel::ar1(Eigen::VectorXd::Zero(4), 0.6, 0.1);
  const Eigen::MatrixXd& ru = model.regressor_covariance();
  for (int i = 0; i < 4; ++i)
    for (int j = 0; j < 4; ++j)
      CHECK(ru(i, j) == doctest::Approx(std::pow(0.6, std::abs(i - j))).epsilon(1e-14));
}

TEST_CASE("zero-noise samples satisfy d = u w_star exactly") {
  Eigen::VectorXd w(3);
  w << 1.0, -2.0, 0.5;
  const MseAgentModel model(w, Eigen::MatrixXd::Identity(3, 3), 0.0);
  auto rng = stream(7);
  for (int i = 0; i < 100; ++i) {
    const MseDatum datum = model.sample(rng);
    CHECK(datum.d == datum.u * w);
  }
}

TEST_CASE("empirical regressor covariance within 3-sigma of R_u") {
  // Covers the explicit-covariance sampler and, with pi = 0, whiteness of the
  // AR(1) mode.
  Eigen::MatrixXd ru(3, 3);
  ru << 1.0, 0.4, 0.1, 0.4, 1.0, 0.4, 0.1, 0.4, 1.0;
  const MseAgentModel explicit_model(Eigen::VectorXd::Zero(3), ru, 0.1);
  const MseAgentModel white_model = MseAgentModel::ar1(Eigen::VectorXd::Zero(3), 0.0, 0.1);

  const long n = 100000;
  for (const MseAgentModel* model : {&explicit_model, &white_model}) {
    const Eigen::MatrixXd& target = model->regressor_covariance();
    auto rng = stream(11);
    Eigen::MatrixXd acc = Eigen::MatrixXd::Zero(3, 3);
    for (long i = 0; i < n; ++i) {
      const MseDatum datum = model->sample(rng);
      acc += datum.u.transpose() * datum.u;
    }
    acc /= static_cast<double>(n);
    for (int a = 0; a < 3; ++a)
      for (int b = 0; b < 3; ++b) {
        // Var(u_a u_b) = R_aa R_bb + R_ab^2 for jointly Gaussian entries.
        const double sd = std::sqrt((target(a, a) * target(b, b) +
                                     target(a, b) * target(a, b)) /
                                    static_cast<double>(n));
        CHECK(std::abs(acc(a, b) - target(a, b)) <= 3.0 * sd);
      }
  }
}

TEST_CASE("mse stochastic gradient examples") {
  Eigen::VectorXd w_star(2);
  w_star << 1.0, 1.0;
  const MseAgentModel model(w_star, Eigen::MatrixXd::Identity(2, 2), 0.1);

  MseDatum datum;
  datum.u.resize(2);
  datum.u << 1.0, 2.0;
  datum.d = 3.0;
  Eigen::VectorXd w(2);
  w << 1.0, 1.0;
  CHECK(model.stochastic_gradient(w, datum).cwiseAbs().maxCoeff() == 0.0);

  Eigen::VectorXd wrong_dim(3);
  CHECK_THROWS_AS(model.stochastic_gradient(wrong_dim, datum), ValidationError);
}

TEST_CASE("mse gradient is unbiased at the minimizer") {
  Eigen::VectorXd w_star(3);
  w_star << 0.3, -0.7, 1.1;
  Eigen::MatrixXd ru(3, 3);
  ru << 1.0, 0.2, 0.0, 0.2, 1.0, 0.2, 0.0, 0.2, 1.0;
  const double sigma2 = 0.25;
  const MseAgentModel model(w_star, ru, sigma2);
  auto rng = stream(13);
  const long n = 100000;
  Eigen::VectorXd mean = Eigen::VectorXd::Zero(3);
  for (long i = 0; i < n; ++i) mean += model.sample_gradient(w_star, rng, nullptr);
  mean /= static_cast<double>(n);
  // At w_star the gradient is -2 v u', so per-entry variance is 4 sigma2 R_aa.
  for (int a = 0; a < 3; ++a) {
    const double sd = std::sqrt(4.0 * sigma2 * ru(a, a) / static_cast<double>(n));
    CHECK(std::abs(mean(a)) <= 3.0 * sd);
  }
}

TEST_CASE("empirical gradient covariance matches G at the minimizer") {
  Eigen::VectorXd w_star(3);
  w_star << 1.0, 0.0, -1.0;
  Eigen::MatrixXd ru(3, 3);
  ru << 1.0, 0.3, 0.1, 0.3, 1.0, 0.3, 0.1, 0.3, 1.0;
  const MseAgentModel model(w_star, ru, 0.04);
  const Eigen::MatrixXd g_true = model.moments().G;
  auto rng = stream(17);
  const long n = 1000000;
  Eigen::MatrixXd acc = Eigen::MatrixXd::Zero(3, 3);
  for (long i = 0; i < n; ++i) {
    const Eigen::VectorXd g = model.sample_gradient(w_star, rng, nullptr);
    acc += g * g.transpose();
  }
  acc /= static_cast<double>(n);
  CHECK((acc - g_true).norm() / g_true.norm() <= 0.05);
}

TEST_CASE("gradient noise is uncorrelated across agents") {
  const Eigen::VectorXd w_star = Eigen::VectorXd::Ones(2);
  const MseAgentModel model_a(w_star, Eigen::MatrixXd::Identity(2, 2), 0.5);
  const MseAgentModel model_b(w_star, two_agent_cov(0.6), 0.2);
  auto rng_a = make_stream(21, 0, 0, StreamTag::data);
  auto rng_b = make_stream(21, 0, 1, StreamTag::data);
  const long n = 100000;
  Eigen::MatrixXd cross = Eigen::MatrixXd::Zero(2, 2);
  double var_a = 0.0, var_b = 0.0;
  for (long i = 0; i < n; ++i) {
    Eigen::VectorXd sa, sb;
    model_a.sample_gradient(w_star, rng_a, &sa);
    model_b.sample_gradient(w_star, rng_b, &sb);
    cross += sa * sb.transpose();
    var_a += sa.squaredNorm() / 2.0;
    var_b += sb.squaredNorm() / 2.0;
  }
  cross /= static_cast<double>(n);
  var_a /= static_cast<double>(n);
  var_b /= static_cast<double>(n);
  const double sd = std::sqrt(var_a * var_b / static_cast<double>(n));
  CHECK(cross.cwiseAbs().maxCoeff() <= 3.0 * sd);
}

TEST_CASE("mse noise decomposition is consistent") {
  Eigen::VectorXd w_star(2);
  w_star << 2.0, -1.0;
  const MseAgentModel model(w_star, two_agent_cov(0.5), 0.3);
  Eigen::VectorXd w(2);
  w << 0.5, 0.5;
  const Eigen::VectorXd true_grad = 2.0 * (model.regressor_covariance() * (w - w_star));
  auto rng = stream(23);
  for (int i = 0; i < 50; ++i) {
    Eigen::VectorXd noise;
    const Eigen::VectorXd g = model.sample_gradient(w, rng, &noise);
    CHECK((g - true_grad - noise).cwiseAbs().maxCoeff() <= 1e-12);
  }
  CHECK(model.supports_noise_decomposition());
}

TEST_CASE("mse risk value closed form") {
  Eigen::VectorXd w_star(2);
  w_star << 1.0, 2.0;
  const MseAgentModel model(w_star, two_agent_cov(0.4), 0.09);
  CHECK(model.risk_value(w_star) == doctest::Approx(0.09).epsilon(1e-14));
  Eigen::VectorXd w(2);
  w << 2.0, 2.0;
  // J(w) - J(w_star) = e' R_u e with e = (1, 0).
  CHECK(model.risk_value(w) - model.risk_value(w_star) ==
        doctest::Approx(0.4).epsilon(1e-12));
}

TEST_CASE("logistic model basics") {
  CHECK_THROWS_AS(LogisticAgentModel(0.0, Eigen::VectorXd::Ones(2)), ValidationError);
  CHECK_THROWS_AS(LogisticAgentModel(0.01, Eigen::VectorXd()), ValidationError);

  const LogisticAgentModel model(0.01, Eigen::VectorXd::Ones(3));
  CHECK_THROWS_AS(model.minimizer(), ValidationError);
  CHECK_THROWS_AS(model.moments(), ValidationError);

  // Gradient at w = 0 equals -label * h / 2 plus the (zero) regularizer term.
  auto rng = stream(29);
  for (int i = 0; i < 20; ++i) {
    const LogisticSample s = model.sample(rng);
    CHECK(std::abs(s.label * s.label - 1.0) <= 0.0);
    const Eigen::VectorXd g = model.stochastic_gradient(Eigen::VectorXd::Zero(3), s);
    CHECK((g + 0.5 * s.label * s.h).cwiseAbs().maxCoeff() <= 1e-14);
  }
}

TEST_CASE("logistic calibration contract") {
  Eigen::VectorXd w_true(4);
  w_true << 0.8, -0.5, 0.3, 1.2;
  LogisticAgentModel model(0.01, w_true);
  const long size = 20000;
  auto rng = make_stream(31, 0, 0, StreamTag::calibration);
  auto rng_replay = make_stream(31, 0, 0, StreamTag::calibration);
  model.calibrate(size, rng);
  CHECK(model.calibrated());

  // Replay the identical calibration dataset and verify the gradient norm at
  // the returned minimizer directly.
  const Eigen::VectorXd& w_star = model.minimizer();
  Eigen::VectorXd grad = model.regularization() * w_star;
  for (long i = 0; i < size; ++i) {
    const LogisticSample s = model.sample(rng_replay);
    const double z = s.label * s.h.dot(w_star);
    const double sig = z >= 0.0 ? std::exp(-z) / (1.0 + std::exp(-z))
                                : 1.0 / (1.0 + std::exp(z));
    grad -= (s.label * sig / static_cast<double>(size)) * s.h;
  }
  CHECK(grad.norm() <= 1e-10);

  // Strong convexity: the calibrated Hessian dominates rho I.
  const AgentMoments m = model.moments();
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(m.H);
  CHECK(es.eigenvalues().minCoeff() >= model.regularization() - 1e-12);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eg(m.G);
  CHECK(eg.eigenvalues().minCoeff() >= -1e-12);

  // No gradient-noise decomposition outside quadratic risks.
  Eigen::VectorXd noise;
  auto rng2 = stream(37);
  CHECK_THROWS_AS(model.sample_gradient(w_star, rng2, &noise), ValidationError);
  CHECK_FALSE(model.supports_noise_decomposition());

  CHECK_THROWS_AS(model.calibrate(0, rng), ValidationError);
}

TEST_CASE("logistic calibration with symmetric labels") {
  // With generator weights zero the label is independent of the features, the
  // population minimizer is w = 0, and the population Hessian there is
  // rho I + E[h h'] / 4.  The calibrated quantities match within sampling
  // error of the finite dataset.
  const int dim = 3;
  LogisticAgentModel model(0.05, Eigen::VectorXd::Zero(dim));
  auto rng = make_stream(41, 0, 0, StreamTag::calibration);
  const long size = 200000;
  model.calibrate(size, rng);
  // ||w_star|| = O(1/sqrt(size)); allow a generous multiple.
  CHECK(model.minimizer().norm() <= 10.0 / std::sqrt(static_cast<double>(size)));
  const Eigen::MatrixXd expected =
      0.05 * Eigen::MatrixXd::Identity(dim, dim) + 0.25 * Eigen::MatrixXd::Identity(dim, dim);
  CHECK((model.moments().H - expected).norm() / expected.norm() <= 0.02);
}
