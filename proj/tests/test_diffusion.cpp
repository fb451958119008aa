#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <Eigen/Dense>
#include <cmath>
#include <memory>
#include <vector>

#include "diffusion.hpp"
#include "errors.hpp"
#include "network.hpp"
#include "risks.hpp"
#include "rng.hpp"

using namespace coordiff;

namespace {

NetworkAnalysis small_net(int n, const Eigen::VectorXd& mu, const Eigen::VectorXd& r,
                          std::uint64_t topo_seed = 0) {
  const Topology topo = topo_seed == 0 ? full_topology(n) : random_topology(n, 0.6, topo_seed);
  const Eigen::MatrixXd a2 = build_combination_matrix(topo, CombinationRule::averaging);
  return analyze_network(Eigen::MatrixXd::Identity(n, n), a2, mu, r);
}

}  // namespace

TEST_CASE("mask sampling") {
  auto rng = make_stream(1, 0, 0, StreamTag::mask);

  SUBCASE("r = 0 gives the all-ones mask") {
    for (int i = 0; i < 10; ++i) {
      const Mask mask = sample_mask(0.0, 6, rng);
      CHECK(mask.indicator.minCoeff() == 1.0);
    }
  }

  SUBCASE("out-of-range probabilities are rejected") {
    CHECK_THROWS_AS(sample_mask(1.0, 4, rng), ValidationError);
    CHECK_THROWS_AS(sample_mask(1.5, 4, rng), ValidationError);
    CHECK_THROWS_AS(sample_mask(-0.1, 4, rng), ValidationError);
  }

  SUBCASE("entries are 0/1 with the requested frequency") {
    const int dim = 5;
    const long draws = 100000;
    Eigen::VectorXd ones = Eigen::VectorXd::Zero(dim);
    for (long i = 0; i < draws; ++i) {
      const Mask mask = sample_mask(0.5, dim, rng);
      for (int j = 0; j < dim; ++j) {
        CHECK((mask.indicator(j) == 0.0 || mask.indicator(j) == 1.0));
        ones(j) += mask.indicator(j);
      }
    }
    const double band = 3.0 * std::sqrt(0.25 / static_cast<double>(draws));
    for (int j = 0; j < dim; ++j)
      CHECK(std::abs(ones(j) / static_cast<double>(draws) - 0.5) <= band);
  }
}

TEST_CASE("single agent with r = 0 reduces to plain stochastic gradient") {
  Eigen::VectorXd w_star(3);
  w_star << 1.0, -0.5, 2.0;
  const MseAgentModel model(w_star, Eigen::MatrixXd::Identity(3, 3), 0.1);
  const double mu = 0.01;
  const NetworkAnalysis net = small_net(1, Eigen::VectorXd::Constant(1, mu),
                                        Eigen::VectorXd::Zero(1));
  TrajectoryOptions opt;
  opt.horizon = 200;
  opt.master_seed = 5;
  opt.run_index = 3;
  const TrajectoryRecord record = run_trajectory(net, {&model}, opt);

  // Replay as a hand-written SGD loop over the identical data substream.
  auto rng = make_stream(5, 3, 0, StreamTag::data);
  Eigen::VectorXd w = Eigen::VectorXd::Zero(3);
  for (long i = 0; i < opt.horizon; ++i) {
    w -= mu * model.sample_gradient(w, rng, nullptr);
    CHECK(record.msd[i] == (w_star - w).squaredNorm());  // bit-identical
  }
}

TEST_CASE("zero-noise quadratic converges exactly") {
  Eigen::VectorXd w_star(4);
  w_star << 1.0, 2.0, -1.0, 0.5;
  std::vector<MseAgentModel> models;
  for (int k = 0; k < 3; ++k)
    models.emplace_back(w_star, Eigen::MatrixXd::Identity(4, 4), 0.0);
  const NetworkAnalysis net = small_net(3, Eigen::VectorXd::Constant(3, 0.05),
                                        Eigen::VectorXd::Constant(3, 0.3));
  TrajectoryOptions opt;
  opt.horizon = 2000;
  opt.master_seed = 9;
  const TrajectoryRecord record =
      run_trajectory(net, {&models[0], &models[1], &models[2]}, opt);
  CHECK(record.msd.back() <= 1e-20);
}

TEST_CASE("trajectories are deterministic given the seed") {
  Eigen::VectorXd w_star(3);
  w_star << 0.4, -0.2, 1.0;
  const MseAgentModel m0(w_star, Eigen::MatrixXd::Identity(3, 3), 0.2);
  const MseAgentModel m1 = MseAgentModel::ar1(w_star, 0.5, 0.1);
  Eigen::VectorXd r(2);
  r << 0.4, 0.6;
  const NetworkAnalysis net = small_net(2, Eigen::VectorXd::Constant(2, 0.02), r);
  TrajectoryOptions opt;
  opt.horizon = 300;
  opt.master_seed = 77;
  opt.run_index = 2;
  const TrajectoryRecord a = run_trajectory(net, {&m0, &m1}, opt);
  const TrajectoryRecord b = run_trajectory(net, {&m0, &m1}, opt);
  CHECK(a.msd == b.msd);

  opt.run_index = 4;
  const TrajectoryRecord c = run_trajectory(net, {&m0, &m1}, opt);
  CHECK(a.msd != c.msd);
}

TEST_CASE("masked entries freeze the combined iterate") {
  // With a single agent and identity combinations, the masked entries of the
  // new iterate must equal the previous iterate's entries exactly.
  Eigen::VectorXd w_star(5);
  w_star << 1.0, -1.0, 2.0, 0.3, -0.7;
  const MseAgentModel model(w_star, Eigen::MatrixXd::Identity(5, 5), 0.5);
  const NetworkAnalysis net = small_net(1, Eigen::VectorXd::Constant(1, 0.01),
                                        Eigen::VectorXd::Constant(1, 0.5));
  TrajectoryOptions opt;
  opt.horizon = 100;
  opt.master_seed = 15;
  opt.trace = true;
  Eigen::VectorXd prev_err = w_star;  // error of the zero initializer
  run_trajectory(net, {&model}, opt, [&](long, const StepTrace& trace) {
    for (int j = 0; j < 5; ++j)
      if (trace.masks(0, j) == 0.0) CHECK(trace.error(j) == prev_err(j));
    prev_err = trace.error;
  });
}

TEST_CASE("divergence raises a structured error naming run and iteration") {
  Eigen::VectorXd w_star(2);
  w_star << 1.0, 1.0;
  const MseAgentModel model(w_star, Eigen::MatrixXd::Identity(2, 2), 0.1);
  const NetworkAnalysis net = small_net(1, Eigen::VectorXd::Constant(1, 5.0),
                                        Eigen::VectorXd::Zero(1));
  TrajectoryOptions opt;
  opt.horizon = 10000;
  opt.master_seed = 3;
  opt.run_index = 6;
  try {
    run_trajectory(net, {&model}, opt);
    FAIL("expected DivergenceError");
  } catch (const DivergenceError& e) {
    CHECK(e.run == 6);
    CHECK(e.iteration >= 0);
    CHECK(std::string(e.what()).find("run 6") != std::string::npos);
  }
}

TEST_CASE("error recursion reference: fixed points and identity masking") {
  Eigen::VectorXd mu(3);
  mu << 0.01, 0.02, 0.015;
  Eigen::VectorXd r(3);
  r << 0.5, 0.2, 0.0;
  const NetworkAnalysis net = small_net(3, mu, r, 31);
  std::vector<Eigen::MatrixXd> hessians(3, 2.0 * Eigen::MatrixXd::Identity(2, 2));

  const Eigen::VectorXd zero = Eigen::VectorXd::Zero(6);
  const Eigen::MatrixXd ones = Eigen::MatrixXd::Ones(3, 2);
  CHECK(error_recursion_reference(zero, ones, zero, hessians, net).cwiseAbs().maxCoeff() == 0.0);

  // All-ones masks with zero noise reduce to the deterministic full-gradient
  // error map err -> A2'(I - mu H)A1' err; check against a dense evaluation.
  Eigen::VectorXd err(6);
  err << 0.3, -0.1, 0.7, 0.2, -0.4, 0.5;
  const Eigen::VectorXd out = error_recursion_reference(err, ones, zero, hessians, net);
  Eigen::MatrixXd big = Eigen::MatrixXd::Zero(6, 6);
  for (int k = 0; k < 3; ++k)
    for (int l = 0; l < 3; ++l) {
      Eigen::MatrixXd block = Eigen::MatrixXd::Zero(2, 2);
      for (int j = 0; j < 3; ++j) {
        Eigen::MatrixXd inner = -net.mu(j) * hessians[j] * net.A1(l, j);
        if (j == l) inner += Eigen::MatrixXd::Identity(2, 2);
        block += net.A2(j, k) * inner;
      }
      big.block(2 * k, 2 * l, 2, 2) = block;
    }
  CHECK((out - big * err).cwiseAbs().maxCoeff() <= 1e-14);
}

TEST_CASE("engine trajectory matches the error recursion step by step") {
  for (std::uint64_t seed : {101ull, 102ull, 103ull}) {
    const int n = 3, dim = 4;
    Eigen::VectorXd w_star(dim);
    w_star << 0.5, -1.0, 0.25, 2.0;
    std::vector<std::unique_ptr<MseAgentModel>> models;
    std::vector<const AgentRisk*> risks;
    std::vector<Eigen::MatrixXd> hessians;
    for (int k = 0; k < n; ++k) {
      models.push_back(std::make_unique<MseAgentModel>(
          MseAgentModel::ar1(w_star, -0.3 + 0.4 * k, 0.05 + 0.1 * k)));
      risks.push_back(models.back().get());
      hessians.push_back(models.back()->moments().H);
    }
    Eigen::VectorXd mu(n), r(n);
    mu << 0.01, 0.03, 0.02;
    r << 0.0, 0.4, 0.8;
    const NetworkAnalysis net = small_net(n, mu, r, seed);

    TrajectoryOptions opt;
    opt.horizon = 100;
    opt.master_seed = seed;
    opt.trace = true;
    Eigen::VectorXd err = Eigen::VectorXd::Zero(n * dim);
    for (int k = 0; k < n; ++k) err.segment(k * dim, dim) = w_star;
    run_trajectory(net, risks, opt, [&](long, const StepTrace& trace) {
      const Eigen::VectorXd predicted =
          error_recursion_reference(err, trace.masks, trace.noise, hessians, net);
      const double rel =
          (predicted - trace.error).norm() / std::max(trace.error.norm(), 1e-300);
      CHECK(rel <= 1e-10);
      err = trace.error;
    });
  }
}

TEST_CASE("error recursion reference rejects mismatched shapes") {
  const NetworkAnalysis net = small_net(2, Eigen::VectorXd::Constant(2, 0.01),
                                        Eigen::VectorXd::Zero(2));
  std::vector<Eigen::MatrixXd> hessians(2, Eigen::MatrixXd::Identity(3, 3));
  CHECK_THROWS_AS(error_recursion_reference(Eigen::VectorXd::Zero(5),
                                            Eigen::MatrixXd::Ones(2, 3),
                                            Eigen::VectorXd::Zero(6), hessians, net),
                  ValidationError);
  CHECK_THROWS_AS(error_recursion_reference(Eigen::VectorXd::Zero(6),
                                            Eigen::MatrixXd::Ones(2, 2),
                                            Eigen::VectorXd::Zero(6), hessians, net),
                  ValidationError);
}
