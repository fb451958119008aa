#include "diffusion.hpp"

#include <cmath>

#include "errors.hpp"
#include "rng.hpp"

namespace coordiff {

namespace {

constexpr double kDivergenceLimit = 1e12;

// Column-sparse view of a combination matrix; combination steps cost
// O(n_k M) instead of O(N M) per agent.
struct SparseColumns {
  bool identity = false;
  std::vector<std::vector<std::pair<int, double>>> cols;

  explicit SparseColumns(const Eigen::MatrixXd& a) {
    identity = a.isIdentity(0.0);
    if (identity) return;
    const int n = static_cast<int>(a.cols());
    cols.resize(n);
    for (int k = 0; k < n; ++k)
      for (int l = 0; l < n; ++l)
        if (a(l, k) != 0.0) cols[k].emplace_back(l, a(l, k));
  }

  // out.col(k) = sum_l a(l,k) in.col(l)
  void combine(const Eigen::MatrixXd& in, Eigen::MatrixXd& out) const {
    if (identity) {
      out = in;
      return;
    }
    const int n = static_cast<int>(cols.size());
    for (int k = 0; k < n; ++k) {
      out.col(k).setZero();
      for (const auto& [l, w] : cols[k]) out.col(k) += w * in.col(l);
    }
  }
};

}  // namespace

Mask sample_mask(double r, int dim, std::mt19937_64& mask_stream) {
  if (r < 0.0 || r >= 1.0)
    throw ValidationError("sample_mask: missing probability must lie in [0,1)");
  Mask mask;
  mask.indicator.resize(dim);
  if (r == 0.0) {
    mask.indicator.setOnes();
    return mask;
  }
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  for (int j = 0; j < dim; ++j) mask.indicator(j) = unif(mask_stream) < r ? 0.0 : 1.0;
  return mask;
}

TrajectoryRecord run_trajectory(const NetworkAnalysis& net,
                                const std::vector<const AgentRisk*>& risks,
                                const TrajectoryOptions& options,
                                const StepCallback& callback) {
  const int n = static_cast<int>(net.A1.rows());
  if (static_cast<int>(risks.size()) != n)
    throw ValidationError("run_trajectory: one risk model per agent required");
  if (options.horizon < 1) throw ValidationError("run_trajectory: horizon must be at least 1");
  const int m = risks[0]->dim();
  for (const AgentRisk* risk : risks)
    if (risk->dim() != m)
      throw ValidationError("run_trajectory: all agents must share the parameter dimension");
  if (options.er_weight &&
      (options.er_weight->rows() != m || options.er_weight->cols() != m))
    throw ValidationError("run_trajectory: excess-risk weight matrix has the wrong size");

  const SparseColumns a1(net.A1);
  const SparseColumns a2(net.A2);

  std::vector<std::mt19937_64> data_streams, mask_streams;
  data_streams.reserve(n);
  mask_streams.reserve(n);
  for (int k = 0; k < n; ++k) {
    data_streams.push_back(
        make_stream(options.master_seed, options.run_index, static_cast<std::uint32_t>(k), StreamTag::data));
    mask_streams.push_back(
        make_stream(options.master_seed, options.run_index, static_cast<std::uint32_t>(k), StreamTag::mask));
  }

  Eigen::MatrixXd w = Eigen::MatrixXd::Zero(m, n);  // column per agent, w_{k,-1} = 0
  Eigen::MatrixXd phi(m, n), psi(m, n);
  Eigen::VectorXd gradient(m), masked(m);

  TrajectoryRecord record;
  record.msd.resize(options.horizon);
  if (options.er_weight) record.er.resize(options.horizon);

  StepTrace trace;
  Eigen::VectorXd noise(m);
  if (options.trace) {
    trace.masks.resize(n, m);
    trace.noise.resize(static_cast<long>(n) * m);
    trace.error.resize(static_cast<long>(n) * m);
  }

  std::uniform_real_distribution<double> unif(0.0, 1.0);
  for (long i = 0; i < options.horizon; ++i) {
    a1.combine(w, phi);
    for (int k = 0; k < n; ++k) {
      const double rk = net.r(k);
      gradient = risks[k]->sample_gradient(phi.col(k), data_streams[k],
                                           options.trace ? &noise : nullptr);
      if (options.trace) trace.noise.segment(static_cast<long>(k) * m, m) = noise;
      if (rk > 0.0) {
        for (int j = 0; j < m; ++j) {
          const bool keep = unif(mask_streams[k]) >= rk;
          masked(j) = keep ? gradient(j) : 0.0;
          if (options.trace) trace.masks(k, j) = keep ? 1.0 : 0.0;
        }
      } else {
        masked = gradient;
        if (options.trace) trace.masks.row(k).setOnes();
      }
      psi.col(k) = phi.col(k) - net.mu(k) * masked;
    }
    a2.combine(psi, w);

    double msd_sum = 0.0, er_sum = 0.0;
    bool finite = true;
    for (int k = 0; k < n; ++k) {
      const Eigen::VectorXd err = risks[k]->minimizer() - w.col(k);
      const double sq = err.squaredNorm();
      if (!std::isfinite(sq) || sq > kDivergenceLimit * kDivergenceLimit) finite = false;
      msd_sum += sq;
      if (options.er_weight) er_sum += 0.5 * err.dot(*options.er_weight * err);
      if (options.trace) trace.error.segment(static_cast<long>(k) * m, m) = err;
    }
    if (!finite) throw DivergenceError(static_cast<long>(options.run_index), i);
    record.msd[i] = msd_sum / n;
    if (options.er_weight) record.er[i] = er_sum / n;
    if (callback) callback(i, trace);
  }
  return record;
}

Eigen::VectorXd error_recursion_reference(const Eigen::VectorXd& err_prev,
                                          const Eigen::MatrixXd& masks,
                                          const Eigen::VectorXd& noise,
                                          const std::vector<Eigen::MatrixXd>& hessians,
                                          const NetworkAnalysis& net) {
  const int n = static_cast<int>(net.A1.rows());
  if (static_cast<int>(hessians.size()) != n)
    throw ValidationError("error_recursion_reference: one Hessian block per agent required");
  const int m = static_cast<int>(hessians[0].rows());
  if (err_prev.size() != static_cast<long>(n) * m || noise.size() != static_cast<long>(n) * m ||
      masks.rows() != n || masks.cols() != m)
    throw ValidationError("error_recursion_reference: stacked dimensions mismatch");

  auto block = [m](const Eigen::VectorXd& v, int k) { return v.segment(static_cast<long>(k) * m, m); };

  // phi-error: combine through A1
  Eigen::MatrixXd phi_err = Eigen::MatrixXd::Zero(m, n);
  for (int k = 0; k < n; ++k)
    for (int l = 0; l < n; ++l)
      if (net.A1(l, k) != 0.0) phi_err.col(k) += net.A1(l, k) * block(err_prev, l);

  // masked adaptation on the error coordinates
  Eigen::MatrixXd psi_err(m, n);
  for (int k = 0; k < n; ++k) {
    const Eigen::VectorXd update =
        hessians[k] * phi_err.col(k) - block(noise, k);
    psi_err.col(k) =
        phi_err.col(k) - net.mu(k) * masks.row(k).transpose().cwiseProduct(update);
  }

  // combine through A2
  Eigen::VectorXd out = Eigen::VectorXd::Zero(static_cast<long>(n) * m);
  for (int k = 0; k < n; ++k) {
    Eigen::VectorXd acc = Eigen::VectorXd::Zero(m);
    for (int l = 0; l < n; ++l)
      if (net.A2(l, k) != 0.0) acc += net.A2(l, k) * psi_err.col(l);
    out.segment(static_cast<long>(k) * m, m) = acc;
  }
  return out;
}

}  // namespace coordiff
