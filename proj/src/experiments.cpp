#include "experiments.hpp"

#include <algorithm>
#include <cmath>
#include <exception>
#include <sstream>
#include <thread>

#include "errors.hpp"
#include "rng.hpp"

namespace coordiff {

namespace {

bool same_matrix(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b) {
  return a.rows() == b.rows() && a.cols() == b.cols() && a == b;
}

bool same_vector(const Eigen::VectorXd& a, const Eigen::VectorXd& b) {
  return a.size() == b.size() && a == b;
}

std::vector<double> to_db_curve(const std::vector<double>& linear) {
  std::vector<double> db(linear.size());
  for (std::size_t i = 0; i < linear.size(); ++i) db[i] = to_db(linear[i]);
  return db;
}

long window_begin(long n) { return n - std::max<long>(n / 10, 50); }

// OLS slope of 10*log10(series) over the final 10% of iterations.
double window_slope_db(const std::vector<double>& linear) {
  const long n = static_cast<long>(linear.size());
  const long begin = window_begin(n);
  const long count = n - begin;
  double mx = 0.0, my = 0.0;
  for (long i = begin; i < n; ++i) {
    mx += static_cast<double>(i);
    my += to_db(std::max(linear[i], 1e-300));
  }
  mx /= count;
  my /= count;
  double sxx = 0.0, sxy = 0.0;
  for (long i = begin; i < n; ++i) {
    const double dx = static_cast<double>(i) - mx;
    sxx += dx * dx;
    sxy += dx * (to_db(std::max(linear[i], 1e-300)) - my);
  }
  return sxy / sxx;
}

}  // namespace

void Scenario::validate() const {
  topology.validate();
  const int n = topology.agent_count;
  if (A1.rows() != n || A1.cols() != n || A2.rows() != n || A2.cols() != n)
    throw ValidationError("scenario: combination matrices must be N x N");
  if (mu.size() != n || r.size() != n)
    throw ValidationError("scenario: mu and r must hold one entry per agent");
  if (dim < 1) throw ValidationError("scenario: dimension must be positive");
  if (w_star.size() != dim)
    throw ValidationError("scenario: w_star must match the parameter dimension");
  if (runs < 1) throw ValidationError("scenario: runs must be positive");
  if (threads < 1) throw ValidationError("scenario: threads must be positive");
  if (horizon < 0) throw ValidationError("scenario: horizon must be nonnegative");
  if (kind == RiskKind::mse) {
    if (!ar1_pi.empty()) {
      if (static_cast<int>(ar1_pi.size()) != n)
        throw ValidationError("scenario: ar1_pi must hold one entry per agent");
      for (double pi : ar1_pi)
        if (!(std::abs(pi) < 1.0))
          throw ValidationError("scenario: AR(1) parameters must satisfy |pi| < 1");
    } else if (static_cast<int>(ru.size()) != n) {
      throw ValidationError("scenario: one regressor covariance per agent required");
    }
    if (sigma_v2.size() != n)
      throw ValidationError("scenario: sigma_v2 must hold one entry per agent");
    for (int k = 0; k < n; ++k)
      if (!(sigma_v2(k) > 0.0))
        throw ValidationError("scenario: noise variances must be positive");
  } else {
    if (!(rho > 0.0)) throw ValidationError("scenario: regularization must be positive");
    if (calibration_size < 10)
      throw ValidationError("scenario: calibration dataset too small");
  }
}

bool operator==(const Scenario& a, const Scenario& b) {
  if (a.name != b.name || a.topology.agent_count != b.topology.agent_count ||
      a.topology.neighborhoods != b.topology.neighborhoods)
    return false;
  if (!same_matrix(a.A1, b.A1) || !same_matrix(a.A2, b.A2)) return false;
  if (!same_vector(a.mu, b.mu) || !same_vector(a.r, b.r)) return false;
  if (a.kind != b.kind || a.dim != b.dim || !same_vector(a.w_star, b.w_star)) return false;
  if (a.ar1_pi != b.ar1_pi || a.ru.size() != b.ru.size()) return false;
  for (std::size_t i = 0; i < a.ru.size(); ++i)
    if (!same_matrix(a.ru[i], b.ru[i])) return false;
  if (!same_vector(a.sigma_v2, b.sigma_v2)) return false;
  if (a.rho != b.rho || a.calibration_size != b.calibration_size ||
      a.calibration_seed != b.calibration_seed)
    return false;
  return a.horizon == b.horizon && a.runs == b.runs && a.seed == b.seed &&
         a.record_er == b.record_er && a.threads == b.threads;
}

CompiledScenario compile(const Scenario& scenario) {
  scenario.validate();
  const int n = scenario.agents();

  CompiledScenario out;
  out.net = analyze_network(scenario.A1, scenario.A2, scenario.mu, scenario.r);

  if (scenario.kind == RiskKind::mse) {
    for (int k = 0; k < n; ++k) {
      if (!scenario.ar1_pi.empty())
        out.models.push_back(std::make_shared<MseAgentModel>(
            MseAgentModel::ar1(scenario.w_star, scenario.ar1_pi[k], scenario.sigma_v2(k))));
      else
        out.models.push_back(std::make_shared<MseAgentModel>(scenario.w_star, scenario.ru[k],
                                                             scenario.sigma_v2(k)));
    }
  } else {
    auto model = std::make_shared<LogisticAgentModel>(scenario.rho, scenario.w_star);
    auto rng = make_stream(scenario.calibration_seed, 0, 0, StreamTag::calibration);
    model->calibrate(scenario.calibration_size, rng);
    for (int k = 0; k < n; ++k) out.models.push_back(model);
  }
  for (const auto& m : out.models) out.model_ptrs.push_back(m.get());

  std::vector<Eigen::MatrixXd> hs, gs;
  for (const auto& m : out.models) {
    AgentMoments mm = m->moments();
    hs.push_back(std::move(mm.H));
    gs.push_back(std::move(mm.G));
  }
  out.theory_in = make_theory_inputs(out.net.q, scenario.r, std::move(hs), std::move(gs));
  out.hbar = aggregate_hessian(out.theory_in);

  if (scenario.horizon > 0) {
    out.horizon = scenario.horizon;
  } else {
    // Long enough for the slowest error mode to decay a safety factor below
    // the predicted steady state, so the tail of the curve is flat.
    const RateResult rate = rates(out.theory_in);
    const double msd0 = out.models[0]->minimizer().squaredNorm();
    double ratio = msd0 / msd_theory(out.theory_in).coor;
    if (scenario.record_er) {
      const Eigen::VectorXd& ws = out.models[0]->minimizer();
      const double er0 = 0.5 * ws.dot(out.hbar * ws);
      ratio = std::max(ratio, er0 / er_theory(out.theory_in).coor);
    }
    const double decades = std::log(std::max(ratio, 1.0)) + 8.0;
    out.horizon = std::max<long>(500, static_cast<long>(std::ceil(decades / (1.0 - rate.alpha_coor))));
  }
  return out;
}

LearningCurve monte_carlo(const Scenario& scenario, const CompiledScenario& compiled,
                          bool force_full_gradient) {
  const NetworkAnalysis* net = &compiled.net;
  NetworkAnalysis unmasked;
  if (force_full_gradient) {
    unmasked = compiled.net;
    unmasked.r.setZero();
    net = &unmasked;
  }

  const long horizon = compiled.horizon;
  const int runs = scenario.runs;
  std::vector<TrajectoryRecord> records(runs);

  auto run_range = [&](int begin, int end) {
    for (int run = begin; run < end; ++run) {
      TrajectoryOptions options;
      options.horizon = horizon;
      options.master_seed = scenario.seed;
      options.run_index = static_cast<std::uint64_t>(run);
      options.er_weight = scenario.record_er ? &compiled.hbar : nullptr;
      records[run] = run_trajectory(*net, compiled.model_ptrs, options);
    }
  };

  const int workers = std::min(scenario.threads, runs);
  if (workers <= 1) {
    run_range(0, runs);
  } else {
    std::vector<std::thread> pool;
    std::vector<std::exception_ptr> failures(workers);
    for (int t = 0; t < workers; ++t) {
      const int begin = static_cast<int>(static_cast<long>(runs) * t / workers);
      const int end = static_cast<int>(static_cast<long>(runs) * (t + 1) / workers);
      pool.emplace_back([&, t, begin, end] {
        try {
          run_range(begin, end);
        } catch (...) {
          failures[t] = std::current_exception();
        }
      });
    }
    for (auto& th : pool) th.join();
    for (const auto& failure : failures)
      if (failure) std::rethrow_exception(failure);
  }

  // Fixed summation order (run 0, 1, ...) so the output does not depend on
  // worker scheduling or thread count.
  LearningCurve curve;
  curve.runs = runs;
  curve.seed = scenario.seed;
  curve.msd_linear.assign(horizon, 0.0);
  if (scenario.record_er) curve.er_linear.assign(horizon, 0.0);
  curve.msd_window_slopes.reserve(runs);
  if (scenario.record_er) curve.er_window_slopes.reserve(runs);
  for (int run = 0; run < runs; ++run) {
    for (long i = 0; i < horizon; ++i) curve.msd_linear[i] += records[run].msd[i];
    curve.msd_window_slopes.push_back(window_slope_db(records[run].msd));
    if (scenario.record_er) {
      for (long i = 0; i < horizon; ++i) curve.er_linear[i] += records[run].er[i];
      curve.er_window_slopes.push_back(window_slope_db(records[run].er));
    }
  }
  for (auto& v : curve.msd_linear) v /= runs;
  for (auto& v : curve.er_linear) v /= runs;
  curve.msd_db = to_db_curve(curve.msd_linear);
  if (scenario.record_er) curve.er_db = to_db_curve(curve.er_linear);
  return curve;
}

double steady_state_db(const std::vector<double>& curve_db,
                       const std::vector<double>* run_slopes) {
  const long n = static_cast<long>(curve_db.size());
  if (n < 100) throw ValidationError("steady_state_db: curve too short");
  const long begin = window_begin(n);
  const long window = n - begin;

  double mean_y = 0.0;
  for (long i = begin; i < n; ++i) mean_y += curve_db[i];
  mean_y /= window;

  double mx = 0.0;
  for (long i = begin; i < n; ++i) mx += static_cast<double>(i);
  mx /= window;
  double sxx = 0.0, sxy = 0.0;
  for (long i = begin; i < n; ++i) {
    const double dx = static_cast<double>(i) - mx;
    sxx += dx * dx;
    sxy += dx * (curve_db[i] - mean_y);
  }
  const double slope = sxy / sxx;

  // Flatness gate, limit 0.01 dB per 1000 iterations.  A residual trend is
  // flagged only when it also exceeds the slope-estimate noise level by five
  // standard errors; ensemble noise is strongly autocorrelated across
  // iterations, so the noise level comes from the scatter of the independent
  // per-run window slopes when those are available, and from contiguous
  // block-mean residuals otherwise.
  double slope_se = 0.0;
  if (run_slopes && run_slopes->size() > 1) {
    const double runs = static_cast<double>(run_slopes->size());
    double mean_s = 0.0;
    for (double s : *run_slopes) mean_s += s;
    mean_s /= runs;
    double var = 0.0;
    for (double s : *run_slopes) var += (s - mean_s) * (s - mean_s);
    var /= runs - 1.0;
    slope_se = std::sqrt(var / runs);
  } else {
    constexpr int kBlocks = 8;
    const long block = window / kBlocks;
    double bx[kBlocks], by[kBlocks];
    for (int b = 0; b < kBlocks; ++b) {
      const long lo = begin + b * block;
      const long hi = (b == kBlocks - 1) ? n : lo + block;
      double acc = 0.0;
      for (long i = lo; i < hi; ++i) acc += curve_db[i];
      by[b] = acc / static_cast<double>(hi - lo);
      bx[b] = 0.5 * static_cast<double>(lo + hi);
    }
    double bmx = 0.0, bmy = 0.0;
    for (int b = 0; b < kBlocks; ++b) {
      bmx += bx[b];
      bmy += by[b];
    }
    bmx /= kBlocks;
    bmy /= kBlocks;
    double bsxx = 0.0, bsxy = 0.0;
    for (int b = 0; b < kBlocks; ++b) {
      bsxx += (bx[b] - bmx) * (bx[b] - bmx);
      bsxy += (bx[b] - bmx) * (by[b] - bmy);
    }
    const double bslope = bsxy / bsxx;
    double rss = 0.0;
    for (int b = 0; b < kBlocks; ++b) {
      const double resid = by[b] - bmy - bslope * (bx[b] - bmx);
      rss += resid * resid;
    }
    slope_se = std::sqrt(rss / (kBlocks - 2) / bsxx);
  }

  const double limit = 0.01 / 1000.0;
  if (std::abs(slope) > limit + 5.0 * slope_se) {
    std::ostringstream msg;
    msg << "steady-state window is not flat (slope " << slope * 1000.0
        << " dB per 1000 iterations, limit 0.01, noise level " << slope_se * 1000.0
        << "); rerun with a longer horizon";
    throw NotConvergedError(msg.str());
  }
  return mean_y;
}

long measure_convergence_time(const std::vector<double>& curve_db, double steady_db,
                              double band_db) {
  const long n = static_cast<long>(curve_db.size());
  if (n == 0) throw ValidationError("measure_convergence_time: empty curve");
  constexpr long kWindow = 50;
  std::vector<double> smooth(n);
  double acc = 0.0;
  for (long i = 0; i < n; ++i) {
    acc += curve_db[i];
    if (i >= kWindow) acc -= curve_db[i - kWindow];
    smooth[i] = acc / std::min(i + 1, kWindow);
  }
  long last_outside = -1;
  for (long i = n - 1; i >= 0; --i) {
    if (std::abs(smooth[i] - steady_db) > band_db) {
      last_outside = i;
      break;
    }
  }
  if (last_outside == n - 1)
    throw NotConvergedError(
        "curve never settles within the convergence band; rerun with a longer horizon");
  return last_outside + 1;
}

double fit_decay_rate(const std::vector<double>& curve_linear, double steady_linear) {
  const long n = static_cast<long>(curve_linear.size());
  std::vector<long> idx;
  std::vector<double> logr;
  for (long i = 0; i < n; ++i) {
    const double remainder = curve_linear[i] - steady_linear;
    // keep the transient: at least 3 dB above the steady-state level
    if (curve_linear[i] > 2.0 * steady_linear && remainder > 0.0) {
      idx.push_back(i);
      logr.push_back(std::log(remainder));
    }
  }
  if (idx.size() < 20)
    throw ValidationError("fit_decay_rate: transient too short to fit a rate");
  // discard the earliest tenth, where the decay is not yet geometric
  const std::size_t start = idx.size() / 10;
  double mean_x = 0.0, mean_y = 0.0;
  const std::size_t count = idx.size() - start;
  for (std::size_t j = start; j < idx.size(); ++j) {
    mean_x += static_cast<double>(idx[j]);
    mean_y += logr[j];
  }
  mean_x /= count;
  mean_y /= count;
  double sxx = 0.0, sxy = 0.0;
  for (std::size_t j = start; j < idx.size(); ++j) {
    const double dx = static_cast<double>(idx[j]) - mean_x;
    sxx += dx * dx;
    sxy += dx * (logr[j] - mean_y);
  }
  return std::exp(sxy / sxx);
}

}  // namespace coordiff
