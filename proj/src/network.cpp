#include "network.hpp"

#include <algorithm>
#include <cmath>
#include <queue>
#include <random>

#include "errors.hpp"

namespace coordiff {

namespace {

constexpr double kColumnSumTol = 1e-12;
constexpr double kPerronTol = 1e-10;

void add_edge(Topology& t, int a, int b) {
  t.neighborhoods[a].push_back(b);
  if (a != b) t.neighborhoods[b].push_back(a);
}

void finish(Topology& t) {
  for (auto& nbrs : t.neighborhoods) {
    std::sort(nbrs.begin(), nbrs.end());
    nbrs.erase(std::unique(nbrs.begin(), nbrs.end()), nbrs.end());
  }
}

bool connected(const Topology& t) {
  if (t.agent_count == 0) return false;
  std::vector<char> seen(t.agent_count, 0);
  std::queue<int> frontier;
  frontier.push(0);
  seen[0] = 1;
  int count = 1;
  while (!frontier.empty()) {
    int k = frontier.front();
    frontier.pop();
    for (int l : t.neighborhoods[k]) {
      if (!seen[l]) {
        seen[l] = 1;
        ++count;
        frontier.push(l);
      }
    }
  }
  return count == t.agent_count;
}

}  // namespace

bool Topology::has_neighbor(int k, int l) const {
  const auto& nbrs = neighborhoods[k];
  return std::binary_search(nbrs.begin(), nbrs.end(), l);
}

void Topology::validate() const {
  if (agent_count <= 0) throw ValidationError("topology: agent count must be positive");
  if (static_cast<int>(neighborhoods.size()) != agent_count)
    throw ValidationError("topology: neighborhood list size does not match agent count");
  for (int k = 0; k < agent_count; ++k) {
    for (int l : neighborhoods[k]) {
      if (l < 0 || l >= agent_count)
        throw ValidationError("topology: neighbor index out of range at agent " + std::to_string(k));
    }
    if (!has_neighbor(k, k))
      throw ValidationError("topology: agent " + std::to_string(k) + " is missing its self-loop");
    for (int l : neighborhoods[k]) {
      if (!has_neighbor(l, k))
        throw ValidationError("topology: neighbor relation not symmetric between agents " +
                              std::to_string(k) + " and " + std::to_string(l));
    }
  }
  if (!connected(*this)) throw ValidationError("topology: graph is not connected");
}

Topology path_topology(int n) {
  Topology t;
  t.agent_count = n;
  t.neighborhoods.resize(n);
  for (int k = 0; k < n; ++k) add_edge(t, k, k);
  for (int k = 0; k + 1 < n; ++k) add_edge(t, k, k + 1);
  finish(t);
  t.validate();
  return t;
}

Topology full_topology(int n) {
  Topology t;
  t.agent_count = n;
  t.neighborhoods.resize(n);
  for (int k = 0; k < n; ++k)
    for (int l = k; l < n; ++l) add_edge(t, k, l);
  finish(t);
  t.validate();
  return t;
}

Topology random_topology(int n, double connect_prob, std::uint64_t seed) {
  if (n <= 0) throw ValidationError("random_topology: agent count must be positive");
  if (connect_prob < 0.0 || connect_prob > 1.0)
    throw ValidationError("random_topology: connection probability must lie in [0,1]");
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  for (int attempt = 0; attempt < 10000; ++attempt) {
    Topology t;
    t.agent_count = n;
    t.neighborhoods.assign(n, {});
    for (int k = 0; k < n; ++k) add_edge(t, k, k);
    for (int k = 0; k < n; ++k)
      for (int l = k + 1; l < n; ++l)
        if (unif(rng) < connect_prob) add_edge(t, k, l);
    finish(t);
    if (connected(t)) {
      t.validate();
      return t;
    }
  }
  throw ValidationError("random_topology: failed to draw a connected graph; raise connect_prob");
}

Eigen::MatrixXd build_combination_matrix(const Topology& topology, CombinationRule rule) {
  topology.validate();
  const int n = topology.agent_count;
  Eigen::MatrixXd a = Eigen::MatrixXd::Zero(n, n);
  switch (rule) {
    case CombinationRule::identity:
      a.setIdentity();
      break;
    case CombinationRule::averaging:
      for (int k = 0; k < n; ++k)
        for (int l : topology.neighborhoods[k]) a(l, k) = 1.0 / topology.degree(k);
      break;
    case CombinationRule::metropolis:
      for (int k = 0; k < n; ++k) {
        double off_sum = 0.0;
        for (int l : topology.neighborhoods[k]) {
          if (l == k) continue;
          a(l, k) = 1.0 / std::max(topology.degree(k), topology.degree(l));
          off_sum += a(l, k);
        }
        a(k, k) = 1.0 - off_sum;
      }
      break;
  }
  return a;
}

void validate_combination_matrix(const Eigen::MatrixXd& a, const Topology& topology) {
  topology.validate();
  const int n = topology.agent_count;
  if (a.rows() != n || a.cols() != n)
    throw ValidationError("combination matrix: size does not match the topology");
  for (int k = 0; k < n; ++k) {
    double col_sum = 0.0;
    for (int l = 0; l < n; ++l) {
      const double v = a(l, k);
      if (v < 0.0)
        throw ValidationError("combination matrix: negative entry (" + std::to_string(l) + "," +
                              std::to_string(k) + ")");
      if (v != 0.0 && !topology.has_neighbor(k, l))
        throw ValidationError("combination matrix: nonzero entry (" + std::to_string(l) + "," +
                              std::to_string(k) + ") outside the neighborhood of agent " +
                              std::to_string(k));
      col_sum += v;
    }
    if (std::abs(col_sum - 1.0) > kColumnSumTol)
      throw ValidationError("combination matrix: column " + std::to_string(k) +
                            " sums to " + std::to_string(col_sum) + ", expected 1");
  }
}

bool is_primitive(const Eigen::MatrixXd& P) {
  const int n = static_cast<int>(P.rows());
  if (n == 1) return P(0, 0) > 0.0;
  const int words = (n + 63) / 64;
  using BitMatrix = std::vector<std::uint64_t>;  // row-major, `words` per row
  auto all_ones = [&](const BitMatrix& m) {
    for (int i = 0; i < n; ++i) {
      for (int w = 0; w < words; ++w) {
        std::uint64_t expect = ~0ull;
        if (w == words - 1 && n % 64 != 0) expect = (1ull << (n % 64)) - 1;
        if (m[i * words + w] != expect) return false;
      }
    }
    return true;
  };
  auto multiply = [&](const BitMatrix& a, const BitMatrix& b) {
    BitMatrix out(static_cast<size_t>(n) * words, 0);
    for (int i = 0; i < n; ++i) {
      for (int k = 0; k < n; ++k) {
        if (a[i * words + k / 64] >> (k % 64) & 1ull) {
          for (int w = 0; w < words; ++w) out[i * words + w] |= b[k * words + w];
        }
      }
    }
    return out;
  };

  BitMatrix b(static_cast<size_t>(n) * words, 0);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j)
      if (P(i, j) > 0.0) b[i * words + j / 64] |= 1ull << (j % 64);

  // A primitive matrix has all powers positive beyond the Wielandt bound, so
  // checking one boolean power with exponent >= (n-1)^2 + 1 is exact.
  const long bound = static_cast<long>(n - 1) * (n - 1) + 1;
  long exponent = 1;
  BitMatrix acc = b;
  while (exponent < bound) {
    acc = multiply(acc, acc);
    exponent *= 2;
  }
  return all_ones(acc);
}

Eigen::VectorXd perron_vector(const Eigen::MatrixXd& P) {
  const int n = static_cast<int>(P.rows());
  // Direct solve: (P - I)p = 0 with the last equation replaced by 1'p = 1.
  Eigen::MatrixXd m = P - Eigen::MatrixXd::Identity(n, n);
  m.row(n - 1).setOnes();
  Eigen::VectorXd rhs = Eigen::VectorXd::Zero(n);
  rhs(n - 1) = 1.0;
  Eigen::VectorXd p = m.fullPivLu().solve(rhs);
  auto acceptable = [&](const Eigen::VectorXd& v) {
    return v.allFinite() && v.minCoeff() > 0.0 && (P * v - v).lpNorm<Eigen::Infinity>() <= kPerronTol;
  };
  if (acceptable(p)) return p;

  // Fallback for ill-conditioned solves: power iteration.
  p = Eigen::VectorXd::Constant(n, 1.0 / n);
  for (long it = 0; it < 1000000; ++it) {
    Eigen::VectorXd next = P * p;
    next /= next.sum();
    if ((next - p).lpNorm<Eigen::Infinity>() <= 1e-12) {
      p = next;
      break;
    }
    p = next;
  }
  if (!acceptable(p))
    throw ValidationError("perron_vector: iteration failed to reach the residual tolerance");
  return p;
}

NetworkAnalysis analyze_network(const Eigen::MatrixXd& A1, const Eigen::MatrixXd& A2,
                                const Eigen::VectorXd& mu, const Eigen::VectorXd& r) {
  const int n = static_cast<int>(A1.rows());
  if (A1.cols() != n || A2.rows() != n || A2.cols() != n)
    throw ValidationError("analyze_network: A1 and A2 must be square with matching size");
  if (mu.size() != n || r.size() != n)
    throw ValidationError("analyze_network: mu and r must have one entry per agent");
  auto check_left_stochastic = [&](const Eigen::MatrixXd& a, const char* name) {
    for (int k = 0; k < n; ++k) {
      if (a.col(k).minCoeff() < 0.0)
        throw ValidationError(std::string("analyze_network: ") + name + " has a negative entry in column " +
                              std::to_string(k));
      if (std::abs(a.col(k).sum() - 1.0) > 1e-9)
        throw ValidationError(std::string("analyze_network: ") + name + " column " + std::to_string(k) +
                              " does not sum to 1");
    }
  };
  check_left_stochastic(A1, "A1");
  check_left_stochastic(A2, "A2");
  for (int k = 0; k < n; ++k) {
    if (!(mu(k) > 0.0))
      throw ValidationError("analyze_network: step-size mu[" + std::to_string(k) + "] must be positive");
    if (r(k) < 0.0 || r(k) >= 1.0)
      throw ValidationError("analyze_network: missing probability r[" + std::to_string(k) +
                            "] must lie in [0,1)");
  }

  NetworkAnalysis net;
  net.A1 = A1;
  net.A2 = A2;
  net.P = A1 * A2;
  net.mu = mu;
  net.r = r;
  net.mu_max = mu.maxCoeff();
  net.primitive = is_primitive(net.P);
  if (!net.primitive)
    throw ValidationError("analyze_network: P = A1*A2 is not primitive; the steady-state "
                          "formulas are undefined for this network");
  net.p = perron_vector(net.P);
  net.q = mu.asDiagonal() * (A2 * net.p);
  return net;
}

}  // namespace coordiff
