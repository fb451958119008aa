#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <vector>

namespace coordiff {

// Undirected connected graph with self-loops; neighborhoods include the
// agent itself.
struct Topology {
  int agent_count = 0;
  std::vector<std::vector<int>> neighborhoods;

  int degree(int k) const { return static_cast<int>(neighborhoods[k].size()); }
  bool has_neighbor(int k, int l) const;
  // Throws ValidationError unless every agent is its own neighbor, the
  // neighbor relation is symmetric, and the graph is connected.
  void validate() const;
};

Topology path_topology(int n);
Topology full_topology(int n);
// Erdos-Renyi with the given connection probability; retries until connected,
// self-loops always present.  Deterministic given the seed.
Topology random_topology(int n, double connect_prob, std::uint64_t seed);

enum class CombinationRule { identity, averaging, metropolis };

// Left-stochastic combination matrix over the given topology.  Columns sum to
// one, entries vanish off-neighborhood; the metropolis rule yields a
// symmetric doubly-stochastic matrix.
Eigen::MatrixXd build_combination_matrix(const Topology& topology, CombinationRule rule);

// Validates a custom matrix: nonnegative entries, unit column sums (within
// 1e-12), zeros off-neighborhood.  Throws ValidationError naming the
// offending column or entry.
void validate_combination_matrix(const Eigen::MatrixXd& a, const Topology& topology);

struct NetworkAnalysis {
  Eigen::MatrixXd A1, A2, P;  // P = A1 * A2
  bool primitive = false;
  Eigen::VectorXd p;   // Perron vector of P: Pp = p, 1'p = 1, p > 0
  Eigen::VectorXd q;   // diag(mu) * A2 * p
  Eigen::VectorXd mu;  // per-agent step-sizes
  Eigen::VectorXd r;   // per-agent missing probabilities
  double mu_max = 0.0;
};

// Exact primitivity test on the zero/nonzero structure of P via boolean
// matrix squaring up to the Wielandt bound (N-1)^2 + 1.
bool is_primitive(const Eigen::MatrixXd& P);

// Perron vector of a primitive left-stochastic matrix; direct linear solve
// with a power-iteration fallback.  Residual ||Pp - p||_inf <= 1e-10.
Eigen::VectorXd perron_vector(const Eigen::MatrixXd& P);

// Validates inputs, requires P = A1*A2 primitive, and assembles the weight
// vectors that parameterize the steady-state formulas.
NetworkAnalysis analyze_network(const Eigen::MatrixXd& A1, const Eigen::MatrixXd& A2,
                                const Eigen::VectorXd& mu, const Eigen::VectorXd& r);

}  // namespace coordiff
