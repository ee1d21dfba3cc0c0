#pragma once

// Boltzmann target q(a|s) proportional to exp(Q(s, a) / alpha) on a box, and
// brute-force tensor-grid oracles for its normalizer and marginals.

#include "maxent/autodiff.hpp"
#include "maxent/critic.hpp"

#include <Eigen/Dense>

#include <functional>
#include <vector>

namespace maxent {

/// Q(s, a) for every row of `actions` at one state.
using BatchQFn = std::function<Eigen::VectorXd(const Eigen::VectorXd& state, const ad::Matrix& actions)>;

struct BoltzmannTarget {
  BatchQFn q;
  int action_dim = 1;
  double alpha = 0.2;
  Eigen::VectorXd box_lo;  // defaults to -1 per dimension
  Eigen::VectorXd box_hi;  // defaults to +1 per dimension

  BoltzmannTarget() = default;
  BoltzmannTarget(BatchQFn q, int action_dim, double alpha);

  void validate() const;
  /// Q(s, a) / alpha for every row of `actions`.
  Eigen::VectorXd log_q_unnorm(const Eigen::VectorXd& state, const ad::Matrix& actions) const;
};

inline constexpr int kMaxOracleDim = 4;

struct GridOracleResult {
  double log_z = 0.0;
  std::vector<Eigen::VectorXd> grid;       // per dimension, points_per_dim nodes
  std::vector<Eigen::VectorXd> marginals;  // density at each node
  Eigen::VectorXd means;
  Eigen::VectorXd vars;
};

/// Default oracle resolution: 201 points for N <= 2, 61 for N = 3 or 4.
int default_points_per_dim(int action_dim);

/// Tensor-product trapezoid over points_per_dim nodes per dimension, endpoints
/// included; marginals integrate to one under the same rule.
GridOracleResult grid_oracle(const BoltzmannTarget& target, const Eigen::VectorXd& state,
                             int points_per_dim);

/// Normalized marginal density of dimension `dim` at arbitrary points, with the
/// other dimensions integrated out by the same trapezoid grid.
Eigen::VectorXd oracle_marginal_at(const BoltzmannTarget& target, const Eigen::VectorXd& state,
                                   int dim, const Eigen::VectorXd& points, int points_per_dim);

/// Wraps the min over the two online critics' q_total.
BoltzmannTarget target_from_critic(const CriticEnsemble& critic, double alpha);

}  // namespace maxent
