#pragma once

// Marginal-fidelity and update-step comparisons against the grid oracle, on a
// shared post-squash grid.

#include "maxent/critic.hpp"
#include "maxent/policy.hpp"
#include "maxent/quadrature.hpp"
#include "maxent/target.hpp"

#include <Eigen/Dense>

#include <cstdint>
#include <vector>

namespace maxent {

inline constexpr int kComparisonGridPoints = 401;

/// Midpoints of `points` equal cells over (-1, 1).
Eigen::VectorXd comparison_grid(int points = kComparisonGridPoints);

/// Renormalizes log-density values so that sum(exp) * dx = 1.
Eigen::VectorXd normalize_log_density(const Eigen::VectorXd& log_p, double dx);
/// Log density of tanh(x), x ~ N(mean, var), at post-squash points, renormalized.
Eigen::VectorXd squashed_gaussian_log_density(const Eigen::VectorXd& grid, double mean, double var);

double total_variation(const Eigen::VectorXd& p, const Eigen::VectorXd& q, double dx);
/// sum q (log q - log p) dx from log densities.
double grid_forward_kl(const Eigen::VectorXd& log_q, const Eigen::VectorXd& log_p, double dx);

struct DimComparison {
  Eigen::VectorXd grid;
  Eigen::VectorXd oracle;        // true Boltzmann marginal
  Eigen::VectorXd vdna;          // normalized exp(Q_i / alpha)
  Eigen::VectorXd projection;    // forward-projected Gaussian, squashed
  Eigen::VectorXd reverse_step;  // policy after one reverse-KL step, squashed
  double tv_vdna = 0.0;
  double mean_err = 0.0;  // |mean(vdna) - mean(oracle)|
  double var_err = 0.0;   // |var(vdna) - var(oracle)|
  double oracle_mean = 0.0;
  double oracle_var = 0.0;
  double fkl_projection = 0.0;
  double fkl_reverse = 0.0;
};

struct DistributionComparison {
  std::vector<DimComparison> dims;
  double fkl_projection = 0.0;  // summed over dimensions
  double fkl_reverse = 0.0;

  double max_tv() const;
};

/// Fills grid, oracle and vdna columns plus TV and moment errors.
DistributionComparison compare_marginals(const CriticEnsemble& critic, const BoltzmannTarget& target,
                                         const Eigen::VectorXd& state,
                                         int grid_points = kComparisonGridPoints,
                                         int oracle_points = 0);

struct UpdateStepConfig {
  Eigen::VectorXd state;
  double lr = 3e-4;      // step size of the single reverse-KL update
  int samples = 256;     // reparameterized samples at the probe state
  std::uint64_t seed = 0;
  QuadratureConfig quad;
  int grid_points = kComparisonGridPoints;
  int oracle_points = 0;  // 0 picks the oracle default
};

/// Forward projection versus one reverse-KL step from `old_actor`, both scored
/// by forward KL to the oracle marginals of min-twin Q / alpha.
DistributionComparison compare_update_step(const CriticEnsemble& critic, const PolicySpec& policy,
                                           const ad::ParamStore& old_actor, double alpha,
                                           const UpdateStepConfig& cfg);

/// Copy of `actor` after one Adam step (fresh moments) on the reverse-KL loss at one state.
ad::ParamStore reverse_step_actor(const CriticEnsemble& critic, const PolicySpec& policy,
                                  const ad::ParamStore& actor, double alpha,
                                  const Eigen::VectorXd& state, int samples, double lr,
                                  std::uint64_t seed);

}  // namespace maxent
