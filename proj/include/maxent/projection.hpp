#pragma once

// Forward-KL projection of the per-dimension Boltzmann marginals onto a
// diagonal Gaussian in pre-squash space (moment matching by quadrature).

#include "maxent/critic.hpp"
#include "maxent/policy.hpp"
#include "maxent/quadrature.hpp"

#include <Eigen/Dense>

#include <span>
#include <vector>

namespace maxent {

struct ProjectionResult {
  Eigen::VectorXd f_star;
  Eigen::VectorXd sigma_star;  // variances, >= kVarianceFloor
  Eigen::VectorXd log_z;
  QuadratureConfig quad;

  DiagGaussianPolicyOutput as_policy() const;
};

struct ProjectionBatch {
  ad::Matrix f_star;      // B x N
  ad::Matrix sigma_star;  // B x N
  ad::Matrix log_z;       // B x N

  ProjectionResult row(Eigen::Index b, const QuadratureConfig& quad) const;
};

/// Per dimension i: log q_i(x) = Q_i(s, tanh x) / alpha on the quadrature grid,
/// normalized and moment matched. Errors carry the failing dimension.
ProjectionBatch project_batch(const MarginalSource& source, double alpha, const ad::Matrix& states,
                              const QuadratureConfig& cfg);
ProjectionResult project_state(const MarginalSource& source, double alpha,
                               const Eigen::VectorXd& state, const QuadratureConfig& cfg);

/// Grid of log q_i(tanh x_k) values (unnormalized) for one state and dimension.
std::vector<double> marginal_log_grid(const MarginalSource& source, double alpha,
                                      const Eigen::VectorXd& state, int dim,
                                      const QuadratureConfig& cfg);

/// Acting policy of the critic-only variant: the projection itself.
SquashedSample projection_policy_act(const ProjectionResult& result, const Eigen::VectorXd& noise);

/// Log density of N(mean, var) at x.
double gaussian_log_pdf(double x, double mean, double var);

/// Discretized forward KL D(q || N(f, var)) where q is given by its normalized
/// pre-squash quadrature weights (as returned by squashed_weights).
double discretized_forward_kl(std::span<const double> weights, const QuadratureConfig& cfg,
                              double f, double var);

/// Norm of the central finite-difference gradient of discretized_forward_kl
/// with respect to (f, var).
double fd_stationarity_norm(std::span<const double> weights, const QuadratureConfig& cfg,
                            double f, double var, double h = 1e-5);

}  // namespace maxent
