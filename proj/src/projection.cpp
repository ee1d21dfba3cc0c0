#include "maxent/projection.hpp"

#include "maxent/error.hpp"

#include <cmath>
#include <limits>
#include <numbers>

namespace maxent {
namespace {

constexpr const char* kModule = "projection";

Eigen::VectorXd squashed_grid(const QuadratureConfig& cfg) {
  const std::vector<double> x = cfg.grid();
  Eigen::VectorXd a(x.size());
  for (std::size_t k = 0; k < x.size(); ++k) a(k) = std::tanh(x[k]);
  return a;
}

}  // namespace

DiagGaussianPolicyOutput ProjectionResult::as_policy() const {
  return {f_star, 0.5 * sigma_star.array().log().matrix()};
}

ProjectionResult ProjectionBatch::row(Eigen::Index b, const QuadratureConfig& quad) const {
  return {f_star.row(b).transpose(), sigma_star.row(b).transpose(), log_z.row(b).transpose(), quad};
}

ProjectionBatch project_batch(const MarginalSource& source, double alpha, const ad::Matrix& states,
                              const QuadratureConfig& cfg) {
  cfg.validate();
  if (!(alpha > 0.0)) throw Error(ErrorKind::kInvalidArgument, kModule, "alpha must be positive");
  const Eigen::Index B = states.rows();
  const int N = source.action_dim;
  const Eigen::VectorXd a_grid = squashed_grid(cfg);
  ProjectionBatch out{ad::Matrix(B, N), ad::Matrix(B, N), ad::Matrix(B, N)};
  std::vector<double> row(a_grid.size());
  for (int i = 0; i < N; ++i) {
    const ad::Matrix q = source.grid(i, states, a_grid);
    for (Eigen::Index b = 0; b < B; ++b) {
      for (Eigen::Index k = 0; k < a_grid.size(); ++k) row[k] = q(b, k) / alpha;
      try {
        const SquashedMoments m = squashed_moments(row, cfg);
        out.f_star(b, i) = m.mean;
        out.sigma_star(b, i) = m.var;
        out.log_z(b, i) = m.log_z;
      } catch (const Error& e) {
        throw Error(e.kind(), kModule,
                    "dimension " + std::to_string(i) + ", state " + std::to_string(b) + ": " +
                        e.detail());
      }
    }
  }
  return out;
}

ProjectionResult project_state(const MarginalSource& source, double alpha,
                               const Eigen::VectorXd& state, const QuadratureConfig& cfg) {
  return project_batch(source, alpha, state.transpose(), cfg).row(0, cfg);
}

std::vector<double> marginal_log_grid(const MarginalSource& source, double alpha,
                                      const Eigen::VectorXd& state, int dim,
                                      const QuadratureConfig& cfg) {
  const ad::Matrix q = source.grid(dim, state.transpose(), squashed_grid(cfg));
  std::vector<double> out(q.cols());
  for (Eigen::Index k = 0; k < q.cols(); ++k) out[k] = q(0, k) / alpha;
  return out;
}

SquashedSample projection_policy_act(const ProjectionResult& result, const Eigen::VectorXd& noise) {
  return sample(result.as_policy(), noise);
}

double gaussian_log_pdf(double x, double mean, double var) {
  const double d = x - mean;
  return -0.5 * d * d / var - 0.5 * std::log(2.0 * std::numbers::pi * var);
}

double discretized_forward_kl(std::span<const double> weights, const QuadratureConfig& cfg,
                              double f, double var) {
  const std::vector<double> x = cfg.grid();
  if (weights.size() != x.size()) {
    throw Error(ErrorKind::kDimensionMismatch, kModule, "weights do not match the grid");
  }
  if (!(var > 0.0)) throw Error(ErrorKind::kInvalidArgument, kModule, "variance must be positive");
  std::vector<double> integrand(x.size());
  for (std::size_t k = 0; k < x.size(); ++k) {
    const double w = weights[k];
    integrand[k] = w > 0.0 ? w * (std::log(w) - gaussian_log_pdf(x[k], f, var)) : 0.0;
  }
  return simpson(integrand, cfg.step());
}

double fd_stationarity_norm(std::span<const double> weights, const QuadratureConfig& cfg,
                            double f, double var, double h) {
  const double df = (discretized_forward_kl(weights, cfg, f + h, var) -
                     discretized_forward_kl(weights, cfg, f - h, var)) /
                    (2.0 * h);
  const double hv = std::min(h, 0.5 * var);
  const double dv = (discretized_forward_kl(weights, cfg, f, var + hv) -
                     discretized_forward_kl(weights, cfg, f, var - hv)) /
                    (2.0 * hv);
  return std::hypot(df, dv);
}

}  // namespace maxent
