#include "maxent/diagnostics.hpp"

#include "maxent/agents.hpp"
#include "maxent/error.hpp"
#include "maxent/projection.hpp"

#include <cmath>

namespace maxent {
namespace {

constexpr const char* kModule = "maxent_diag";

double grid_step(const Eigen::VectorXd& grid) { return 2.0 / double(grid.size()); }

std::pair<double, double> grid_moments(const Eigen::VectorXd& grid, const Eigen::VectorXd& p,
                                       double dx) {
  const double mean = (grid.array() * p.array()).sum() * dx;
  const double var = ((grid.array() - mean).square() * p.array()).sum() * dx;
  return {mean, var};
}

}  // namespace

Eigen::VectorXd comparison_grid(int points) {
  if (points < 2) throw Error(ErrorKind::kInvalidArgument, kModule, "grid needs >= 2 points");
  const double dx = 2.0 / points;
  Eigen::VectorXd g(points);
  for (int k = 0; k < points; ++k) g(k) = -1.0 + (k + 0.5) * dx;
  return g;
}

Eigen::VectorXd normalize_log_density(const Eigen::VectorXd& log_p, double dx) {
  const double m = log_p.maxCoeff();
  if (!std::isfinite(m)) {
    throw Error(ErrorKind::kDegenerateDensity, kModule, "density has no finite mass on the grid");
  }
  const double log_z = m + std::log((log_p.array() - m).exp().sum() * dx);
  return (log_p.array() - log_z).matrix();
}

Eigen::VectorXd squashed_gaussian_log_density(const Eigen::VectorXd& grid, double mean, double var) {
  Eigen::VectorXd lp(grid.size());
  for (Eigen::Index k = 0; k < grid.size(); ++k) {
    const double a = grid(k);
    lp(k) = gaussian_log_pdf(std::atanh(a), mean, var) - std::log1p(-a * a);
  }
  return normalize_log_density(lp, grid_step(grid));
}

double total_variation(const Eigen::VectorXd& p, const Eigen::VectorXd& q, double dx) {
  return 0.5 * (p - q).cwiseAbs().sum() * dx;
}

double grid_forward_kl(const Eigen::VectorXd& log_q, const Eigen::VectorXd& log_p, double dx) {
  double s = 0.0;
  for (Eigen::Index k = 0; k < log_q.size(); ++k) {
    const double q = std::exp(log_q(k));
    if (q > 0.0) s += q * (log_q(k) - log_p(k));
  }
  return s * dx;
}

double DistributionComparison::max_tv() const {
  double m = 0.0;
  for (const auto& d : dims) m = std::max(m, d.tv_vdna);
  return m;
}

namespace {

// Oracle and VDN-a columns in log form, shared by both comparisons.
struct MarginalColumns {
  std::vector<Eigen::VectorXd> log_oracle;
  std::vector<Eigen::VectorXd> log_vdna;
};

MarginalColumns marginal_columns(const CriticEnsemble& critic, const BoltzmannTarget& target,
                                 const Eigen::VectorXd& state, const Eigen::VectorXd& grid,
                                 int oracle_points) {
  const int N = target.action_dim;
  if (N != critic.spec().action_dim) {
    throw Error(ErrorKind::kDimensionMismatch, kModule, "target and critic disagree on N");
  }
  if (N > kMaxOracleDim) {
    throw Error(ErrorKind::kDimensionTooLarge, kModule,
                "oracle comparison supports N <= " + std::to_string(kMaxOracleDim));
  }
  const int P = oracle_points > 0 ? oracle_points : default_points_per_dim(N);
  const double dx = grid_step(grid);
  const MarginalSource src = critic.marginals();
  MarginalColumns cols;
  for (int i = 0; i < N; ++i) {
    const Eigen::VectorXd p = oracle_marginal_at(target, state, i, grid, P);
    cols.log_oracle.push_back(normalize_log_density(p.array().log().matrix(), dx));
    const Eigen::VectorXd lq = src.grid(i, state.transpose(), grid).row(0).transpose() / target.alpha;
    cols.log_vdna.push_back(normalize_log_density(lq, dx));
  }
  return cols;
}

}  // namespace

DistributionComparison compare_marginals(const CriticEnsemble& critic, const BoltzmannTarget& target,
                                         const Eigen::VectorXd& state, int grid_points,
                                         int oracle_points) {
  const Eigen::VectorXd grid = comparison_grid(grid_points);
  const double dx = grid_step(grid);
  const MarginalColumns cols = marginal_columns(critic, target, state, grid, oracle_points);
  DistributionComparison out;
  for (int i = 0; i < target.action_dim; ++i) {
    DimComparison d;
    d.grid = grid;
    d.oracle = cols.log_oracle[i].array().exp();
    d.vdna = cols.log_vdna[i].array().exp();
    d.tv_vdna = total_variation(d.oracle, d.vdna, dx);
    const auto [mo, vo] = grid_moments(grid, d.oracle, dx);
    const auto [mv, vv] = grid_moments(grid, d.vdna, dx);
    d.oracle_mean = mo;
    d.oracle_var = vo;
    d.mean_err = std::fabs(mv - mo);
    d.var_err = std::fabs(vv - vo);
    out.dims.push_back(std::move(d));
  }
  return out;
}

ad::ParamStore reverse_step_actor(const CriticEnsemble& critic, const PolicySpec& policy,
                                  const ad::ParamStore& actor, double alpha,
                                  const Eigen::VectorXd& state, int samples, double lr,
                                  std::uint64_t seed) {
  if (samples < 1) throw Error(ErrorKind::kInvalidArgument, kModule, "samples must be >= 1");
  ad::ParamStore next = actor;
  std::mt19937_64 rng(seed);
  const ad::Matrix noise = standard_normal(samples, policy.action_dim, rng);
  ad::Tape tape;
  const ad::Var states = tape.constant(state.transpose().replicate(samples, 1));
  const PolicyVars pv = policy_forward(tape, policy, next, states);
  const ad::Var loss = reverse_kl_actor_loss(tape, pv, critic, alpha, states, noise);
  next.zero_grad();
  tape.backward(loss);
  ad::Adam opt(ad::AdamConfig{lr});
  opt.step(next);
  return next;
}

DistributionComparison compare_update_step(const CriticEnsemble& critic, const PolicySpec& policy,
                                           const ad::ParamStore& old_actor, double alpha,
                                           const UpdateStepConfig& cfg) {
  const Eigen::VectorXd grid = comparison_grid(cfg.grid_points);
  const double dx = grid_step(grid);
  const BoltzmannTarget target = target_from_critic(critic, alpha);
  const MarginalColumns cols = marginal_columns(critic, target, cfg.state, grid, cfg.oracle_points);

  const ProjectionResult proj = project_state(critic.marginals(), alpha, cfg.state, cfg.quad);
  const ad::ParamStore stepped =
      reverse_step_actor(critic, policy, old_actor, alpha, cfg.state, cfg.samples, cfg.lr, cfg.seed);
  const DiagGaussianPolicyOutput rev = policy_forward(policy, stepped, cfg.state);

  DistributionComparison out;
  for (int i = 0; i < target.action_dim; ++i) {
    DimComparison d;
    d.grid = grid;
    d.oracle = cols.log_oracle[i].array().exp();
    d.vdna = cols.log_vdna[i].array().exp();
    d.tv_vdna = total_variation(d.oracle, d.vdna, dx);
    const Eigen::VectorXd lp_proj = squashed_gaussian_log_density(grid, proj.f_star(i), proj.sigma_star(i));
    const Eigen::VectorXd lp_rev =
        squashed_gaussian_log_density(grid, rev.mean(i), std::exp(2.0 * rev.log_std(i)));
    d.projection = lp_proj.array().exp();
    d.reverse_step = lp_rev.array().exp();
    d.fkl_projection = grid_forward_kl(cols.log_oracle[i], lp_proj, dx);
    d.fkl_reverse = grid_forward_kl(cols.log_oracle[i], lp_rev, dx);
    const auto [mo, vo] = grid_moments(grid, d.oracle, dx);
    d.oracle_mean = mo;
    d.oracle_var = vo;
    out.fkl_projection += d.fkl_projection;
    out.fkl_reverse += d.fkl_reverse;
    out.dims.push_back(std::move(d));
  }
  return out;
}

}  // namespace maxent
