#include "maxent/target.hpp"

#include "maxent/error.hpp"

#include <cmath>
#include <limits>

namespace maxent {
namespace {

constexpr const char* kModule = "maxent_target";

Eigen::VectorXd linspace(double lo, double hi, int n) {
  return Eigen::VectorXd::LinSpaced(n, lo, hi);
}

Eigen::VectorXd trapezoid_weights(int n, double h) {
  Eigen::VectorXd w = Eigen::VectorXd::Constant(n, h);
  w(0) *= 0.5;
  w(n - 1) *= 0.5;
  return w;
}

// Every node of the tensor grid, dimension 0 varying slowest.
ad::Matrix tensor_nodes(const std::vector<Eigen::VectorXd>& axes) {
  Eigen::Index total = 1;
  for (const auto& a : axes) total *= a.size();
  ad::Matrix nodes(total, Eigen::Index(axes.size()));
  for (Eigen::Index r = 0; r < total; ++r) {
    Eigen::Index rem = r;
    for (int d = int(axes.size()) - 1; d >= 0; --d) {
      const Eigen::Index n = axes[d].size();
      nodes(r, d) = axes[d](rem % n);
      rem /= n;
    }
  }
  return nodes;
}

void check_oracle_args(const BoltzmannTarget& target, int points_per_dim) {
  target.validate();
  if (target.action_dim > kMaxOracleDim) {
    throw Error(ErrorKind::kDimensionTooLarge, kModule,
                "grid oracle supports N <= " + std::to_string(kMaxOracleDim) + ", got " +
                    std::to_string(target.action_dim));
  }
  if (points_per_dim < 16) {
    throw Error(ErrorKind::kInvalidArgument, kModule, "points_per_dim must be >= 16");
  }
}

double checked_max(const Eigen::VectorXd& v) {
  for (Eigen::Index i = 0; i < v.size(); ++i) {
    if (std::isnan(v(i)) || v(i) == std::numeric_limits<double>::infinity()) {
      throw Error(ErrorKind::kNonFinite, kModule, "log density is not finite on the oracle grid");
    }
  }
  const double m = v.maxCoeff();
  if (m == -std::numeric_limits<double>::infinity()) {
    throw Error(ErrorKind::kDegenerateDensity, kModule, "density is zero on the whole grid");
  }
  return m;
}

}  // namespace

BoltzmannTarget::BoltzmannTarget(BatchQFn q_fn, int n, double a)
    : q(std::move(q_fn)),
      action_dim(n),
      alpha(a),
      box_lo(Eigen::VectorXd::Constant(n, -1.0)),
      box_hi(Eigen::VectorXd::Constant(n, 1.0)) {}

void BoltzmannTarget::validate() const {
  if (action_dim < 1) throw Error(ErrorKind::kInvalidArgument, kModule, "action_dim must be >= 1");
  if (!(alpha > 0.0)) throw Error(ErrorKind::kInvalidArgument, kModule, "alpha must be positive");
  if (!q) throw Error(ErrorKind::kInvalidArgument, kModule, "target has no Q function");
  if (box_lo.size() != action_dim || box_hi.size() != action_dim) {
    throw Error(ErrorKind::kDimensionMismatch, kModule, "box bounds do not match action_dim");
  }
  for (int i = 0; i < action_dim; ++i) {
    if (!std::isfinite(box_lo(i)) || !std::isfinite(box_hi(i)) || !(box_lo(i) < box_hi(i))) {
      throw Error(ErrorKind::kInvalidArgument, kModule,
                  "box bounds must be finite with lo < hi in dimension " + std::to_string(i));
    }
  }
}

Eigen::VectorXd BoltzmannTarget::log_q_unnorm(const Eigen::VectorXd& state,
                                              const ad::Matrix& actions) const {
  return q(state, actions) / alpha;
}

int default_points_per_dim(int action_dim) { return action_dim <= 2 ? 201 : 61; }

GridOracleResult grid_oracle(const BoltzmannTarget& target, const Eigen::VectorXd& state,
                             int points_per_dim) {
  check_oracle_args(target, points_per_dim);
  const int N = target.action_dim;
  const int P = points_per_dim;
  GridOracleResult out;
  std::vector<Eigen::VectorXd> w;
  for (int d = 0; d < N; ++d) {
    out.grid.push_back(linspace(target.box_lo(d), target.box_hi(d), P));
    w.push_back(trapezoid_weights(P, (target.box_hi(d) - target.box_lo(d)) / (P - 1)));
  }
  const ad::Matrix nodes = tensor_nodes(out.grid);
  const Eigen::VectorXd lq = target.log_q_unnorm(state, nodes);
  const double m = checked_max(lq);

  for (int d = 0; d < N; ++d) out.marginals.push_back(Eigen::VectorXd::Zero(P));
  double z = 0.0;
  for (Eigen::Index r = 0; r < nodes.rows(); ++r) {
    // Decode the multi-index once; accumulate the full-weight mass and, for
    // each marginal, the mass with its own axis weight left out.
    Eigen::Index rem = r;
    int idx[kMaxOracleDim];
    for (int d = N - 1; d >= 0; --d) {
      idx[d] = int(rem % P);
      rem /= P;
    }
    const double e = std::exp(lq(r) - m);
    double wall = 1.0;
    for (int d = 0; d < N; ++d) wall *= w[d](idx[d]);
    z += wall * e;
    for (int d = 0; d < N; ++d) out.marginals[d](idx[d]) += wall / w[d](idx[d]) * e;
  }
  out.log_z = std::log(z) + m;
  out.means.resize(N);
  out.vars.resize(N);
  for (int d = 0; d < N; ++d) {
    Eigen::VectorXd& p = out.marginals[d];
    p /= w[d].dot(p);
    const Eigen::VectorXd& x = out.grid[d];
    out.means(d) = w[d].dot(p.cwiseProduct(x));
    out.vars(d) = w[d].dot(p.cwiseProduct((x.array() - out.means(d)).square().matrix()));
  }
  return out;
}

Eigen::VectorXd oracle_marginal_at(const BoltzmannTarget& target, const Eigen::VectorXd& state,
                                   int dim, const Eigen::VectorXd& points, int points_per_dim) {
  check_oracle_args(target, points_per_dim);
  const int N = target.action_dim;
  const int P = points_per_dim;
  if (dim < 0 || dim >= N) throw Error(ErrorKind::kInvalidArgument, kModule, "dim out of range");
  std::vector<Eigen::VectorXd> axes;
  Eigen::VectorXd w_other = Eigen::VectorXd::Ones(1);
  for (int d = 0; d < N; ++d) {
    if (d == dim) continue;
    axes.push_back(linspace(target.box_lo(d), target.box_hi(d), P));
    const Eigen::VectorXd wd = trapezoid_weights(P, (target.box_hi(d) - target.box_lo(d)) / (P - 1));
    Eigen::VectorXd next(w_other.size() * P);
    for (Eigen::Index i = 0; i < w_other.size(); ++i) next.segment(i * P, P) = w_other(i) * wd;
    w_other = std::move(next);
  }
  const ad::Matrix rest = axes.empty() ? ad::Matrix(1, 0) : tensor_nodes(axes);
  const Eigen::Index R = rest.rows();
  const Eigen::Index K = points.size();

  ad::Matrix nodes(R * K, N);
  for (Eigen::Index k = 0; k < K; ++k) {
    for (Eigen::Index r = 0; r < R; ++r) {
      int c = 0;
      for (int d = 0; d < N; ++d) nodes(k * R + r, d) = d == dim ? points(k) : rest(r, c++);
    }
  }
  const Eigen::VectorXd lq = target.log_q_unnorm(state, nodes);
  const double m = checked_max(lq);
  Eigen::VectorXd unnorm(K);
  for (Eigen::Index k = 0; k < K; ++k) {
    unnorm(k) = w_other.dot((lq.segment(k * R, R).array() - m).exp().matrix());
  }
  // Normalizer from the oracle's own grid so the values match grid_oracle.
  const GridOracleResult full = grid_oracle(target, state, points_per_dim);
  return (unnorm.array().log() + m - full.log_z).exp().matrix();
}

BoltzmannTarget target_from_critic(const CriticEnsemble& critic, double alpha) {
  const CriticEnsemble* c = &critic;
  return BoltzmannTarget(
      [c](const Eigen::VectorXd& state, const ad::Matrix& actions) {
        const ad::Matrix states = state.transpose().replicate(actions.rows(), 1);
        return c->min_online_q(states, actions);
      },
      critic.spec().action_dim, alpha);
}

}  // namespace maxent
