#pragma once

// VDN-a soft Q-function: Q(s, a) = sum_i Q_i(s, embed_i(a_i)) + U(s, a).

#include "maxent/autodiff.hpp"
#include "maxent/mlp.hpp"

#include <Eigen/Dense>

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

namespace maxent {

struct VdnACriticSpec {
  int state_dim = 1;
  int action_dim = 1;
  int embed_dim = 8;
  int embed_hidden = 16;
  int subnet_hidden = 64;
  int aux_hidden = 64;

  void validate() const;
  MlpSpec embed_mlp() const;
  MlpSpec subnet_mlp() const;
  MlpSpec aux_mlp() const;
};

// Parameter prefixes within one critic's store.
std::string embed_prefix(int dim);
std::string subnet_prefix(int dim);
inline const std::string kAuxPrefix = "aux.";

void init_critic(ad::ParamStore& params, const VdnACriticSpec& spec, std::mt19937_64& rng);

struct CriticTerms {
  ad::Var q_total;
  std::vector<ad::Var> subnets;  // B x 1 each
  ad::Var aux;                   // B x 1
};

/// Taped evaluation; rows of `states` (B x state_dim) pair with rows of `actions` (B x N).
CriticTerms critic_forward(ad::Tape& tape, const VdnACriticSpec& spec, ad::ParamStore& params,
                           ad::Var states, ad::Var actions,
                           ad::ParamMode mode = ad::ParamMode::kTrainable);

/// q_total for each row, no tape.
Eigen::VectorXd critic_eval(const VdnACriticSpec& spec, const ad::ParamStore& params,
                            const ad::Matrix& states, const ad::Matrix& actions);
double q_total(const VdnACriticSpec& spec, const ad::ParamStore& params,
               const Eigen::VectorXd& state, const Eigen::VectorXd& action);
/// Subnet output Q_i(s, a_i) alone; `dim` is zero-based.
double q_marginal(const VdnACriticSpec& spec, const ad::ParamStore& params,
                  const Eigen::VectorXd& state, int dim, double a_i);
/// Aux network output U(s, a) for each row.
Eigen::VectorXd aux_eval(const VdnACriticSpec& spec, const ad::ParamStore& params,
                         const ad::Matrix& states, const ad::Matrix& actions);

/// Q_i(s_b, a_k) for every state row b and every grid value a_k: B x K.
/// The first subnet layer is split into its state and embedding halves so the
/// embedding of the grid is computed once.
ad::Matrix subnet_grid(const VdnACriticSpec& spec, const ad::ParamStore& params,
                       const ad::Matrix& states, int dim, const Eigen::VectorXd& a_grid);

/// Per-dimension marginal potentials Q_i(s, a_i) on a grid of a_i values,
/// returned as B x K for B states.
struct MarginalSource {
  int action_dim = 1;
  std::function<ad::Matrix(int dim, const ad::Matrix& states, const Eigen::VectorXd& a_grid)> grid;
};

struct Batch {
  ad::Matrix states;       // B x state_dim
  ad::Matrix actions;      // B x N
  Eigen::VectorXd rewards;
  ad::Matrix next_states;
  Eigen::VectorXd terminal;  // 1 where the episode ended without truncation

  Eigen::Index size() const { return states.rows(); }
};

/// Two online critics and their targets.
class CriticEnsemble {
 public:
  CriticEnsemble(VdnACriticSpec spec, double tau, ad::AdamConfig opt, std::mt19937_64& rng);

  const VdnACriticSpec& spec() const { return spec_; }
  double tau() const { return tau_; }
  ad::ParamStore& online(int i) { return online_[i]; }
  const ad::ParamStore& online(int i) const { return online_[i]; }
  const ad::ParamStore& target(int i) const { return target_[i]; }
  ad::ParamStore& target_mut(int i) { return target_[i]; }
  ad::Adam& optimizer(int i) { return opt_[i]; }

  /// target <- tau * online + (1 - tau) * target, both critics.
  void soft_update();

  Eigen::VectorXd min_online_q(const ad::Matrix& states, const ad::Matrix& actions) const;
  Eigen::VectorXd min_target_q(const ad::Matrix& states, const ad::Matrix& actions) const;
  /// Pointwise min over the two online critics' subnets.
  MarginalSource marginals() const;

  /// All four stores under critic1./critic2./target1./target2.
  ad::ParamStore export_params() const;
  void import_params(const ad::ParamStore& merged);

 private:
  VdnACriticSpec spec_;
  double tau_;
  ad::ParamStore online_[2];
  ad::ParamStore target_[2];
  ad::Adam opt_[2];
};

/// The returned source keeps references to `a` and `b`.
MarginalSource twin_min_marginals(const VdnACriticSpec& spec, const ad::ParamStore& a,
                                  const ad::ParamStore& b);

struct BellmanStats {
  double mse = 0.0;  // mean (Q - y)^2, averaged over both critics
  Eigen::VectorXd targets;
};

/// Bellman targets y = r + gamma (1 - terminal)(min target Q(s', a') - alpha log pi(a'|s')).
/// Throws naming the transition index when a target is not finite.
Eigen::VectorXd bellman_targets(const CriticEnsemble& ens, const Batch& batch,
                                const ad::Matrix& next_actions,
                                const Eigen::VectorXd& next_log_probs, double alpha, double gamma);

/// One optimizer step per online critic on 0.5 * mean (Q - y)^2 plus
/// aux_penalty * mean U^2.
BellmanStats bellman_update(CriticEnsemble& ens, const Batch& batch, const ad::Matrix& next_actions,
                            const Eigen::VectorXd& next_log_probs, double alpha, double gamma,
                            double aux_penalty = 0.0);

/// Regression step of one critic toward fixed targets; shared with the Bellman update.
double critic_regression_step(const VdnACriticSpec& spec, ad::ParamStore& params, ad::Adam& opt,
                              const ad::Matrix& states, const ad::Matrix& actions,
                              const Eigen::VectorXd& targets, double aux_penalty);

}  // namespace maxent
