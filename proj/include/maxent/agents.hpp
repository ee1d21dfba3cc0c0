#pragma once

// Actor losses and training loops for reverse-KL SAC, Forward SAC (critic
// only / with actor) and Bidirectional SAC.

#include "maxent/checkpoint.hpp"
#include "maxent/config.hpp"
#include "maxent/critic.hpp"
#include "maxent/envs.hpp"
#include "maxent/policy.hpp"
#include "maxent/projection.hpp"

#include <Eigen/Dense>

#include <cstdint>
#include <functional>
#include <memory>
#include <optional>
#include <random>
#include <string>
#include <vector>

namespace maxent {

enum class Algorithm { kSacReverse, kForwardCriticOnly, kForwardActor, kBidirectional };

std::string algorithm_name(Algorithm a);
/// Accepts both config names (sac_reverse, ...) and CLI names (sac, forward-critic, ...).
Algorithm parse_algorithm(const std::string& name);

struct AgentConfig {
  Algorithm algorithm = Algorithm::kBidirectional;
  double alpha = 0.2;
  double epsilon = 1.0;
  double gamma = 0.99;
  double tau = 0.005;
  double lr_actor = 3e-4;
  double lr_critic = 3e-4;
  int batch_M = 256;
  int updates_J = 1;
  long steps_L = 20000;
  QuadratureConfig quad;
  std::uint64_t seed = 0;

  int warmup_steps = 1000;
  long buffer_capacity = 1000000;
  long checkpoint_every = 0;  // 0 disables periodic checkpoints

  int actor_hidden = 64;
  bool state_dependent_std = true;
  int embed_dim = 8;
  int embed_hidden = 16;
  int subnet_hidden = 64;
  int aux_hidden = 64;
  double aux_penalty = 1.0;
  // Match log-variances instead of variances in the projection loss.
  bool log_variance_match = false;

  void validate() const;
  bool has_actor() const { return algorithm != Algorithm::kForwardCriticOnly; }
  bool needs_projection() const {
    return algorithm == Algorithm::kForwardActor || algorithm == Algorithm::kBidirectional;
  }
};

Config to_config(const AgentConfig& cfg);
/// Missing keys keep the values of `base`.
AgentConfig agent_config_from(const Config& c, AgentConfig base = {});

struct Transition {
  Eigen::VectorXd s;
  Eigen::VectorXd a;
  double r = 0.0;
  Eigen::VectorXd s_next;
  bool done = false;
  bool truncated = false;
};

class ReplayBuffer {
 public:
  ReplayBuffer(std::size_t capacity, int state_dim, int action_dim);

  void add(Transition t);
  std::size_t size() const { return items_.size(); }
  std::size_t capacity() const { return capacity_; }
  const Transition& at(std::size_t i) const { return items_.at(i); }

  /// Uniform indices with replacement; requires size() >= m.
  std::vector<std::size_t> sample_indices(std::size_t m, std::mt19937_64& rng) const;
  Batch gather(const std::vector<std::size_t>& idx) const;
  Batch sample(std::size_t m, std::mt19937_64& rng) const { return gather(sample_indices(m, rng)); }

 private:
  std::size_t capacity_;
  int state_dim_;
  int action_dim_;
  std::vector<Transition> items_;
  std::size_t next_ = 0;
};

/// Frozen-critic critic terms for actor losses.
CriticTerms critic_forward_frozen(ad::Tape& tape, const VdnACriticSpec& spec,
                                  const ad::ParamStore& params, ad::Var states, ad::Var actions);

/// mean_b [alpha log pi(a_b|s_b) - min_k Q_k(s_b, a_b)] with a_b reparameterized
/// from `noise` (B x N). Critic parameters are constants on the tape.
ad::Var reverse_kl_actor_loss(ad::Tape& tape, const PolicyVars& pv, const CriticEnsemble& critic,
                              double alpha, ad::Var states, const ad::Matrix& noise);

/// mean over batch and dims of (f* - f)^2 + (S* - S)^2 with S = exp(2 log_std),
/// or (log S* - log S)^2 for the log-variance variant.
ad::Var forward_mse_actor_loss(ad::Tape& tape, const PolicyVars& pv, const ProjectionBatch& proj,
                               bool log_variance = false);

/// reverse + epsilon * forward MSE on one tape.
ad::Var bidirectional_actor_loss(ad::Tape& tape, const PolicyVars& pv, const CriticEnsemble& critic,
                                 double alpha, double epsilon, const ProjectionBatch& proj,
                                 ad::Var states, const ad::Matrix& noise, bool log_variance = false);

struct UpdateStats {
  double critic_loss = 0.0;
  std::optional<double> actor_loss;
  std::optional<double> fkl_mse;
};

class Agent {
 public:
  Agent(const EnvSpec& env, const AgentConfig& cfg);

  const AgentConfig& config() const { return cfg_; }
  const EnvSpec& env_spec() const { return env_; }
  const PolicySpec& policy_spec() const { return policy_spec_; }
  ad::ParamStore& actor() { return actor_; }
  const ad::ParamStore& actor() const { return actor_; }
  CriticEnsemble& critic() { return critic_; }
  const CriticEnsemble& critic() const { return critic_; }

  /// Distribution the agent acts with: the actor, or the projection of the
  /// online critics for the critic-only variant.
  DiagGaussianPolicyOutput acting_distribution(const Eigen::VectorXd& state) const;
  SquashedSample act(const Eigen::VectorXd& state, const Eigen::VectorXd& noise) const;
  /// tanh of the acting mean.
  Eigen::VectorXd act_deterministic(const Eigen::VectorXd& state) const;

  /// One gradient epoch: critic step, soft update, then the actor step.
  UpdateStats update(const Batch& batch, std::mt19937_64& noise_rng);

  Checkpoint to_checkpoint(long step) const;
  static Agent from_checkpoint(const Checkpoint& ckpt);

 private:
  std::pair<ad::Matrix, Eigen::VectorXd> next_actions(const Batch& batch, std::mt19937_64& rng) const;

  EnvSpec env_;
  AgentConfig cfg_;
  PolicySpec policy_spec_;
  ad::ParamStore actor_;
  CriticEnsemble critic_;
  ad::Adam actor_opt_;
};

struct LogRow {
  long step = 0;
  std::optional<double> episodic_reward;
  std::optional<double> critic_loss;
  std::optional<double> actor_loss;
  std::optional<double> fkl_mse;
  std::optional<double> mean_log_std;
  double alpha = 0.0;
  double epsilon = 0.0;
};

struct TrainingLog {
  std::vector<LogRow> rows;
  std::vector<double> episode_returns;
  std::vector<long> episode_end_steps;
};

using TrainObserver = std::function<void(const LogRow&, const Agent&)>;

/// Runs cfg.steps_L environment steps with `agent`, warm-up first.
TrainingLog train(Env& env, Agent& agent, const TrainObserver& observer = {});
TrainingLog train(Env& env, const AgentConfig& cfg);

/// Independent RNG streams derived from the run seed.
enum class RngStream : std::uint64_t { kInit = 1, kEnv, kWarmup, kActing, kUpdate, kBuffer, kEval };
std::mt19937_64 make_rng(std::uint64_t seed, RngStream stream);

struct EvalResult {
  std::vector<double> returns;
  double mean_return = 0.0;
};

/// Deterministic policy (tanh of the mean); episode k resets with seed + k.
EvalResult evaluate(Env& env, const Agent& agent, int episodes, std::uint64_t seed);

}  // namespace maxent
