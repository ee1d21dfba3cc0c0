#pragma once

// Toy continuous-control environments with actions in (-1, 1)^N.

#include <Eigen/Dense>

#include <cstdint>
#include <memory>
#include <string>
#include <vector>

namespace maxent {

struct EnvSpec {
  std::string name;
  int state_dim = 1;
  int action_dim = 1;
  int max_episode_steps = 1;
  double reward_min = 0.0;
  double reward_max = 0.0;
};

struct StepResult {
  Eigen::VectorXd state;
  double reward = 0.0;
  bool done = false;
  // Episode ended by the time limit rather than a terminal state.
  bool truncated = false;
};

class Env {
 public:
  virtual ~Env() = default;
  virtual const EnvSpec& spec() const = 0;
  virtual Eigen::VectorXd reset(std::uint64_t seed) = 0;
  /// Throws an out-of-box error for actions outside [-1, 1]^N or non-finite.
  virtual StepResult step(const Eigen::VectorXd& action) = 0;
};

/// quadratic_bandit_1d, coupled_bandit_2d, pendulum1d, pendulum2d_coupled.
std::unique_ptr<Env> make_env(const std::string& name);
std::vector<std::string> env_names();

// Analytic optima of the bandits.
inline constexpr double kQuadraticBanditOptimumAction = 0.4;
inline constexpr double kCoupledBanditCoupling = 0.8;

double quadratic_bandit_reward(double a);
double coupled_bandit_reward(double a1, double a2);
/// Stationary point of the coupled bandit's quadratic reward.
Eigen::Vector2d coupled_bandit_optimum();

}  // namespace maxent
