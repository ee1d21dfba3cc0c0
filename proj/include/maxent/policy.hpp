#pragma once

// Diagonal Gaussian actor in pre-squash space with tanh squashing.

#include "maxent/autodiff.hpp"
#include "maxent/mlp.hpp"

#include <Eigen/Dense>

#include <random>
#include <vector>

namespace maxent {

inline constexpr double kLogStdMin = -5.0;
inline constexpr double kLogStdMax = 2.0;
inline constexpr double kJacobianEps = 1e-6;
inline constexpr double kBoundaryMargin = 1e-7;

struct PolicySpec {
  int state_dim = 1;
  int action_dim = 1;
  std::vector<int> hidden = {64, 64};
  // false: one free log-std vector shared by every state.
  bool state_dependent_std = true;

  void validate() const;
  MlpSpec trunk() const;
};

void init_policy(ad::ParamStore& params, const PolicySpec& spec, std::mt19937_64& rng);

/// Maps an unbounded raw head output into [kLogStdMin, kLogStdMax] smoothly.
double smooth_log_std(double raw);

struct DiagGaussianPolicyOutput {
  Eigen::VectorXd mean;
  Eigen::VectorXd log_std;

  Eigen::VectorXd std() const { return log_std.array().exp(); }
  Eigen::VectorXd var() const { return (2.0 * log_std.array()).exp(); }
};

struct SquashedSample {
  Eigen::VectorXd pre_squash;
  Eigen::VectorXd action;
  double log_prob = 0.0;
};

struct PolicyVars {
  ad::Var mean;     // B x N
  ad::Var log_std;  // B x N
};

PolicyVars policy_forward(ad::Tape& tape, const PolicySpec& spec, ad::ParamStore& params,
                          ad::Var states, ad::ParamMode mode = ad::ParamMode::kTrainable);

/// Untaped batch evaluation: (mean, log_std), each B x N.
std::pair<ad::Matrix, ad::Matrix> policy_eval(const PolicySpec& spec, const ad::ParamStore& params,
                                              const ad::Matrix& states);
DiagGaussianPolicyOutput policy_forward(const PolicySpec& spec, const ad::ParamStore& params,
                                        const Eigen::VectorXd& state);

/// x = f + std * noise, a = tanh(x), log_prob with the tanh Jacobian.
SquashedSample sample(const DiagGaussianPolicyOutput& out, const Eigen::VectorXd& noise);
/// Throws a boundary error when |a_i| >= 1 - kBoundaryMargin.
double log_prob_of(const DiagGaussianPolicyOutput& out, const Eigen::VectorXd& action);

struct SampleVars {
  ad::Var action;    // B x N
  ad::Var log_prob;  // B x 1
};

/// Reparameterized sample on the tape; `noise` is B x N standard normal.
SampleVars sample_on_tape(ad::Tape& tape, ad::Var mean, ad::Var log_std, const ad::Matrix& noise);

/// Untaped batch sample: actions B x N and log-probs B.
std::pair<ad::Matrix, Eigen::VectorXd> sample_batch(const ad::Matrix& mean,
                                                    const ad::Matrix& log_std,
                                                    const ad::Matrix& noise);

ad::Matrix standard_normal(Eigen::Index rows, Eigen::Index cols, std::mt19937_64& rng);

}  // namespace maxent
