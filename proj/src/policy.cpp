#include "maxent/policy.hpp"

#include "maxent/error.hpp"

#include <cmath>
#include <numbers>

namespace maxent {
namespace {

constexpr const char* kModule = "squashed_gaussian_policy";
constexpr double kHalfLog2Pi = 0.91893853320467274178;

const std::string kTrunk = "trunk.";
const std::string kMeanHead = "mean.";
const std::string kLogStdHead = "log_std.";
const std::string kFreeLogStd = "log_std_free";

MlpSpec head_spec(const PolicySpec& spec) {
  return {spec.hidden.back(), {}, spec.action_dim, Activation::kTanh};
}

}  // namespace

void PolicySpec::validate() const {
  bool ok = state_dim >= 1 && action_dim >= 1 && !hidden.empty();
  for (int h : hidden) ok = ok && h >= 1;
  if (!ok) throw Error(ErrorKind::kInvalidArgument, kModule, "policy dimensions must be >= 1");
}

// The trunk ends in a hidden layer; its output gets the activation applied by
// the caller before the heads.
MlpSpec PolicySpec::trunk() const {
  return {state_dim, std::vector<int>(hidden.begin(), hidden.end() - 1), hidden.back(),
          Activation::kTanh};
}

void init_policy(ad::ParamStore& params, const PolicySpec& spec, std::mt19937_64& rng) {
  spec.validate();
  init_mlp(params, kTrunk, spec.trunk(), rng);
  init_mlp(params, kMeanHead, head_spec(spec), rng);
  if (spec.state_dependent_std) {
    init_mlp(params, kLogStdHead, head_spec(spec), rng);
  } else {
    params.add_zeros(kFreeLogStd, {std::size_t(spec.action_dim)});
  }
}

double smooth_log_std(double raw) {
  return kLogStdMin + 0.5 * (kLogStdMax - kLogStdMin) * (std::tanh(raw) + 1.0);
}

PolicyVars policy_forward(ad::Tape& tape, const PolicySpec& spec, ad::ParamStore& params,
                          ad::Var states, ad::ParamMode mode) {
  spec.validate();
  if (tape.value(states).cols() != spec.state_dim) {
    throw Error(ErrorKind::kDimensionMismatch, kModule,
                "state has " + std::to_string(tape.value(states).cols()) + " columns, expected " +
                    std::to_string(spec.state_dim));
  }
  const ad::Var h = tape.tanh(mlp_forward(tape, spec.trunk(), params, kTrunk, states, mode));
  PolicyVars out;
  out.mean = mlp_forward(tape, head_spec(spec), params, kMeanHead, h, mode);
  ad::Var raw;
  if (spec.state_dependent_std) {
    raw = mlp_forward(tape, head_spec(spec), params, kLogStdHead, h, mode);
  } else {
    raw = tape.repeat_rows(tape.param(params, kFreeLogStd, mode), int(tape.value(states).rows()));
  }
  const double half = 0.5 * (kLogStdMax - kLogStdMin);
  out.log_std = tape.add_scalar(tape.scale(tape.tanh(raw), half), kLogStdMin + half);
  return out;
}

std::pair<ad::Matrix, ad::Matrix> policy_eval(const PolicySpec& spec, const ad::ParamStore& params,
                                              const ad::Matrix& states) {
  spec.validate();
  if (states.cols() != spec.state_dim) {
    throw Error(ErrorKind::kDimensionMismatch, kModule, "state width does not match the policy");
  }
  ad::Matrix h = mlp_eval(spec.trunk(), params, kTrunk, states);
  apply_activation(h, Activation::kTanh);
  ad::Matrix mean = mlp_eval(head_spec(spec), params, kMeanHead, h);
  ad::Matrix raw;
  if (spec.state_dependent_std) {
    raw = mlp_eval(head_spec(spec), params, kLogStdHead, h);
  } else {
    raw = bias_row(params, kFreeLogStd).replicate(states.rows(), 1);
  }
  ad::Matrix log_std = raw.unaryExpr([](double r) { return smooth_log_std(r); });
  return {std::move(mean), std::move(log_std)};
}

DiagGaussianPolicyOutput policy_forward(const PolicySpec& spec, const ad::ParamStore& params,
                                        const Eigen::VectorXd& state) {
  auto [m, s] = policy_eval(spec, params, state.transpose());
  return {m.row(0).transpose(), s.row(0).transpose()};
}

SquashedSample sample(const DiagGaussianPolicyOutput& out, const Eigen::VectorXd& noise) {
  if (noise.size() != out.mean.size() || out.log_std.size() != out.mean.size()) {
    throw Error(ErrorKind::kDimensionMismatch, kModule, "noise does not match the action dimension");
  }
  SquashedSample s;
  s.pre_squash = out.mean.array() + out.log_std.array().exp() * noise.array();
  s.action = ad::tanh_of(s.pre_squash);
  for (Eigen::Index i = 0; i < noise.size(); ++i) {
    const double a = s.action(i);
    s.log_prob += -0.5 * noise(i) * noise(i) - out.log_std(i) - kHalfLog2Pi -
                  std::log(1.0 - a * a + kJacobianEps);
  }
  return s;
}

double log_prob_of(const DiagGaussianPolicyOutput& out, const Eigen::VectorXd& action) {
  if (action.size() != out.mean.size()) {
    throw Error(ErrorKind::kDimensionMismatch, kModule, "action does not match the policy");
  }
  double lp = 0.0;
  for (Eigen::Index i = 0; i < action.size(); ++i) {
    const double a = action(i);
    if (!(std::fabs(a) < 1.0 - kBoundaryMargin)) {
      throw Error(ErrorKind::kBoundary, kModule,
                  "action component " + std::to_string(i) + " lies on the box boundary");
    }
    const double z = (std::atanh(a) - out.mean(i)) * std::exp(-out.log_std(i));
    lp += -0.5 * z * z - out.log_std(i) - kHalfLog2Pi - std::log(1.0 - a * a + kJacobianEps);
  }
  return lp;
}

SampleVars sample_on_tape(ad::Tape& tape, ad::Var mean, ad::Var log_std, const ad::Matrix& noise) {
  const ad::Matrix& m = tape.value(mean);
  if (noise.rows() != m.rows() || noise.cols() != m.cols()) {
    throw Error(ErrorKind::kDimensionMismatch, kModule, "noise does not match the policy output");
  }
  const ad::Var z = tape.constant(noise);
  const ad::Var x = tape.add(mean, tape.mul(tape.exp(log_std), z));
  SampleVars out;
  out.action = tape.tanh(x);
  const ad::Var jac = tape.log(tape.add_scalar(tape.neg(tape.square(out.action)), 1.0 + kJacobianEps));
  const ad::Matrix gauss_const =
      (-0.5 * noise.array().square() - kHalfLog2Pi).rowwise().sum().matrix();
  ad::Var per_dim = tape.add(log_std, jac);
  out.log_prob = tape.sub(tape.constant(gauss_const), tape.sum_cols(per_dim));
  return out;
}

std::pair<ad::Matrix, Eigen::VectorXd> sample_batch(const ad::Matrix& mean,
                                                    const ad::Matrix& log_std,
                                                    const ad::Matrix& noise) {
  const ad::Matrix x = mean.array() + log_std.array().exp() * noise.array();
  ad::Matrix a = ad::tanh_of(x);
  const Eigen::VectorXd lp =
      (-0.5 * noise.array().square() - log_std.array() - kHalfLog2Pi -
       (1.0 - a.array().square() + kJacobianEps).log())
          .rowwise()
          .sum();
  return {std::move(a), lp};
}

ad::Matrix standard_normal(Eigen::Index rows, Eigen::Index cols, std::mt19937_64& rng) {
  std::normal_distribution<double> n01(0.0, 1.0);
  ad::Matrix m(rows, cols);
  // Row-major fill so the draw order does not depend on Eigen's storage order.
  for (Eigen::Index r = 0; r < rows; ++r) {
    for (Eigen::Index c = 0; c < cols; ++c) m(r, c) = n01(rng);
  }
  return m;
}

}  // namespace maxent
