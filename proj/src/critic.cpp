#include "maxent/critic.hpp"

#include "maxent/error.hpp"

#include <algorithm>
#include <cmath>

namespace maxent {
namespace {

constexpr const char* kModule = "vdn_a_critic";

void check_rows(const ad::Matrix& states, const ad::Matrix& actions, const VdnACriticSpec& spec) {
  if (states.cols() != spec.state_dim || actions.cols() != spec.action_dim ||
      states.rows() != actions.rows()) {
    throw Error(ErrorKind::kDimensionMismatch, kModule,
                "expected states B x " + std::to_string(spec.state_dim) + " and actions B x " +
                    std::to_string(spec.action_dim) + ", got " + std::to_string(states.rows()) +
                    " x " + std::to_string(states.cols()) + " and " +
                    std::to_string(actions.rows()) + " x " + std::to_string(actions.cols()));
  }
}

void check_dim(const VdnACriticSpec& spec, int dim) {
  if (dim < 0 || dim >= spec.action_dim) {
    throw Error(ErrorKind::kInvalidArgument, kModule,
                "action dimension " + std::to_string(dim) + " out of range [0, " +
                    std::to_string(spec.action_dim) + ")");
  }
}

ad::Matrix concat(const ad::Matrix& a, const ad::Matrix& b) {
  ad::Matrix out(a.rows(), a.cols() + b.cols());
  out << a, b;
  return out;
}

}  // namespace

void VdnACriticSpec::validate() const {
  if (state_dim < 1 || action_dim < 1 || embed_dim < 1 || embed_hidden < 1 || subnet_hidden < 1 ||
      aux_hidden < 1) {
    throw Error(ErrorKind::kInvalidArgument, kModule, "critic dimensions must be >= 1");
  }
}

MlpSpec VdnACriticSpec::embed_mlp() const { return {1, {embed_hidden}, embed_dim, Activation::kTanh}; }

MlpSpec VdnACriticSpec::subnet_mlp() const {
  return {state_dim + embed_dim, {subnet_hidden, subnet_hidden}, 1, Activation::kTanh};
}

MlpSpec VdnACriticSpec::aux_mlp() const {
  return {state_dim + action_dim, {aux_hidden, aux_hidden}, 1, Activation::kTanh};
}

std::string embed_prefix(int dim) { return "embed" + std::to_string(dim) + "."; }
std::string subnet_prefix(int dim) { return "sub" + std::to_string(dim) + "."; }

void init_critic(ad::ParamStore& params, const VdnACriticSpec& spec, std::mt19937_64& rng) {
  spec.validate();
  for (int i = 0; i < spec.action_dim; ++i) {
    init_mlp(params, embed_prefix(i), spec.embed_mlp(), rng);
    init_mlp(params, subnet_prefix(i), spec.subnet_mlp(), rng);
  }
  init_mlp(params, kAuxPrefix, spec.aux_mlp(), rng);
}

CriticTerms critic_forward(ad::Tape& tape, const VdnACriticSpec& spec, ad::ParamStore& params,
                           ad::Var states, ad::Var actions, ad::ParamMode mode) {
  spec.validate();
  check_rows(tape.value(states), tape.value(actions), spec);
  CriticTerms out;
  for (int i = 0; i < spec.action_dim; ++i) {
    const ad::Var e = mlp_forward(tape, spec.embed_mlp(), params, embed_prefix(i),
                                  tape.col(actions, i), mode);
    const ad::Var in[] = {states, e};
    out.subnets.push_back(
        mlp_forward(tape, spec.subnet_mlp(), params, subnet_prefix(i), tape.concat_cols(in), mode));
  }
  const ad::Var joint[] = {states, actions};
  out.aux = mlp_forward(tape, spec.aux_mlp(), params, kAuxPrefix, tape.concat_cols(joint), mode);
  out.q_total = out.aux;
  for (const ad::Var q : out.subnets) out.q_total = tape.add(out.q_total, q);
  return out;
}

Eigen::VectorXd aux_eval(const VdnACriticSpec& spec, const ad::ParamStore& params,
                         const ad::Matrix& states, const ad::Matrix& actions) {
  check_rows(states, actions, spec);
  return mlp_eval(spec.aux_mlp(), params, kAuxPrefix, concat(states, actions)).col(0);
}

Eigen::VectorXd critic_eval(const VdnACriticSpec& spec, const ad::ParamStore& params,
                            const ad::Matrix& states, const ad::Matrix& actions) {
  spec.validate();
  Eigen::VectorXd q = aux_eval(spec, params, states, actions);
  for (int i = 0; i < spec.action_dim; ++i) {
    const ad::Matrix e = mlp_eval(spec.embed_mlp(), params, embed_prefix(i), actions.col(i));
    q += mlp_eval(spec.subnet_mlp(), params, subnet_prefix(i), concat(states, e)).col(0);
  }
  return q;
}

double q_total(const VdnACriticSpec& spec, const ad::ParamStore& params,
               const Eigen::VectorXd& state, const Eigen::VectorXd& action) {
  return critic_eval(spec, params, state.transpose(), action.transpose())(0);
}

double q_marginal(const VdnACriticSpec& spec, const ad::ParamStore& params,
                  const Eigen::VectorXd& state, int dim, double a_i) {
  check_dim(spec, dim);
  Eigen::VectorXd a(1);
  a << a_i;
  return subnet_grid(spec, params, state.transpose(), dim, a)(0, 0);
}

ad::Matrix subnet_grid(const VdnACriticSpec& spec, const ad::ParamStore& params,
                       const ad::Matrix& states, int dim, const Eigen::VectorXd& a_grid) {
  spec.validate();
  check_dim(spec, dim);
  if (states.cols() != spec.state_dim) {
    throw Error(ErrorKind::kDimensionMismatch, kModule, "state width does not match the critic");
  }
  const MlpSpec sub = spec.subnet_mlp();
  const std::string prefix = subnet_prefix(dim);
  const ad::Matrix e = mlp_eval(spec.embed_mlp(), params, embed_prefix(dim), a_grid);
  const ad::Matrix w = weight_matrix(params, weight_name(prefix, 0));
  const ad::Matrix s_part = states * w.leftCols(spec.state_dim).transpose();
  ad::Matrix e_part = e * w.rightCols(spec.embed_dim).transpose();
  e_part.rowwise() += bias_row(params, bias_name(prefix, 0));

  const Eigen::Index B = states.rows();
  const Eigen::Index K = a_grid.size();
  ad::Matrix pre(B * K, w.rows());
  for (Eigen::Index b = 0; b < B; ++b) {
    pre.middleRows(b * K, K) = e_part.rowwise() + s_part.row(b);
  }
  const ad::Matrix q = mlp_eval_from_preactivation(sub, params, prefix, std::move(pre), 0);
  // Row b * K + k holds (b, k); reinterpret the column as K x B then transpose.
  return Eigen::Map<const ad::Matrix>(q.data(), K, B).transpose();
}

CriticEnsemble::CriticEnsemble(VdnACriticSpec spec, double tau, ad::AdamConfig opt,
                               std::mt19937_64& rng)
    : spec_(spec), tau_(tau), opt_{ad::Adam(opt), ad::Adam(opt)} {
  if (!(tau > 0.0 && tau <= 1.0)) {
    throw Error(ErrorKind::kInvalidArgument, kModule, "tau must lie in (0, 1]");
  }
  for (int i = 0; i < 2; ++i) {
    init_critic(online_[i], spec_, rng);
    target_[i] = online_[i];
  }
}

void CriticEnsemble::soft_update() {
  for (int i = 0; i < 2; ++i) {
    for (auto& [name, t] : target_[i]) {
      const auto& o = online_[i].at(name).values;
      for (std::size_t k = 0; k < t.values.size(); ++k) {
        t.values[k] = tau_ * o[k] + (1.0 - tau_) * t.values[k];
      }
    }
  }
}

Eigen::VectorXd CriticEnsemble::min_online_q(const ad::Matrix& states,
                                             const ad::Matrix& actions) const {
  return critic_eval(spec_, online_[0], states, actions)
      .cwiseMin(critic_eval(spec_, online_[1], states, actions));
}

Eigen::VectorXd CriticEnsemble::min_target_q(const ad::Matrix& states,
                                             const ad::Matrix& actions) const {
  return critic_eval(spec_, target_[0], states, actions)
      .cwiseMin(critic_eval(spec_, target_[1], states, actions));
}

MarginalSource twin_min_marginals(const VdnACriticSpec& spec, const ad::ParamStore& a,
                                  const ad::ParamStore& b) {
  MarginalSource src;
  src.action_dim = spec.action_dim;
  src.grid = [spec, &a, &b](int dim, const ad::Matrix& states, const Eigen::VectorXd& grid) {
    return ad::Matrix(subnet_grid(spec, a, states, dim, grid).cwiseMin(
        subnet_grid(spec, b, states, dim, grid)));
  };
  return src;
}

MarginalSource CriticEnsemble::marginals() const {
  return twin_min_marginals(spec_, online_[0], online_[1]);
}

ad::ParamStore CriticEnsemble::export_params() const {
  ad::ParamStore out;
  out.merge(online_[0], "critic1.");
  out.merge(online_[1], "critic2.");
  out.merge(target_[0], "target1.");
  out.merge(target_[1], "target2.");
  return out;
}

void CriticEnsemble::import_params(const ad::ParamStore& merged) {
  const char* names[] = {"critic1.", "critic2.", "target1.", "target2."};
  ad::ParamStore* dst[] = {&online_[0], &online_[1], &target_[0], &target_[1]};
  for (int k = 0; k < 4; ++k) {
    ad::ParamStore p = merged.extract(names[k]);
    for (const auto& [name, e] : *dst[k]) {
      if (!p.contains(name)) {
        throw Error(ErrorKind::kMissingParameter, kModule,
                    std::string("checkpoint lacks ") + names[k] + name);
      }
      if (p.at(name).shape != e.shape) {
        throw Error(ErrorKind::kDimensionMismatch, kModule,
                    std::string("shape mismatch for ") + names[k] + name);
      }
    }
    *dst[k] = std::move(p);
  }
}

Eigen::VectorXd bellman_targets(const CriticEnsemble& ens, const Batch& batch,
                                const ad::Matrix& next_actions,
                                const Eigen::VectorXd& next_log_probs, double alpha, double gamma) {
  const Eigen::Index B = batch.size();
  if (B == 0) throw Error(ErrorKind::kInvalidArgument, kModule, "empty batch");
  if (next_actions.rows() != B || next_log_probs.size() != B || batch.rewards.size() != B ||
      batch.terminal.size() != B || batch.next_states.rows() != B) {
    throw Error(ErrorKind::kDimensionMismatch, kModule, "batch fields disagree in length");
  }
  const Eigen::VectorXd q_next = ens.min_target_q(batch.next_states, next_actions);
  Eigen::VectorXd y(B);
  for (Eigen::Index i = 0; i < B; ++i) {
    y(i) = batch.rewards(i);
    if (batch.terminal(i) == 0.0) y(i) += gamma * (q_next(i) - alpha * next_log_probs(i));
    if (!std::isfinite(y(i))) {
      throw Error(ErrorKind::kNonFinite, kModule,
                  "Bellman target is not finite for transition " + std::to_string(i));
    }
  }
  return y;
}

double critic_regression_step(const VdnACriticSpec& spec, ad::ParamStore& params, ad::Adam& opt,
                              const ad::Matrix& states, const ad::Matrix& actions,
                              const Eigen::VectorXd& targets, double aux_penalty) {
  ad::Tape tape;
  const CriticTerms t =
      critic_forward(tape, spec, params, tape.constant(states), tape.constant(actions));
  const ad::Var diff = tape.sub(t.q_total, tape.constant(targets));
  const ad::Var mse = tape.mean(tape.square(diff));
  ad::Var loss = tape.scale(mse, 0.5);
  if (aux_penalty > 0.0) {
    loss = tape.add(loss, tape.scale(tape.mean(tape.square(t.aux)), aux_penalty));
  }
  const double mse_value = tape.scalar(mse);
  params.zero_grad();
  tape.backward(loss);
  opt.step(params);
  return mse_value;
}

BellmanStats bellman_update(CriticEnsemble& ens, const Batch& batch, const ad::Matrix& next_actions,
                            const Eigen::VectorXd& next_log_probs, double alpha, double gamma,
                            double aux_penalty) {
  BellmanStats st;
  st.targets = bellman_targets(ens, batch, next_actions, next_log_probs, alpha, gamma);
  for (int i = 0; i < 2; ++i) {
    st.mse += 0.5 * critic_regression_step(ens.spec(), ens.online(i), ens.optimizer(i),
                                           batch.states, batch.actions, st.targets, aux_penalty);
  }
  return st;
}

}  // namespace maxent
