#include "maxent/agents.hpp"

#include "maxent/error.hpp"

#include <cmath>

namespace maxent {
namespace {

constexpr const char* kModule = "losses_agents";

[[noreturn]] void fail(ErrorKind kind, const std::string& what) { throw Error(kind, kModule, what); }

PolicySpec make_policy_spec(const EnvSpec& env, const AgentConfig& cfg) {
  PolicySpec p;
  p.state_dim = env.state_dim;
  p.action_dim = env.action_dim;
  p.hidden = {cfg.actor_hidden, cfg.actor_hidden};
  p.state_dependent_std = cfg.state_dependent_std;
  return p;
}

VdnACriticSpec make_critic_spec(const EnvSpec& env, const AgentConfig& cfg) {
  VdnACriticSpec c;
  c.state_dim = env.state_dim;
  c.action_dim = env.action_dim;
  c.embed_dim = cfg.embed_dim;
  c.embed_hidden = cfg.embed_hidden;
  c.subnet_hidden = cfg.subnet_hidden;
  c.aux_hidden = cfg.aux_hidden;
  return c;
}

const AgentConfig& validated(const AgentConfig& cfg) {
  cfg.validate();
  return cfg;
}

ad::Matrix rows_of(const ad::Matrix& m, const std::vector<Eigen::Index>& idx) {
  ad::Matrix out(Eigen::Index(idx.size()), m.cols());
  for (std::size_t i = 0; i < idx.size(); ++i) out.row(Eigen::Index(i)) = m.row(idx[i]);
  return out;
}

}  // namespace

std::string algorithm_name(Algorithm a) {
  switch (a) {
    case Algorithm::kSacReverse: return "sac_reverse";
    case Algorithm::kForwardCriticOnly: return "forward_critic_only";
    case Algorithm::kForwardActor: return "forward_actor";
    case Algorithm::kBidirectional: return "bidirectional";
  }
  return "?";
}

Algorithm parse_algorithm(const std::string& name) {
  if (name == "sac_reverse" || name == "sac") return Algorithm::kSacReverse;
  if (name == "forward_critic_only" || name == "forward-critic") return Algorithm::kForwardCriticOnly;
  if (name == "forward_actor" || name == "forward-actor") return Algorithm::kForwardActor;
  if (name == "bidirectional") return Algorithm::kBidirectional;
  fail(ErrorKind::kInvalidArgument, "unknown algorithm '" + name + "'");
}

void AgentConfig::validate() const {
  auto require = [](bool ok, const char* what) {
    if (!ok) fail(ErrorKind::kInvalidArgument, what);
  };
  require(alpha > 0.0, "alpha must be positive");
  require(epsilon >= 0.0, "epsilon must be >= 0");
  require(gamma > 0.0 && gamma <= 1.0, "gamma must lie in (0, 1]");
  require(tau > 0.0 && tau <= 1.0, "tau must lie in (0, 1]");
  require(lr_actor > 0.0 && lr_critic > 0.0, "learning rates must be positive");
  require(batch_M >= 1, "batch_M must be >= 1");
  require(updates_J >= 1, "updates_J must be >= 1");
  require(steps_L >= 0, "steps_L must be >= 0");
  require(warmup_steps >= 0, "warmup_steps must be >= 0");
  require(buffer_capacity >= batch_M, "buffer_capacity must be >= batch_M");
  require(checkpoint_every >= 0, "checkpoint_every must be >= 0");
  require(actor_hidden >= 1 && embed_dim >= 1 && embed_hidden >= 1 && subnet_hidden >= 1 &&
              aux_hidden >= 1,
          "network sizes must be >= 1");
  require(aux_penalty >= 0.0, "aux_penalty must be >= 0");
  quad.validate();
}

Config to_config(const AgentConfig& cfg) {
  Config c;
  c.set("algorithm", algorithm_name(cfg.algorithm));
  c.set("alpha", cfg.alpha);
  c.set("epsilon", cfg.epsilon);
  c.set("gamma", cfg.gamma);
  c.set("tau", cfg.tau);
  c.set("lr_actor", cfg.lr_actor);
  c.set("lr_critic", cfg.lr_critic);
  c.set("batch_M", cfg.batch_M);
  c.set("updates_J", cfg.updates_J);
  c.set("steps_L", static_cast<long long>(cfg.steps_L));
  c.set("quad.bound_b", cfg.quad.bound_b);
  c.set("quad.intervals", cfg.quad.intervals);
  c.set("seed", std::to_string(cfg.seed));
  c.set("warmup_steps", cfg.warmup_steps);
  c.set("buffer_capacity", static_cast<long long>(cfg.buffer_capacity));
  c.set("checkpoint_every", static_cast<long long>(cfg.checkpoint_every));
  c.set("actor_hidden", cfg.actor_hidden);
  c.set("state_dependent_std", cfg.state_dependent_std);
  c.set("embed_dim", cfg.embed_dim);
  c.set("embed_hidden", cfg.embed_hidden);
  c.set("subnet_hidden", cfg.subnet_hidden);
  c.set("aux_hidden", cfg.aux_hidden);
  c.set("aux_penalty", cfg.aux_penalty);
  c.set("log_variance_match", cfg.log_variance_match);
  return c;
}

AgentConfig agent_config_from(const Config& c, AgentConfig b) {
  if (c.contains("algorithm")) b.algorithm = parse_algorithm(c.get_string("algorithm", ""));
  b.alpha = c.get_double("alpha", b.alpha);
  b.epsilon = c.get_double("epsilon", b.epsilon);
  b.gamma = c.get_double("gamma", b.gamma);
  b.tau = c.get_double("tau", b.tau);
  b.lr_actor = c.get_double("lr_actor", b.lr_actor);
  b.lr_critic = c.get_double("lr_critic", b.lr_critic);
  b.batch_M = int(c.get_int("batch_M", b.batch_M));
  b.updates_J = int(c.get_int("updates_J", b.updates_J));
  b.steps_L = c.get_int("steps_L", b.steps_L);
  b.quad.bound_b = c.get_double("quad.bound_b", b.quad.bound_b);
  b.quad.intervals = int(c.get_int("quad.intervals", b.quad.intervals));
  b.seed = c.get_uint("seed", b.seed);
  b.warmup_steps = int(c.get_int("warmup_steps", b.warmup_steps));
  b.buffer_capacity = c.get_int("buffer_capacity", b.buffer_capacity);
  b.checkpoint_every = c.get_int("checkpoint_every", b.checkpoint_every);
  b.actor_hidden = int(c.get_int("actor_hidden", b.actor_hidden));
  b.state_dependent_std = c.get_bool("state_dependent_std", b.state_dependent_std);
  b.embed_dim = int(c.get_int("embed_dim", b.embed_dim));
  b.embed_hidden = int(c.get_int("embed_hidden", b.embed_hidden));
  b.subnet_hidden = int(c.get_int("subnet_hidden", b.subnet_hidden));
  b.aux_hidden = int(c.get_int("aux_hidden", b.aux_hidden));
  b.aux_penalty = c.get_double("aux_penalty", b.aux_penalty);
  b.log_variance_match = c.get_bool("log_variance_match", b.log_variance_match);
  return b;
}

ReplayBuffer::ReplayBuffer(std::size_t capacity, int state_dim, int action_dim)
    : capacity_(capacity), state_dim_(state_dim), action_dim_(action_dim) {
  if (capacity == 0) fail(ErrorKind::kInvalidArgument, "replay capacity must be positive");
  items_.reserve(std::min<std::size_t>(capacity, 1 << 16));
}

void ReplayBuffer::add(Transition t) {
  if (t.s.size() != state_dim_ || t.s_next.size() != state_dim_ || t.a.size() != action_dim_) {
    fail(ErrorKind::kDimensionMismatch, "transition does not match the buffer dimensions");
  }
  if (items_.size() < capacity_) {
    items_.push_back(std::move(t));
  } else {
    items_[next_] = std::move(t);
  }
  next_ = (next_ + 1) % capacity_;
}

std::vector<std::size_t> ReplayBuffer::sample_indices(std::size_t m, std::mt19937_64& rng) const {
  if (items_.size() < m || m == 0) {
    fail(ErrorKind::kInvalidArgument, "cannot sample " + std::to_string(m) + " transitions from a buffer of " +
                                          std::to_string(items_.size()));
  }
  std::uniform_int_distribution<std::size_t> pick(0, items_.size() - 1);
  std::vector<std::size_t> idx(m);
  for (auto& i : idx) i = pick(rng);
  return idx;
}

Batch ReplayBuffer::gather(const std::vector<std::size_t>& idx) const {
  const auto B = Eigen::Index(idx.size());
  Batch b{ad::Matrix(B, state_dim_), ad::Matrix(B, action_dim_), Eigen::VectorXd(B),
          ad::Matrix(B, state_dim_), Eigen::VectorXd(B)};
  for (Eigen::Index r = 0; r < B; ++r) {
    const Transition& t = items_.at(idx[r]);
    b.states.row(r) = t.s.transpose();
    b.actions.row(r) = t.a.transpose();
    b.rewards(r) = t.r;
    b.next_states.row(r) = t.s_next.transpose();
    b.terminal(r) = (t.done && !t.truncated) ? 1.0 : 0.0;
  }
  return b;
}

CriticTerms critic_forward_frozen(ad::Tape& tape, const VdnACriticSpec& spec,
                                  const ad::ParamStore& params, ad::Var states, ad::Var actions) {
  // Frozen mode only reads the store.
  return critic_forward(tape, spec, const_cast<ad::ParamStore&>(params), states, actions,
                        ad::ParamMode::kFrozen);
}

ad::Var reverse_kl_actor_loss(ad::Tape& tape, const PolicyVars& pv, const CriticEnsemble& critic,
                              double alpha, ad::Var states, const ad::Matrix& noise) {
  const SampleVars sv = sample_on_tape(tape, pv.mean, pv.log_std, noise);
  const ad::Var q1 = critic_forward_frozen(tape, critic.spec(), critic.online(0), states, sv.action).q_total;
  const ad::Var q2 = critic_forward_frozen(tape, critic.spec(), critic.online(1), states, sv.action).q_total;
  const ad::Var per = tape.sub(tape.scale(sv.log_prob, alpha), tape.minimum(q1, q2));
  const ad::Matrix& v = tape.value(per);
  for (Eigen::Index i = 0; i < v.rows(); ++i) {
    if (!std::isfinite(v(i, 0))) {
      fail(ErrorKind::kNonFinite, "reverse-KL actor loss is not finite at batch index " + std::to_string(i));
    }
  }
  return tape.mean(per);
}

ad::Var forward_mse_actor_loss(ad::Tape& tape, const PolicyVars& pv, const ProjectionBatch& proj,
                               bool log_variance) {
  const ad::Matrix& f = tape.value(pv.mean);
  if (proj.f_star.rows() != f.rows() || proj.f_star.cols() != f.cols()) {
    fail(ErrorKind::kDimensionMismatch, "projection batch does not match the policy output");
  }
  const ad::Var f_err = tape.sub(pv.mean, tape.constant(proj.f_star));
  const ad::Var log_var = tape.scale(pv.log_std, 2.0);
  const ad::Var v_err =
      log_variance ? tape.sub(log_var, tape.constant(proj.sigma_star.array().log().matrix()))
                   : tape.sub(tape.exp(log_var), tape.constant(proj.sigma_star));
  return tape.mean(tape.add(tape.square(f_err), tape.square(v_err)));
}

ad::Var bidirectional_actor_loss(ad::Tape& tape, const PolicyVars& pv, const CriticEnsemble& critic,
                                 double alpha, double epsilon, const ProjectionBatch& proj,
                                 ad::Var states, const ad::Matrix& noise, bool log_variance) {
  const ad::Var rev = reverse_kl_actor_loss(tape, pv, critic, alpha, states, noise);
  const ad::Var mse = forward_mse_actor_loss(tape, pv, proj, log_variance);
  return tape.add(rev, tape.scale(mse, epsilon));
}

Agent::Agent(const EnvSpec& env, const AgentConfig& cfg)
    : env_(env),
      cfg_(validated(cfg)),
      policy_spec_(make_policy_spec(env, cfg)),
      critic_([&] {
        std::mt19937_64 rng = make_rng(cfg.seed, RngStream::kInit);
        return CriticEnsemble(make_critic_spec(env, cfg), cfg.tau, ad::AdamConfig{cfg.lr_critic}, rng);
      }()),
      actor_opt_(ad::AdamConfig{cfg.lr_actor}) {
  if (cfg_.has_actor()) {
    // Separate stream so the critic initialization is shared by every algorithm.
    std::mt19937_64 rng = make_rng(cfg_.seed ^ 0x9e3779b97f4a7c15ULL, RngStream::kInit);
    init_policy(actor_, policy_spec_, rng);
  }
}

DiagGaussianPolicyOutput Agent::acting_distribution(const Eigen::VectorXd& state) const {
  if (cfg_.has_actor()) return policy_forward(policy_spec_, actor_, state);
  return project_state(critic_.marginals(), cfg_.alpha, state, cfg_.quad).as_policy();
}

SquashedSample Agent::act(const Eigen::VectorXd& state, const Eigen::VectorXd& noise) const {
  return sample(acting_distribution(state), noise);
}

Eigen::VectorXd Agent::act_deterministic(const Eigen::VectorXd& state) const {
  return ad::tanh_of(acting_distribution(state).mean);
}

std::pair<ad::Matrix, Eigen::VectorXd> Agent::next_actions(const Batch& batch,
                                                           std::mt19937_64& rng) const {
  const Eigen::Index B = batch.size();
  const int N = env_.action_dim;
  ad::Matrix actions = ad::Matrix::Zero(B, N);
  Eigen::VectorXd log_probs = Eigen::VectorXd::Zero(B);
  std::vector<Eigen::Index> live;
  for (Eigen::Index i = 0; i < B; ++i) {
    if (batch.terminal(i) == 0.0) live.push_back(i);
  }
  if (live.empty()) return {actions, log_probs};
  const ad::Matrix s = rows_of(batch.next_states, live);
  const ad::Matrix noise = standard_normal(s.rows(), N, rng);
  ad::Matrix mean;
  ad::Matrix log_std;
  if (cfg_.has_actor()) {
    std::tie(mean, log_std) = policy_eval(policy_spec_, actor_, s);
  } else {
    const ProjectionBatch p = project_batch(critic_.marginals(), cfg_.alpha, s, cfg_.quad);
    mean = p.f_star;
    log_std = 0.5 * p.sigma_star.array().log();
  }
  const auto [a, lp] = sample_batch(mean, log_std, noise);
  for (std::size_t k = 0; k < live.size(); ++k) {
    actions.row(live[k]) = a.row(Eigen::Index(k));
    log_probs(live[k]) = lp(Eigen::Index(k));
  }
  return {actions, log_probs};
}

UpdateStats Agent::update(const Batch& batch, std::mt19937_64& noise_rng) {
  UpdateStats st;
  const auto [a_next, lp_next] = next_actions(batch, noise_rng);
  st.critic_loss =
      bellman_update(critic_, batch, a_next, lp_next, cfg_.alpha, cfg_.gamma, cfg_.aux_penalty).mse;
  critic_.soft_update();
  if (!cfg_.has_actor()) return st;

  ad::Tape tape;
  const ad::Var states = tape.constant(batch.states);
  const PolicyVars pv = policy_forward(tape, policy_spec_, actor_, states);
  ad::Var loss;
  if (cfg_.algorithm != Algorithm::kForwardActor) {
    const ad::Matrix noise = standard_normal(batch.size(), env_.action_dim, noise_rng);
    loss = reverse_kl_actor_loss(tape, pv, critic_, cfg_.alpha, states, noise);
  }
  if (cfg_.needs_projection()) {
    const ProjectionBatch proj = project_batch(critic_.marginals(), cfg_.alpha, batch.states, cfg_.quad);
    const ad::Var mse = forward_mse_actor_loss(tape, pv, proj, cfg_.log_variance_match);
    st.fkl_mse = tape.scalar(mse);
    loss = cfg_.algorithm == Algorithm::kForwardActor ? mse
                                                      : tape.add(loss, tape.scale(mse, cfg_.epsilon));
  }
  st.actor_loss = tape.scalar(loss);
  actor_.zero_grad();
  tape.backward(loss);
  actor_opt_.step(actor_);
  return st;
}

Checkpoint Agent::to_checkpoint(long step) const {
  Checkpoint c;
  c.params = critic_.export_params();
  c.params.merge(actor_, "actor.");
  c.metadata["step"] = std::to_string(step);
  c.metadata["env"] = env_.name;
  const Config snapshot = to_config(cfg_);
  for (const auto& [k, v] : snapshot.values()) c.metadata["config." + k] = v;
  return c;
}

Agent Agent::from_checkpoint(const Checkpoint& ckpt) {
  const auto env_it = ckpt.metadata.find("env");
  if (env_it == ckpt.metadata.end()) fail(ErrorKind::kParse, "checkpoint metadata lacks 'env'");
  Config c;
  for (const auto& [k, v] : ckpt.metadata) {
    if (k.rfind("config.", 0) == 0) c.set(k.substr(7), v);
  }
  const AgentConfig cfg = agent_config_from(c);
  Agent agent(make_env(env_it->second)->spec(), cfg);
  agent.critic_.import_params(ckpt.params);
  ad::ParamStore actor = ckpt.params.extract("actor.");
  for (const auto& [name, e] : agent.actor_) {
    if (!actor.contains(name)) fail(ErrorKind::kMissingParameter, "checkpoint lacks actor." + name);
    if (actor.at(name).shape != e.shape) fail(ErrorKind::kDimensionMismatch, "shape mismatch for actor." + name);
  }
  if (actor.size() != agent.actor_.size()) fail(ErrorKind::kParse, "checkpoint has unexpected actor entries");
  agent.actor_ = std::move(actor);
  return agent;
}

std::mt19937_64 make_rng(std::uint64_t seed, RngStream stream) {
  std::seed_seq seq{std::uint32_t(seed), std::uint32_t(seed >> 32), std::uint32_t(stream)};
  return std::mt19937_64(seq);
}

TrainingLog train(Env& env, Agent& agent, const TrainObserver& observer) {
  const AgentConfig& cfg = agent.config();
  const EnvSpec& spec = env.spec();
  if (spec.state_dim != agent.env_spec().state_dim || spec.action_dim != agent.env_spec().action_dim) {
    fail(ErrorKind::kDimensionMismatch, "agent was built for a different environment");
  }
  std::mt19937_64 env_rng = make_rng(cfg.seed, RngStream::kEnv);
  std::mt19937_64 warmup_rng = make_rng(cfg.seed, RngStream::kWarmup);
  std::mt19937_64 acting_rng = make_rng(cfg.seed, RngStream::kActing);
  std::mt19937_64 update_rng = make_rng(cfg.seed, RngStream::kUpdate);
  std::mt19937_64 buffer_rng = make_rng(cfg.seed, RngStream::kBuffer);
  std::uniform_real_distribution<double> uniform(-1.0, 1.0);

  TrainingLog log;
  if (cfg.steps_L == 0) return log;
  log.rows.reserve(std::size_t(cfg.steps_L));
  ReplayBuffer buffer(std::size_t(cfg.buffer_capacity), spec.state_dim, spec.action_dim);
  Eigen::VectorXd s = env.reset(env_rng());
  double episode_return = 0.0;
  std::optional<double> last_return;

  for (long t = 1; t <= cfg.steps_L; ++t) {
    try {
      LogRow row;
      row.step = t;
      row.alpha = cfg.alpha;
      row.epsilon = cfg.epsilon;
      Eigen::VectorXd a(spec.action_dim);
      if (t <= cfg.warmup_steps) {
        for (Eigen::Index i = 0; i < a.size(); ++i) a(i) = uniform(warmup_rng);
      } else {
        const DiagGaussianPolicyOutput dist = agent.acting_distribution(s);
        const ad::Matrix noise = standard_normal(1, spec.action_dim, acting_rng);
        a = sample(dist, noise.row(0).transpose()).action;
        row.mean_log_std = dist.log_std.mean();
      }
      StepResult res = env.step(a);
      episode_return += res.reward;
      buffer.add({s, a, res.reward, res.state, res.done, res.truncated});
      s = std::move(res.state);
      if (res.done) {
        if (!std::isfinite(episode_return)) fail(ErrorKind::kNonFinite, "episodic reward is not finite");
        last_return = episode_return;
        log.episode_returns.push_back(episode_return);
        log.episode_end_steps.push_back(t);
        s = env.reset(env_rng());
        episode_return = 0.0;
      }
      row.episodic_reward = last_return;

      if (t > cfg.warmup_steps && buffer.size() >= std::size_t(cfg.batch_M)) {
        double critic_sum = 0.0;
        double actor_sum = 0.0;
        double fkl_sum = 0.0;
        UpdateStats st;
        for (int j = 0; j < cfg.updates_J; ++j) {
          st = agent.update(buffer.sample(std::size_t(cfg.batch_M), buffer_rng), update_rng);
          critic_sum += st.critic_loss;
          if (st.actor_loss) actor_sum += *st.actor_loss;
          if (st.fkl_mse) fkl_sum += *st.fkl_mse;
        }
        row.critic_loss = critic_sum / cfg.updates_J;
        if (st.actor_loss) row.actor_loss = actor_sum / cfg.updates_J;
        if (st.fkl_mse) row.fkl_mse = fkl_sum / cfg.updates_J;
      }
      log.rows.push_back(row);
      if (observer) observer(row, agent);
    } catch (const Error& e) {
      throw Error(e.kind(), e.module(), "step " + std::to_string(t) + ": " + e.detail());
    }
  }
  return log;
}

TrainingLog train(Env& env, const AgentConfig& cfg) {
  Agent agent(env.spec(), cfg);
  return train(env, agent);
}

EvalResult evaluate(Env& env, const Agent& agent, int episodes, std::uint64_t seed) {
  if (episodes < 1) fail(ErrorKind::kInvalidArgument, "episodes must be >= 1");
  EvalResult out;
  for (int k = 0; k < episodes; ++k) {
    Eigen::VectorXd s = env.reset(seed + std::uint64_t(k));
    double ret = 0.0;
    for (;;) {
      StepResult r = env.step(agent.act_deterministic(s));
      ret += r.reward;
      s = std::move(r.state);
      if (r.done) break;
    }
    out.returns.push_back(ret);
  }
  double sum = 0.0;
  for (double r : out.returns) sum += r;
  out.mean_return = sum / episodes;
  return out;
}

}  // namespace maxent
