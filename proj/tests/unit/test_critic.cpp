#include "maxent/critic.hpp"
#include "maxent/error.hpp"

#include "../support/reference.hpp"

#include <doctest.h>

#include <cmath>
#include <random>

using namespace maxent;
using maxent::testing::ref_q_total;
using maxent::testing::ref_subnet;
using maxent::testing::zero_params;

namespace {

VdnACriticSpec small_spec(int state_dim = 3, int action_dim = 2) {
  VdnACriticSpec s;
  s.state_dim = state_dim;
  s.action_dim = action_dim;
  s.embed_dim = 4;
  s.embed_hidden = 5;
  s.subnet_hidden = 6;
  s.aux_hidden = 7;
  return s;
}

ad::ParamStore random_critic(const VdnACriticSpec& spec, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  ad::ParamStore p;
  init_critic(p, spec, rng);
  std::normal_distribution<double> n01(0.0, 0.3);
  for (auto& [name, e] : p) {
    for (double& v : e.values) v += n01(rng);
  }
  return p;
}

Batch random_batch(const VdnACriticSpec& spec, int B, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  Batch b;
  b.states = ad::Matrix(B, spec.state_dim);
  b.actions = ad::Matrix(B, spec.action_dim);
  b.next_states = ad::Matrix(B, spec.state_dim);
  b.rewards = Eigen::VectorXd(B);
  b.terminal = Eigen::VectorXd::Zero(B);
  for (Eigen::Index i = 0; i < b.states.size(); ++i) b.states.data()[i] = u(rng);
  for (Eigen::Index i = 0; i < b.actions.size(); ++i) b.actions.data()[i] = u(rng);
  for (Eigen::Index i = 0; i < b.next_states.size(); ++i) b.next_states.data()[i] = u(rng);
  for (Eigen::Index i = 0; i < B; ++i) b.rewards(i) = u(rng);
  return b;
}

}  // namespace

TEST_CASE("zero parameters give zero Q") {
  const auto spec = small_spec();
  ad::ParamStore p = random_critic(spec, 1);
  zero_params(p);
  const Eigen::VectorXd s = Eigen::VectorXd::Constant(3, 0.4);
  const Eigen::VectorXd a = Eigen::Vector2d(0.3, -0.8);
  CHECK(q_total(spec, p, s, a) == 0.0);
  CHECK(q_marginal(spec, p, s, 1, 0.2) == 0.0);
}

TEST_CASE("q_total matches the scalar reference") {
  const auto spec = small_spec(3, 3);
  const ad::ParamStore p = random_critic(spec, 2);
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  ad::Matrix S(5, 3), A(5, 3);
  for (Eigen::Index i = 0; i < S.size(); ++i) S.data()[i] = u(rng);
  for (Eigen::Index i = 0; i < A.size(); ++i) A.data()[i] = u(rng);
  const Eigen::VectorXd batch = critic_eval(spec, p, S, A);
  for (int r = 0; r < 5; ++r) {
    const Eigen::VectorXd s = S.row(r).transpose();
    const Eigen::VectorXd a = A.row(r).transpose();
    const double ref = ref_q_total(spec, p, testing::to_std(s), testing::to_std(a));
    CHECK(batch(r) == doctest::Approx(ref).epsilon(1e-12));
    CHECK(q_total(spec, p, s, a) == doctest::Approx(ref).epsilon(1e-12));
    for (int i = 0; i < 3; ++i) {
      CHECK(q_marginal(spec, p, s, i, a(i)) ==
            doctest::Approx(ref_subnet(spec, p, testing::to_std(s), i, a(i))).epsilon(1e-12));
    }
  }
}

TEST_CASE("hand-set subnets with aux frozen at zero") {
  VdnACriticSpec spec;
  spec.state_dim = 1;
  spec.action_dim = 2;
  spec.embed_dim = 1;
  spec.embed_hidden = 1;
  spec.subnet_hidden = 1;
  spec.aux_hidden = 1;
  std::mt19937_64 rng(0);
  ad::ParamStore p;
  init_critic(p, spec, rng);
  zero_params(p);
  // embed_i(a) = 1 * tanh(a); subnet_i = c_i * tanh(tanh(s + e)) with one unit per layer.
  for (int i = 0; i < 2; ++i) {
    p.at(weight_name(embed_prefix(i), 0)).values = {1.0};
    p.at(weight_name(embed_prefix(i), 1)).values = {1.0};
    p.at(weight_name(subnet_prefix(i), 0)).values = {1.0, 1.0};
    p.at(weight_name(subnet_prefix(i), 1)).values = {1.0};
    p.at(weight_name(subnet_prefix(i), 2)).values = {i == 0 ? 2.0 : -3.0};
  }
  const double s = 0.25, a0 = 0.5, a1 = -0.75;
  auto sub = [&](double a, double c) { return c * std::tanh(std::tanh(s + std::tanh(a))); };
  const double expected = sub(a0, 2.0) + sub(a1, -3.0);
  CHECK(q_total(spec, p, Eigen::VectorXd::Constant(1, s), Eigen::Vector2d(a0, a1)) ==
        doctest::Approx(expected).epsilon(1e-14));
}

TEST_CASE("q_marginal equals q_total with the other terms zeroed") {
  const auto spec = small_spec();
  ad::ParamStore p = random_critic(spec, 4);
  zero_params(p, subnet_prefix(0));
  zero_params(p, kAuxPrefix);
  const Eigen::VectorXd s = Eigen::Vector3d(0.1, -0.2, 0.9);
  const Eigen::VectorXd a = Eigen::Vector2d(-0.4, 0.6);
  CHECK(q_total(spec, p, s, a) == doctest::Approx(q_marginal(spec, p, s, 1, 0.6)).epsilon(1e-13));
}

TEST_CASE("perturbing one action leaves other subnets unchanged") {
  const auto spec = small_spec(2, 3);
  const ad::ParamStore p = random_critic(spec, 5);
  const Eigen::VectorXd s = Eigen::Vector2d(0.3, 0.3);
  Eigen::VectorXd a = Eigen::Vector3d(0.1, 0.2, 0.3);
  const double before0 = q_marginal(spec, p, s, 0, a(0));
  const double before2 = q_marginal(spec, p, s, 2, a(2));
  const double sub1 = q_marginal(spec, p, s, 1, a(1));
  const double aux = aux_eval(spec, p, s.transpose(), a.transpose())(0);
  a(1) += 1e-3;
  const double sub1b = q_marginal(spec, p, s, 1, a(1));
  const double auxb = aux_eval(spec, p, s.transpose(), a.transpose())(0);
  const double dq = q_total(spec, p, s, a) - (before0 + before2 + sub1 + aux);
  CHECK(dq == doctest::Approx((sub1b - sub1) + (auxb - aux)).epsilon(1e-10));
}

TEST_CASE("mixed partials vanish without the aux network") {
  const auto spec = small_spec(2, 3);
  ad::ParamStore p = random_critic(spec, 6);
  zero_params(p, kAuxPrefix);
  const Eigen::VectorXd s = Eigen::Vector2d(-0.5, 0.2);
  const double h = 1e-3;
  auto q = [&](double x, double y) { return q_total(spec, p, s, Eigen::Vector3d(x, 0.1, y)); };
  const double x = 0.2, y = -0.4;
  const double mixed = (q(x + h, y + h) - q(x + h, y - h) - q(x - h, y + h) + q(x - h, y - h)) / (4 * h * h);
  CHECK(std::fabs(mixed) < 1e-8);
}

TEST_CASE("subnet_grid matches pointwise evaluation") {
  const auto spec = small_spec();
  const ad::ParamStore p = random_critic(spec, 7);
  ad::Matrix S(2, 3);
  S << 0.1, 0.2, 0.3, -0.5, 0.7, 0.0;
  const Eigen::VectorXd grid = Eigen::VectorXd::LinSpaced(9, -0.9, 0.9);
  const ad::Matrix g = subnet_grid(spec, p, S, 1, grid);
  REQUIRE(g.rows() == 2);
  REQUIRE(g.cols() == 9);
  for (int b = 0; b < 2; ++b) {
    for (int k = 0; k < 9; ++k) {
      CHECK(g(b, k) == doctest::Approx(q_marginal(spec, p, S.row(b).transpose(), 1, grid(k))).epsilon(1e-12));
    }
  }
}

TEST_CASE("index and dimension errors") {
  const auto spec = small_spec();
  const ad::ParamStore p = random_critic(spec, 8);
  const Eigen::VectorXd s = Eigen::VectorXd::Zero(3);
  CHECK_THROWS_AS(q_marginal(spec, p, s, 2, 0.0), Error);
  CHECK_THROWS_AS(q_marginal(spec, p, s, -1, 0.0), Error);
  try {
    q_total(spec, p, Eigen::VectorXd::Zero(2), Eigen::Vector2d(0, 0));
    FAIL("expected error");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::kDimensionMismatch);
  }
}

TEST_CASE("soft update arithmetic") {
  const auto spec = small_spec();
  std::mt19937_64 rng(9);
  SUBCASE("tau = 1 copies the online critics") {
    CriticEnsemble ens(spec, 1.0, {}, rng);
    for (auto& [name, e] : ens.online(0)) e.values.assign(e.size(), 0.5);
    ens.soft_update();
    CHECK(ens.target(0) == ens.online(0));
    CHECK(ens.target(1) == ens.online(1));
  }
  SUBCASE("tau = 0.005 on scalars and geometric convergence") {
    CriticEnsemble ens(spec, 0.005, {}, rng);
    for (int i = 0; i < 2; ++i) {
      for (auto& [name, e] : ens.online(i)) e.values.assign(e.size(), 1.0);
      for (auto& [name, e] : ens.target_mut(i)) e.values.assign(e.size(), 0.0);
    }
    ens.soft_update();
    const std::string name = weight_name(kAuxPrefix, 0);
    CHECK(ens.target(0).at(name).values[0] == doctest::Approx(0.005).epsilon(1e-15));
    double gap = 1.0 - ens.target(1).at(name).values[3];
    for (int k = 0; k < 20; ++k) {
      ens.soft_update();
      const double g = 1.0 - ens.target(1).at(name).values[3];
      CHECK(g == doctest::Approx(gap * 0.995).epsilon(1e-12));
      gap = g;
    }
  }
  CHECK_THROWS_AS(CriticEnsemble(spec, 0.0, {}, rng), Error);
}

TEST_CASE("bellman targets by hand") {
  const auto spec = small_spec();
  std::mt19937_64 rng(10);
  CriticEnsemble ens(spec, 0.005, {}, rng);
  ens.target_mut(0) = random_critic(spec, 11);
  ens.target_mut(1) = random_critic(spec, 12);
  Batch b = random_batch(spec, 3, rng);
  b.terminal(2) = 1.0;
  const ad::Matrix next_a = b.actions.reverse();
  const Eigen::VectorXd logp = Eigen::Vector3d(-0.3, 0.7, 1.1);
  const double alpha = 0.2, gamma = 0.9;
  const Eigen::VectorXd y = bellman_targets(ens, b, next_a, logp, alpha, gamma);
  for (int r = 0; r < 3; ++r) {
    const auto s2 = testing::to_std(b.next_states.row(r).transpose());
    const auto a2 = testing::to_std(next_a.row(r).transpose());
    const double qmin = std::min(ref_q_total(spec, ens.target(0), s2, a2),
                                 ref_q_total(spec, ens.target(1), s2, a2));
    const double expect = b.rewards(r) + gamma * (1.0 - b.terminal(r)) * (qmin - alpha * logp(r));
    CHECK(y(r) == doctest::Approx(expect).epsilon(1e-12));
  }
}

TEST_CASE("zero reward and zero discount give loss mean Q^2") {
  const auto spec = small_spec();
  std::mt19937_64 rng(13);
  CriticEnsemble ens(spec, 0.005, {}, rng);
  Batch b = random_batch(spec, 8, rng);
  b.rewards.setZero();
  const Eigen::VectorXd q0 = critic_eval(spec, ens.online(0), b.states, b.actions);
  const Eigen::VectorXd q1 = critic_eval(spec, ens.online(1), b.states, b.actions);
  const auto st = bellman_update(ens, b, b.actions, Eigen::VectorXd::Zero(8), 0.2, 0.0);
  CHECK(st.targets.isZero(0.0));
  CHECK(st.mse == doctest::Approx(0.5 * (q0.squaredNorm() + q1.squaredNorm()) / 8).epsilon(1e-12));
}

TEST_CASE("single transition loss by hand") {
  const auto spec = small_spec();
  std::mt19937_64 rng(14);
  CriticEnsemble ens(spec, 0.005, {}, rng);
  Batch b = random_batch(spec, 1, rng);
  const ad::Matrix next_a = ad::Matrix::Constant(1, 2, 0.3);
  const Eigen::VectorXd logp = Eigen::VectorXd::Constant(1, -0.5);
  const auto s2 = testing::to_std(b.next_states.row(0).transpose());
  const double qmin = std::min(ref_q_total(spec, ens.target(0), s2, {0.3, 0.3}),
                               ref_q_total(spec, ens.target(1), s2, {0.3, 0.3}));
  const double y = b.rewards(0) + 0.99 * (qmin + 0.2 * 0.5);
  const auto s = testing::to_std(b.states.row(0).transpose());
  const auto a = testing::to_std(b.actions.row(0).transpose());
  const double e0 = ref_q_total(spec, ens.online(0), s, a) - y;
  const double e1 = ref_q_total(spec, ens.online(1), s, a) - y;
  const auto st = bellman_update(ens, b, next_a, logp, 0.2, 0.99);
  CHECK(st.mse == doctest::Approx(0.5 * (e0 * e0 + e1 * e1)).epsilon(1e-10));
}

TEST_CASE("non-finite target names the transition") {
  const auto spec = small_spec();
  std::mt19937_64 rng(15);
  CriticEnsemble ens(spec, 0.005, {}, rng);
  Batch b = random_batch(spec, 4, rng);
  b.rewards(2) = std::nan("");
  try {
    bellman_targets(ens, b, b.actions, Eigen::VectorXd::Zero(4), 0.2, 0.99);
    FAIL("expected error");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::kNonFinite);
    CHECK(std::string(e.what()).find("2") != std::string::npos);
  }
}

TEST_CASE("one-step bandit regression recovers -a^2") {
  VdnACriticSpec spec;
  spec.state_dim = 1;
  spec.action_dim = 1;
  std::mt19937_64 rng(16);
  CriticEnsemble ens(spec, 0.005, ad::AdamConfig{3e-3}, rng);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  for (int step = 0; step < 1500; ++step) {
    Batch b;
    b.states = ad::Matrix::Zero(64, 1);
    b.next_states = b.states;
    b.actions = ad::Matrix(64, 1);
    for (int i = 0; i < 64; ++i) b.actions(i, 0) = u(rng);
    b.rewards = -b.actions.col(0).array().square();
    b.terminal = Eigen::VectorXd::Ones(64);
    bellman_update(ens, b, b.actions, Eigen::VectorXd::Zero(64), 0.0, 0.0);
  }
  double worst = 0.0;
  for (double a = -0.95; a <= 0.95; a += 0.05) {
    const double q = q_total(spec, ens.online(0), Eigen::VectorXd::Zero(1), Eigen::VectorXd::Constant(1, a));
    worst = std::max(worst, std::fabs(q + a * a));
  }
  CHECK(worst < 0.05);
}

TEST_CASE("swapping twin initializations swaps trajectories") {
  const auto spec = small_spec();
  std::mt19937_64 rng(17);
  CriticEnsemble a(spec, 0.01, {}, rng);
  CriticEnsemble b = a;
  std::swap(b.online(0), b.online(1));
  std::swap(b.target_mut(0), b.target_mut(1));
  for (int k = 0; k < 5; ++k) {
    Batch batch = random_batch(spec, 16, rng);
    const Eigen::VectorXd logp = Eigen::VectorXd::Constant(16, -0.1);
    bellman_update(a, batch, batch.actions, logp, 0.2, 0.99, 0.5);
    bellman_update(b, batch, batch.actions, logp, 0.2, 0.99, 0.5);
    a.soft_update();
    b.soft_update();
  }
  CHECK(a.online(0) == b.online(1));
  CHECK(a.online(1) == b.online(0));
  CHECK(a.target(0) == b.target(1));
}

TEST_CASE("export and import round trip") {
  const auto spec = small_spec();
  std::mt19937_64 rng(18);
  CriticEnsemble a(spec, 0.01, {}, rng);
  const ad::ParamStore merged = a.export_params();
  for (const auto& [name, e] : merged) {
    const bool prefixed = name.rfind("critic1.", 0) == 0 || name.rfind("critic2.", 0) == 0 ||
                          name.rfind("target1.", 0) == 0 || name.rfind("target2.", 0) == 0;
    CHECK(prefixed);
  }
  CriticEnsemble b(spec, 0.01, {}, rng);
  b.import_params(merged);
  CHECK(b.online(0) == a.online(0));
  CHECK(b.target(1) == a.target(1));
}
