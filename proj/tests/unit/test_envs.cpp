#include "maxent/envs.hpp"
#include "maxent/error.hpp"

#include <doctest.h>

#include <cmath>
#include <limits>
#include <numbers>
#include <random>
#include <set>

using namespace maxent;

namespace {

Eigen::VectorXd uniform_action(int n, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  Eigen::VectorXd a(n);
  for (int i = 0; i < n; ++i) a(i) = u(rng);
  return a;
}

}  // namespace

TEST_CASE("reset is deterministic per seed") {
  for (const auto& name : env_names()) {
    auto e1 = make_env(name);
    auto e2 = make_env(name);
    CHECK(e1->reset(42) == e2->reset(42));
  }
}

TEST_CASE("pendulum resets differ across seeds and stay in range") {
  auto env = make_env("pendulum1d");
  std::set<std::pair<double, double>> seen;
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    const Eigen::VectorXd s = env->reset(seed);
    REQUIRE(s.size() == 3);
    CHECK(s(0) * s(0) + s(1) * s(1) == doctest::Approx(1.0).epsilon(1e-14));
    const double th = std::atan2(s(1), s(0));
    CHECK(std::fabs(th) <= std::numbers::pi);
    CHECK(std::fabs(s(2)) <= 1.0);
    seen.insert({th, s(2)});
  }
  CHECK(seen.size() == 100);
}

TEST_CASE("quadratic bandit") {
  auto env = make_env("quadratic_bandit_1d");
  env->reset(0);
  const StepResult r = env->step(Eigen::VectorXd::Constant(1, 0.1));
  CHECK(r.reward == doctest::Approx(1.0 - 0.09).epsilon(1e-15));
  CHECK(r.done);
  CHECK_FALSE(r.truncated);
  double best = -1e300, arg = 0.0;
  for (int k = 0; k <= 2000; ++k) {
    const double a = -1.0 + k * 0.001;
    if (quadratic_bandit_reward(a) > best) {
      best = quadratic_bandit_reward(a);
      arg = a;
    }
  }
  CHECK(std::fabs(arg - 0.4) < 1e-9);
  CHECK(best == doctest::Approx(1.0));
}

TEST_CASE("coupled bandit optimum by hand") {
  // [2 0.8; 0.8 2] a = [0.6; -0.6] gives a = (0.5, -0.5).
  const Eigen::Vector2d opt = coupled_bandit_optimum();
  CHECK(opt(0) == doctest::Approx(0.5).epsilon(1e-14));
  CHECK(opt(1) == doctest::Approx(-0.5).epsilon(1e-14));
  CHECK(coupled_bandit_reward(0.1, 0.2) == doctest::Approx(1.0 - 0.04 - 0.25 - 0.8 * 0.02).epsilon(1e-15));

  double best = -1e300;
  Eigen::Vector2d arg;
  for (int i = 0; i <= 400; ++i) {
    for (int j = 0; j <= 400; ++j) {
      const double a1 = -1.0 + i * 0.005, a2 = -1.0 + j * 0.005;
      if (coupled_bandit_reward(a1, a2) > best) {
        best = coupled_bandit_reward(a1, a2);
        arg = {a1, a2};
      }
    }
  }
  CHECK((arg - opt).cwiseAbs().maxCoeff() < 1e-9);
  CHECK(make_env("coupled_bandit_2d")->spec().reward_max == doctest::Approx(best).epsilon(1e-12));
}

TEST_CASE("one pendulum step by hand") {
  auto env = make_env("pendulum1d");
  const Eigen::VectorXd s0 = env->reset(3);
  const double th = std::atan2(s0(1), s0(0)), thdot = s0(2);
  const double a = 0.6, u = 2.0 * a;
  const StepResult r = env->step(Eigen::VectorXd::Constant(1, a));
  CHECK(r.reward == doctest::Approx(-(th * th + 0.1 * thdot * thdot + 0.01 * u * u)).epsilon(1e-13));
  const double thdot1 = thdot + (10.0 * std::sin(th) + u) * 0.05;
  const double th1 = th + thdot1 * 0.05;
  CHECK(r.state(2) == doctest::Approx(thdot1).epsilon(1e-13));
  CHECK(r.state(0) == doctest::Approx(std::cos(th1)).epsilon(1e-13));
  CHECK(r.state(1) == doctest::Approx(std::sin(th1)).epsilon(1e-13));
  CHECK_FALSE(r.done);
}

TEST_CASE("pendulum episodes end by truncation at 200 steps") {
  for (const char* name : {"pendulum1d", "pendulum2d_coupled"}) {
    auto env = make_env(name);
    const int n = env->spec().action_dim;
    env->reset(1);
    for (int t = 1; t <= 200; ++t) {
      const StepResult r = env->step(Eigen::VectorXd::Zero(n));
      CHECK(r.done == (t == 200));
      CHECK(r.truncated == (t == 200));
    }
  }
}

TEST_CASE("identical seeds and actions give identical trajectories") {
  for (const auto& name : env_names()) {
    auto e1 = make_env(name);
    auto e2 = make_env(name);
    const int n = e1->spec().action_dim;
    std::mt19937_64 rng(5);
    e1->reset(9);
    e2->reset(9);
    for (int t = 0; t < 300; ++t) {
      const Eigen::VectorXd a = uniform_action(n, rng);
      const StepResult r1 = e1->step(a);
      const StepResult r2 = e2->step(a);
      CHECK(r1.state == r2.state);
      CHECK(r1.reward == r2.reward);
      CHECK(r1.done == r2.done);
      if (r1.done) {
        e1->reset(t);
        e2->reset(t);
      }
    }
  }
}

TEST_CASE("rewards stay within the declared range") {
  for (const auto& name : env_names()) {
    auto env = make_env(name);
    const EnvSpec& spec = env->spec();
    std::mt19937_64 rng(6);
    env->reset(0);
    std::uint64_t episode = 1;
    double lo = 1e300, hi = -1e300;
    for (int t = 0; t < 100000; ++t) {
      const StepResult r = env->step(uniform_action(spec.action_dim, rng));
      lo = std::min(lo, r.reward);
      hi = std::max(hi, r.reward);
      if (r.done) env->reset(episode++);
    }
    CHECK(lo >= spec.reward_min);
    CHECK(hi <= spec.reward_max);
  }
}

TEST_CASE("action errors") {
  auto env = make_env("pendulum2d_coupled");
  env->reset(0);
  for (double bad : {1.0000001, -3.0, std::numeric_limits<double>::quiet_NaN(),
                     std::numeric_limits<double>::infinity()}) {
    try {
      env->step(Eigen::Vector2d(0.0, bad));
      FAIL("expected error");
    } catch (const Error& e) {
      CHECK(e.kind() == ErrorKind::kOutOfBox);
      CHECK(e.detail().find("component 1") != std::string::npos);
    }
  }
  CHECK_NOTHROW(env->step(Eigen::Vector2d(1.0, -1.0)));
  CHECK_THROWS_AS(env->step(Eigen::VectorXd::Zero(3)), Error);
  CHECK_THROWS_AS(make_env("cartpole"), Error);
}
