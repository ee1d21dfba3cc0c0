#include "maxent/envs.hpp"

#include "maxent/error.hpp"

#include <cmath>
#include <numbers>
#include <random>

namespace maxent {
namespace {

constexpr const char* kModule = "envs";
constexpr double kPi = std::numbers::pi;

void check_action(const Eigen::VectorXd& a, const EnvSpec& spec) {
  if (a.size() != spec.action_dim) {
    throw Error(ErrorKind::kDimensionMismatch, kModule,
                spec.name + " expects " + std::to_string(spec.action_dim) + " action components");
  }
  for (Eigen::Index i = 0; i < a.size(); ++i) {
    if (!(std::fabs(a(i)) <= 1.0)) {
      throw Error(ErrorKind::kOutOfBox, kModule,
                  spec.name + ": action component " + std::to_string(i) + " = " +
                      std::to_string(a(i)) + " is outside [-1, 1]");
    }
  }
}

double wrap_angle(double th) {
  th = std::fmod(th + kPi, 2.0 * kPi);
  if (th < 0.0) th += 2.0 * kPi;
  return th - kPi;
}

class QuadraticBandit final : public Env {
 public:
  QuadraticBandit() : spec_{"quadratic_bandit_1d", 1, 1, 1, quadratic_bandit_reward(-1.0), 1.0} {}
  const EnvSpec& spec() const override { return spec_; }
  Eigen::VectorXd reset(std::uint64_t) override { return Eigen::VectorXd::Zero(1); }
  StepResult step(const Eigen::VectorXd& a) override {
    check_action(a, spec_);
    return {Eigen::VectorXd::Zero(1), quadratic_bandit_reward(a(0)), true, false};
  }

 private:
  EnvSpec spec_;
};

class CoupledBandit final : public Env {
 public:
  CoupledBandit() {
    const Eigen::Vector2d opt = coupled_bandit_optimum();
    // The quadratic is concave, so its minimum over the box sits at a corner.
    double lo = coupled_bandit_reward(-1, -1);
    for (double a1 : {-1.0, 1.0}) {
      for (double a2 : {-1.0, 1.0}) lo = std::min(lo, coupled_bandit_reward(a1, a2));
    }
    spec_ = {"coupled_bandit_2d", 1, 2, 1, lo, coupled_bandit_reward(opt(0), opt(1))};
  }
  const EnvSpec& spec() const override { return spec_; }
  Eigen::VectorXd reset(std::uint64_t) override { return Eigen::VectorXd::Zero(1); }
  StepResult step(const Eigen::VectorXd& a) override {
    check_action(a, spec_);
    return {Eigen::VectorXd::Zero(1), coupled_bandit_reward(a(0), a(1)), true, false};
  }

 private:
  EnvSpec spec_;
};

// Angle 0 is upright; torque u = kMaxTorque * a.
struct PendulumParams {
  static constexpr double g = 10.0;
  static constexpr double m = 1.0;
  static constexpr double l = 1.0;
  static constexpr double dt = 0.05;
  static constexpr double max_speed = 8.0;
  static constexpr double max_torque = 2.0;
};

double pendulum_cost(double th, double thdot, double u) {
  return th * th + 0.1 * thdot * thdot + 0.01 * u * u;
}

double pendulum_max_cost() {
  return pendulum_cost(kPi, PendulumParams::max_speed, PendulumParams::max_torque);
}

// Semi-implicit Euler: velocity first, then angle from the new velocity.
void pendulum_integrate(double& th, double& thdot, double u) {
  using P = PendulumParams;
  const double acc = P::g / P::l * std::sin(th) + u / (P::m * P::l * P::l);
  thdot = std::clamp(thdot + acc * P::dt, -P::max_speed, P::max_speed);
  th = wrap_angle(th + thdot * P::dt);
}

class Pendulum final : public Env {
 public:
  explicit Pendulum(int count, double coupling, std::string name) : count_(count), coupling_(coupling) {
    double lo = -count * pendulum_max_cost();
    if (count > 1) lo -= coupling * (2.0 * kPi) * (2.0 * kPi);
    spec_ = {std::move(name), 3 * count, count, 200, lo, 0.0};
    th_.assign(count, 0.0);
    thdot_.assign(count, 0.0);
  }
  const EnvSpec& spec() const override { return spec_; }

  Eigen::VectorXd reset(std::uint64_t seed) override {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> angle(-kPi, kPi);
    std::uniform_real_distribution<double> speed(-1.0, 1.0);
    for (int i = 0; i < count_; ++i) {
      th_[i] = angle(rng);
      thdot_[i] = speed(rng);
    }
    t_ = 0;
    return observe();
  }

  StepResult step(const Eigen::VectorXd& a) override {
    check_action(a, spec_);
    // Reward is taken on the pre-step state.
    double cost = 0.0;
    for (int i = 0; i < count_; ++i) {
      cost += pendulum_cost(th_[i], thdot_[i], PendulumParams::max_torque * a(i));
    }
    for (int i = 0; i + 1 < count_; ++i) {
      const double d = th_[i] - th_[i + 1];
      cost += coupling_ * d * d;
    }
    for (int i = 0; i < count_; ++i) {
      pendulum_integrate(th_[i], thdot_[i], PendulumParams::max_torque * a(i));
    }
    ++t_;
    const bool end = t_ >= spec_.max_episode_steps;
    return {observe(), -cost, end, end};
  }

 private:
  Eigen::VectorXd observe() const {
    Eigen::VectorXd s(3 * count_);
    for (int i = 0; i < count_; ++i) {
      s(3 * i) = std::cos(th_[i]);
      s(3 * i + 1) = std::sin(th_[i]);
      s(3 * i + 2) = thdot_[i];
    }
    return s;
  }

  int count_;
  double coupling_;
  EnvSpec spec_;
  std::vector<double> th_;
  std::vector<double> thdot_;
  int t_ = 0;
};

}  // namespace

double quadratic_bandit_reward(double a) {
  const double d = a - kQuadraticBanditOptimumAction;
  return 1.0 - d * d;
}

double coupled_bandit_reward(double a1, double a2) {
  return 1.0 - (a1 - 0.3) * (a1 - 0.3) - (a2 + 0.3) * (a2 + 0.3) - kCoupledBanditCoupling * a1 * a2;
}

Eigen::Vector2d coupled_bandit_optimum() {
  // Gradient zero: [2 c; c 2] a = [0.6; -0.6].
  Eigen::Matrix2d h;
  h << 2.0, kCoupledBanditCoupling, kCoupledBanditCoupling, 2.0;
  return h.lu().solve(Eigen::Vector2d(0.6, -0.6));
}

std::vector<std::string> env_names() {
  return {"quadratic_bandit_1d", "coupled_bandit_2d", "pendulum1d", "pendulum2d_coupled"};
}

std::unique_ptr<Env> make_env(const std::string& name) {
  if (name == "quadratic_bandit_1d") return std::make_unique<QuadraticBandit>();
  if (name == "coupled_bandit_2d") return std::make_unique<CoupledBandit>();
  if (name == "pendulum1d") return std::make_unique<Pendulum>(1, 0.0, name);
  if (name == "pendulum2d_coupled") return std::make_unique<Pendulum>(2, 0.5, name);
  throw Error(ErrorKind::kInvalidArgument, kModule, "unknown environment '" + name + "'");
}

}  // namespace maxent
