// Best-achievable return estimate for a pendulum environment: open-loop
// cross-entropy-method planning over the whole episode, per reset seed.
// The environment is deterministic given the seed, so an open-loop plan is a
// valid (lower-bound) estimate of the optimal return.

#include "maxent/envs.hpp"
#include "maxent/io.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <iostream>
#include <numeric>
#include <random>

using namespace maxent;

namespace {

double rollout(Env& env, std::uint64_t seed, const Eigen::MatrixXd& plan) {
  env.reset(seed);
  double ret = 0.0;
  for (Eigen::Index t = 0; t < plan.rows(); ++t) {
    const StepResult r = env.step(plan.row(t).transpose());
    ret += r.reward;
    if (r.done) break;
  }
  return ret;
}

double cem(Env& env, std::uint64_t seed, int population, int elites, int iterations, std::mt19937_64& rng) {
  const int T = env.spec().max_episode_steps;
  const int N = env.spec().action_dim;
  Eigen::MatrixXd mean = Eigen::MatrixXd::Zero(T, N);
  Eigen::MatrixXd sd = Eigen::MatrixXd::Constant(T, N, 0.6);
  std::normal_distribution<double> z;
  std::vector<Eigen::MatrixXd> cand(population, Eigen::MatrixXd(T, N));
  std::vector<double> ret(population);
  std::vector<int> order(population);
  double best = -1e300;
  for (int it = 0; it < iterations; ++it) {
    for (int p = 0; p < population; ++p) {
      for (int t = 0; t < T; ++t) {
        for (int i = 0; i < N; ++i) cand[p](t, i) = std::clamp(mean(t, i) + sd(t, i) * z(rng), -1.0, 1.0);
      }
      ret[p] = rollout(env, seed, cand[p]);
      best = std::max(best, ret[p]);
    }
    std::iota(order.begin(), order.end(), 0);
    std::partial_sort(order.begin(), order.begin() + elites, order.end(),
                      [&](int a, int b) { return ret[a] > ret[b]; });
    mean.setZero();
    for (int e = 0; e < elites; ++e) mean += cand[order[e]] / elites;
    Eigen::MatrixXd var = Eigen::MatrixXd::Zero(T, N);
    for (int e = 0; e < elites; ++e) var += (cand[order[e]] - mean).array().square().matrix() / elites;
    sd = (var.array().sqrt() + 0.01).matrix();
  }
  return best;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Open-loop CEM estimate of the best achievable pendulum return"};
  std::string env_name = "pendulum1d";
  int seeds = 5, population = 400, elites = 40, iterations = 100;
  std::uint64_t first_seed = 12345;
  app.add_option("--env", env_name);
  app.add_option("--seeds", seeds);
  app.add_option("--first-seed", first_seed, "Reset seed of the first episode (evaluate() uses 12345)");
  app.add_option("--population", population);
  app.add_option("--elites", elites);
  app.add_option("--iterations", iterations);
  CLI11_PARSE(app, argc, argv);

  auto env = make_env(env_name);
  std::mt19937_64 rng(0);
  double sum = 0.0;
  std::cout << "seed,best_return\n";
  for (int k = 0; k < seeds; ++k) {
    const double r = cem(*env, first_seed + std::uint64_t(k), population, elites, iterations, rng);
    sum += r;
    std::cout << first_seed + std::uint64_t(k) << "," << format_double(r) << "\n";
  }
  std::cout << "mean," << format_double(sum / seeds) << "\n";
  return 0;
}
