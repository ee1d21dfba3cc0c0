#include "maxent/critic.hpp"
#include "maxent/error.hpp"
#include "maxent/quadrature.hpp"
#include "maxent/target.hpp"

#include "../support/spline.hpp"

#include <doctest.h>

#include <cmath>
#include <random>

using namespace maxent;

namespace {

BatchQFn quadratic_q(double c) {
  // Q(a) / alpha with alpha = 1: -(a1^2 + a2^2 + c a1 a2) / 0.4.
  return [c](const Eigen::VectorXd&, const ad::Matrix& a) {
    Eigen::VectorXd q(a.rows());
    for (Eigen::Index r = 0; r < a.rows(); ++r) {
      q(r) = -(a(r, 0) * a(r, 0) + a(r, 1) * a(r, 1) + c * a(r, 0) * a(r, 1)) / 0.4;
    }
    return q;
  };
}

double trapezoid_integral(const Eigen::VectorXd& f, double h) {
  return h * (f.sum() - 0.5 * (f(0) + f(f.size() - 1)));
}

CriticEnsemble small_critic(std::uint64_t seed) {
  VdnACriticSpec spec;
  spec.state_dim = 2;
  spec.action_dim = 2;
  spec.embed_dim = 4;
  spec.embed_hidden = 6;
  spec.subnet_hidden = 8;
  spec.aux_hidden = 8;
  std::mt19937_64 rng(seed);
  return CriticEnsemble(spec, 0.005, {}, rng);
}

}  // namespace

TEST_CASE("isotropic quadratic has zero means and equal variances") {
  BoltzmannTarget t(
      [](const Eigen::VectorXd&, const ad::Matrix& a) {
        return Eigen::VectorXd(-(a.rowwise().squaredNorm()) / (2 * 0.09));
      },
      2, 1.0);
  const auto r = grid_oracle(t, Eigen::VectorXd::Zero(1), 201);
  CHECK(std::fabs(r.means(0)) < 1e-10);
  CHECK(std::fabs(r.means(1)) < 1e-10);
  CHECK(r.vars(0) == doctest::Approx(r.vars(1)).epsilon(1e-12));
  for (int d = 0; d < 2; ++d) {
    CHECK(std::fabs(trapezoid_integral(r.marginals[d], 2.0 / 200) - 1.0) < 1e-6);
  }
}

TEST_CASE("separable Q gives the 1-D marginal and a product joint") {
  std::mt19937_64 rng(1);
  const auto g1 = testing::random_spline(rng, 6, 1.5);
  const auto g2 = testing::random_spline(rng, 6, 1.5);
  const double alpha = 0.3;
  BoltzmannTarget t(
      [&](const Eigen::VectorXd&, const ad::Matrix& a) {
        Eigen::VectorXd q(a.rows());
        for (Eigen::Index r = 0; r < a.rows(); ++r) q(r) = g1(a(r, 0)) + g2(a(r, 1));
        return q;
      },
      2, alpha);
  const int P = 101;
  const auto r = grid_oracle(t, Eigen::VectorXd::Zero(1), P);
  const double h = 2.0 / (P - 1);
  Eigen::VectorXd m1(P);
  for (int k = 0; k < P; ++k) m1(k) = std::exp(g1(-1.0 + k * h) / alpha);
  m1 /= trapezoid_integral(m1, h);
  CHECK((r.marginals[0] - m1).cwiseAbs().maxCoeff() < 1e-8);

  // Joint density at a few nodes against the product of marginals.
  for (int i : {0, 17, 50, 100}) {
    for (int j : {3, 44, 99}) {
      ad::Matrix a(1, 2);
      a << -1.0 + i * h, -1.0 + j * h;
      const double joint = std::exp(t.log_q_unnorm(Eigen::VectorXd::Zero(1), a)(0) - r.log_z);
      CHECK(std::fabs(joint - r.marginals[0](i) * r.marginals[1](j)) < 1e-8);
    }
  }
}

TEST_CASE("correlated quadratic against Monte Carlo") {
  BoltzmannTarget t(quadratic_q(1.8), 2, 1.0);
  const auto r = grid_oracle(t, Eigen::VectorXd::Zero(1), 201);
  CHECK(std::fabs(r.means(0)) < 1e-10);
  CHECK(std::fabs(r.means(1)) < 1e-10);

  // Self-normalized importance sampling from the uniform box in 100 batches;
  // the spread of batch estimates gives the standard error.
  std::mt19937_64 rng(2);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  const int batches = 100, per = 10000;
  std::vector<double> est(batches);
  ad::Matrix a(per, 2);
  for (int b = 0; b < batches; ++b) {
    for (int i = 0; i < per; ++i) {
      a(i, 0) = u(rng);
      a(i, 1) = u(rng);
    }
    const Eigen::VectorXd lw = t.log_q_unnorm(Eigen::VectorXd::Zero(1), a);
    const Eigen::ArrayXd w = (lw.array() - lw.maxCoeff()).exp();
    const double m = (w * a.col(0).array()).sum() / w.sum();
    est[b] = (w * (a.col(0).array() - m).square()).sum() / w.sum();
  }
  double mean = 0.0;
  for (double e : est) mean += e / batches;
  double var = 0.0;
  for (double e : est) var += (e - mean) * (e - mean) / (batches - 1);
  const double se = std::sqrt(var / batches);
  CHECK(std::fabs(r.vars(0) - mean) < 3.0 * se);
  CHECK(std::fabs(r.vars(1) - mean) < 3.0 * se);
}

TEST_CASE("shift invariance") {
  BoltzmannTarget t(quadratic_q(0.7), 2, 0.5);
  BoltzmannTarget shifted = t;
  shifted.q = [base = t.q](const Eigen::VectorXd& s, const ad::Matrix& a) {
    return Eigen::VectorXd(base(s, a).array() + 250.0 * s(0));
  };
  const Eigen::VectorXd s = Eigen::VectorXd::Constant(1, 3.0);
  const auto r0 = grid_oracle(t, s, 101);
  const auto r1 = grid_oracle(shifted, s, 101);
  for (int d = 0; d < 2; ++d) {
    CHECK((r0.marginals[d] - r1.marginals[d]).cwiseAbs().maxCoeff() < 1e-10);
  }
}

TEST_CASE("oracle argument errors") {
  auto zero = [](const Eigen::VectorXd&, const ad::Matrix& a) { return Eigen::VectorXd::Zero(a.rows()).eval(); };
  try {
    grid_oracle(BoltzmannTarget(zero, 5, 1.0), Eigen::VectorXd::Zero(1), 16);
    FAIL("expected error");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::kDimensionTooLarge);
  }
  CHECK_THROWS_AS(grid_oracle(BoltzmannTarget(zero, 1, 1.0), Eigen::VectorXd::Zero(1), 15), Error);
  CHECK_THROWS_AS(grid_oracle(BoltzmannTarget(zero, 1, 0.0), Eigen::VectorXd::Zero(1), 16), Error);
}

TEST_CASE("target from critic") {
  CriticEnsemble c = small_critic(3);
  const Eigen::VectorXd s = Eigen::Vector2d(0.2, -0.1);
  ad::Matrix a(3, 2);
  a << 0.1, 0.2, -0.5, 0.9, 0.0, -0.3;

  SUBCASE("doubling alpha halves the log density") {
    const auto t1 = target_from_critic(c, 0.2);
    const auto t2 = target_from_critic(c, 0.4);
    const Eigen::VectorXd l1 = t1.log_q_unnorm(s, a);
    const Eigen::VectorXd l2 = t2.log_q_unnorm(s, a);
    CHECK((l2 - 0.5 * l1).cwiseAbs().maxCoeff() < 1e-12);
    const Eigen::VectorXd qmin = c.min_online_q(s.transpose().replicate(3, 1), a);
    CHECK((l1 - qmin / 0.2).cwiseAbs().maxCoeff() < 1e-12);
  }

  SUBCASE("constant critic gives uniform marginals") {
    for (int i = 0; i < 2; ++i) {
      for (auto& [name, e] : c.online(i)) e.values.assign(e.size(), 0.0);
    }
    const auto r = grid_oracle(target_from_critic(c, 0.2), s, 41);
    for (int d = 0; d < 2; ++d) CHECK((r.marginals[d].array() - 0.5).abs().maxCoeff() < 1e-12);
  }
}

TEST_CASE("random critic: trapezoid oracle agrees with a Simpson marginal") {
  const CriticEnsemble c = small_critic(4);
  const auto t = target_from_critic(c, 0.5);
  const Eigen::VectorXd s = Eigen::Vector2d(0.4, 0.3);
  const int P = 1601;
  const auto r = grid_oracle(t, s, P);

  const double h = 2.0 / (P - 1);
  const Eigen::VectorXd axis = Eigen::VectorXd::LinSpaced(P, -1.0, 1.0);
  std::vector<double> m(P), row(P);
  ad::Matrix a(P, 2);
  a.col(1) = axis;
  for (int i = 0; i < P; ++i) {
    a.col(0).setConstant(axis(i));
    const Eigen::VectorXd lq = t.log_q_unnorm(s, a);
    for (int j = 0; j < P; ++j) row[j] = std::exp(lq(j));
    m[i] = simpson(row, h);
  }
  const double z = simpson(m, h);
  double worst = 0.0;
  for (int i = 0; i < P; ++i) worst = std::max(worst, std::fabs(m[i] / z - r.marginals[0](i)));
  CHECK(worst < 1e-6);

  const Eigen::VectorXd pts = Eigen::Vector3d(-0.73, 0.0, 0.512);
  const Eigen::VectorXd at = oracle_marginal_at(t, s, 0, pts, P);
  for (int k = 0; k < 3; ++k) {
    ad::Matrix b(P, 2);
    b.col(0).setConstant(pts(k));
    b.col(1) = axis;
    const Eigen::VectorXd lq = t.log_q_unnorm(s, b);
    for (int j = 0; j < P; ++j) row[j] = std::exp(lq(j));
    CHECK(at(k) == doctest::Approx(simpson(row, h) / z).epsilon(1e-6));
  }
}
