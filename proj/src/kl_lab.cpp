#include "maxent/kl_lab.hpp"

#include "maxent/autodiff.hpp"
#include "maxent/error.hpp"
#include "maxent/policy.hpp"

#include <cmath>
#include <random>

namespace maxent {
namespace {

constexpr const char* kModule = "kl_lab";
constexpr double kHalfLog2Pi = 0.91893853320467274178;

}  // namespace

void KlLabConfig::validate() const {
  if (!(sigma_star > 0.0) || !(sigma0 > 0.0)) {
    throw Error(ErrorKind::kInvalidArgument, kModule, "sigma values must be positive");
  }
  if (epochs < 1) throw Error(ErrorKind::kInvalidArgument, kModule, "epochs must be >= 1");
  if (samples_per_step < 1) {
    throw Error(ErrorKind::kInvalidArgument, kModule, "samples_per_step must be >= 1");
  }
  if (!(lr >= 0.0)) throw Error(ErrorKind::kInvalidArgument, kModule, "lr must be >= 0");
}

double gaussian_kl(double mu, double sigma, double mu_star, double sigma_star) {
  return std::log(sigma_star / sigma) +
         (sigma * sigma + (mu - mu_star) * (mu - mu_star)) / (2.0 * sigma_star * sigma_star) - 0.5;
}

double kl_lab_param_error(const KlLabRow& row, const KlLabConfig& cfg) {
  return std::fabs(row.mu - cfg.mu_star) + std::fabs(row.sigma - cfg.sigma_star);
}

std::vector<KlLabRow> run_kl_lab(const KlLabConfig& cfg) {
  cfg.validate();
  ad::ParamStore p;
  p.add("mu", {1}, {cfg.mu0});
  p.add("log_sigma", {1}, {std::log(cfg.sigma0)});
  std::mt19937_64 rng(cfg.seed);
  const double log_floor = std::log(kKlLabSigmaFloor);
  const double inv_2s2 = 1.0 / (2.0 * cfg.sigma_star * cfg.sigma_star);

  std::vector<KlLabRow> rows;
  rows.reserve(std::size_t(cfg.epochs) + 1);
  bool clamped = false;
  for (int e = 0; e <= cfg.epochs; ++e) {
    const ad::Matrix eps = standard_normal(cfg.samples_per_step, 1, rng);
    ad::Tape tape;
    const ad::Var mu = tape.repeat_rows(tape.param(p, "mu"), cfg.samples_per_step);
    const ad::Var ls = tape.repeat_rows(tape.param(p, "log_sigma"), cfg.samples_per_step);
    const ad::Var x = tape.add(mu, tape.mul(tape.exp(ls), tape.constant(eps)));
    // log f(x) = -eps^2/2 - log sigma - log sqrt(2 pi); log g(x) in closed form.
    const ad::Matrix log_f_const = (-0.5 * eps.array().square() - kHalfLog2Pi).matrix();
    const ad::Var log_f = tape.sub(tape.constant(log_f_const), ls);
    const ad::Var log_g = tape.add_scalar(tape.scale(tape.square(tape.add_scalar(x, -cfg.mu_star)), -inv_2s2),
                                          -std::log(cfg.sigma_star) - kHalfLog2Pi);
    const ad::Var loss = tape.mean(tape.sub(log_f, log_g));

    KlLabRow row;
    row.epoch = e;
    row.mu = p.at("mu").values[0];
    row.sigma = std::exp(p.at("log_sigma").values[0]);
    row.kl_estimate = tape.scalar(loss);
    row.kl_exact = gaussian_kl(row.mu, row.sigma, cfg.mu_star, cfg.sigma_star);
    row.sigma_clamped = clamped;
    rows.push_back(row);
    if (e == cfg.epochs) break;

    p.zero_grad();
    tape.backward(loss);
    for (auto& [name, entry] : p) entry.values[0] -= cfg.lr * entry.grads[0];
    double& lsv = p.at("log_sigma").values[0];
    clamped = lsv < log_floor;
    if (clamped) lsv = log_floor;
  }
  return rows;
}

}  // namespace maxent
