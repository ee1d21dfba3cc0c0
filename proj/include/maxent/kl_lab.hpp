#pragma once

// Sampled gradient descent on the reverse KL between two 1-D Gaussians.

#include <cstdint>
#include <vector>

namespace maxent {

struct KlLabConfig {
  double mu_star = 1.0;
  double sigma_star = 0.5;
  double mu0 = -1.0;
  double sigma0 = 1.5;
  int epochs = 8000;
  int samples_per_step = 2;
  double lr = 0.4;
  std::uint64_t seed = 0;

  void validate() const;
};

inline constexpr double kKlLabSigmaFloor = 1e-4;

struct KlLabRow {
  int epoch = 0;
  double mu = 0.0;
  double sigma = 0.0;
  double kl_estimate = 0.0;
  double kl_exact = 0.0;
  bool sigma_clamped = false;
};

/// KL(N(mu, sigma^2) || N(mu_star, sigma_star^2)).
double gaussian_kl(double mu, double sigma, double mu_star, double sigma_star);

/// Row 0 holds the initial parameters (estimate from the first draw); row e
/// holds the parameters after e gradient steps on log sigma and mu.
std::vector<KlLabRow> run_kl_lab(const KlLabConfig& cfg);

/// |mu - mu_star| + |sigma - sigma_star|.
double kl_lab_param_error(const KlLabRow& row, const KlLabConfig& cfg);

}  // namespace maxent
