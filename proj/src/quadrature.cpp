#include "maxent/quadrature.hpp"

#include "maxent/error.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

namespace maxent {
namespace {

constexpr const char* kModule = "quadrature";

void check_intervals(int intervals) {
  if (intervals < 2 || intervals % 2 != 0) {
    throw Error(ErrorKind::kInvalidArgument, kModule,
                "Simpson's rule needs an even interval count >= 2, got " + std::to_string(intervals));
  }
}

std::vector<double> sample(const ScalarFn& f, const QuadratureConfig& cfg) {
  std::vector<double> x = cfg.grid();
  for (double& v : x) v = f(v);
  return x;
}

// Exponent of the unnormalized pre-squash weight at each grid node.
std::vector<double> weight_exponents(std::span<const double> log_qtilde,
                                     const QuadratureConfig& cfg) {
  cfg.validate();
  if (log_qtilde.size() != std::size_t(cfg.intervals) + 1) {
    throw Error(ErrorKind::kDimensionMismatch, kModule,
                "expected " + std::to_string(cfg.intervals + 1) + " grid values, got " +
                    std::to_string(log_qtilde.size()));
  }
  std::vector<double> e(log_qtilde.size());
  const double h = cfg.step();
  for (std::size_t k = 0; k < e.size(); ++k) {
    const double v = log_qtilde[k];
    if (std::isnan(v) || v == std::numeric_limits<double>::infinity()) {
      throw Error(ErrorKind::kNonFinite, kModule,
                  "log density is not finite at grid index " + std::to_string(k));
    }
    e[k] = v + log_tanh_derivative(-cfg.bound_b + double(k) * h);
  }
  return e;
}

}  // namespace

void QuadratureConfig::validate() const {
  if (!(bound_b > 0.0) || !std::isfinite(bound_b)) {
    throw Error(ErrorKind::kInvalidArgument, kModule, "bound_b must be positive and finite");
  }
  check_intervals(intervals);
}

std::vector<double> QuadratureConfig::grid() const {
  validate();
  std::vector<double> x(std::size_t(intervals) + 1);
  const double h = step();
  for (int k = 0; k <= intervals; ++k) x[k] = -bound_b + double(k) * h;
  x.back() = bound_b;
  return x;
}

double simpson(std::span<const double> values, double h) {
  const std::size_t n = values.size();
  if (n < 3) check_intervals(int(n) - 1);
  check_intervals(int(n) - 1);
  double odd = 0.0;
  double even = 0.0;
  for (std::size_t i = 1; i + 1 < n; ++i) {
    if (!std::isfinite(values[i])) {
      throw Error(ErrorKind::kNonFinite, kModule,
                  "integrand is not finite at grid index " + std::to_string(i));
    }
    (i % 2 == 1 ? odd : even) += values[i];
  }
  for (std::size_t i : {std::size_t{0}, n - 1}) {
    if (!std::isfinite(values[i])) {
      throw Error(ErrorKind::kNonFinite, kModule,
                  "integrand is not finite at grid index " + std::to_string(i));
    }
  }
  return h / 3.0 * (values[0] + 4.0 * odd + 2.0 * even + values[n - 1]);
}

double simpson(const ScalarFn& f, double a, double b, int intervals) {
  check_intervals(intervals);
  if (!(a < b)) throw Error(ErrorKind::kInvalidArgument, kModule, "simpson needs a < b");
  const double h = (b - a) / intervals;
  std::vector<double> v(std::size_t(intervals) + 1);
  for (int i = 0; i <= intervals; ++i) v[i] = f(i == intervals ? b : a + i * h);
  return simpson(v, h);
}

double log_tanh_derivative(double x) {
  // 1 - tanh^2(x) = sech^2(x) = 4 e^{-2|x|} / (1 + e^{-2|x|})^2
  const double ax = std::fabs(x);
  return std::log(4.0) - 2.0 * ax - 2.0 * std::log1p(std::exp(-2.0 * ax));
}

double squashed_log_normalizer(std::span<const double> log_qtilde_grid,
                               const QuadratureConfig& cfg) {
  std::vector<double> e = weight_exponents(log_qtilde_grid, cfg);
  const double m = *std::max_element(e.begin(), e.end());
  if (m == -std::numeric_limits<double>::infinity()) {
    throw Error(ErrorKind::kDegenerateDensity, kModule, "density is zero on the whole grid");
  }
  for (double& v : e) v = std::exp(v - m);
  const double s = simpson(e, cfg.step());
  if (!(s > 0.0)) throw Error(ErrorKind::kDegenerateDensity, kModule, "normalizer underflowed");
  return std::log(s) + m;
}

double squashed_log_normalizer(const ScalarFn& log_qtilde, const QuadratureConfig& cfg) {
  return squashed_log_normalizer(sample(log_qtilde, cfg), cfg);
}

std::vector<double> squashed_weights(std::span<const double> log_qtilde_grid,
                                     const QuadratureConfig& cfg) {
  const double log_z = squashed_log_normalizer(log_qtilde_grid, cfg);
  std::vector<double> w = weight_exponents(log_qtilde_grid, cfg);
  for (double& v : w) v = std::exp(v - log_z);
  return w;
}

SquashedMoments squashed_moments(std::span<const double> log_qtilde_grid,
                                  const QuadratureConfig& cfg) {
  SquashedMoments out;
  out.log_z = squashed_log_normalizer(log_qtilde_grid, cfg);
  std::vector<double> w = weight_exponents(log_qtilde_grid, cfg);
  for (double& v : w) v = std::exp(v - out.log_z);
  const std::vector<double> x = cfg.grid();
  const double h = cfg.step();

  std::vector<double> integrand(w.size());
  for (std::size_t k = 0; k < w.size(); ++k) integrand[k] = w[k] * x[k];
  out.mean = simpson(integrand, h);
  for (std::size_t k = 0; k < w.size(); ++k) {
    const double d = x[k] - out.mean;
    integrand[k] = w[k] * d * d;
  }
  out.var = std::max(simpson(integrand, h), kVarianceFloor);
  return out;
}

SquashedMoments squashed_moments(const ScalarFn& log_qtilde, const QuadratureConfig& cfg) {
  return squashed_moments(sample(log_qtilde, cfg), cfg);
}

}  // namespace maxent
