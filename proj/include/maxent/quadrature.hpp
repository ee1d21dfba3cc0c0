#pragma once

#include <functional>
#include <span>
#include <vector>

namespace maxent {

/// Lower clamp on projected pre-squash variances.
inline constexpr double kVarianceFloor = 1e-6;

/// Simpson integration over the pre-squash window [-bound_b, bound_b].
struct QuadratureConfig {
  double bound_b = 6.0;
  int intervals = 128;

  void validate() const;
  double step() const { return 2.0 * bound_b / intervals; }
  /// The intervals + 1 abscissae x_0 = -b, ..., x_I = b.
  std::vector<double> grid() const;
};

using ScalarFn = std::function<double(double)>;

/// Composite Simpson's rule with `intervals` (even, >= 2) panels on [a, b].
double simpson(const ScalarFn& f, double a, double b, int intervals);
/// Simpson's rule over values already sampled on an equispaced grid of step h.
double simpson(std::span<const double> values, double h);

/// log(1 - tanh(x)^2), accurate for large |x|.
double log_tanh_derivative(double x);

/// log of the integral over [-b, b] of exp(log_qtilde(x)) * (1 - tanh(x)^2),
/// stabilized by the grid maximum.
double squashed_log_normalizer(const ScalarFn& log_qtilde, const QuadratureConfig& cfg);
double squashed_log_normalizer(std::span<const double> log_qtilde_grid,
                               const QuadratureConfig& cfg);

struct SquashedMoments {
  double mean = 0.0;
  double var = 0.0;
  double log_z = 0.0;
};

/// Pre-squash mean and variance of the density proportional to
/// exp(log_qtilde(x)) * tanh'(x) on [-b, b]. The variance is centred on the
/// computed mean and clamped below by kVarianceFloor.
SquashedMoments squashed_moments(const ScalarFn& log_qtilde, const QuadratureConfig& cfg);
SquashedMoments squashed_moments(std::span<const double> log_qtilde_grid,
                                 const QuadratureConfig& cfg);

/// Normalized pre-squash weights exp(log_qtilde + log tanh' - log_z) on the grid.
std::vector<double> squashed_weights(std::span<const double> log_qtilde_grid,
                                     const QuadratureConfig& cfg);

}  // namespace maxent
