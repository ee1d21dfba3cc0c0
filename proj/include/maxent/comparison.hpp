#pragma once

// Learning-curve summaries used by `compare` and the acceptance suite.

#include "maxent/agents.hpp"

#include <limits>

namespace maxent {

/// Mean return of episodes that ended within the last `window` steps.
double final_window_return(const TrainingLog& log, long window);

/// Mean return of episodes completed during warm-up (uniform random actions).
double warmup_baseline_return(const TrainingLog& log, long warmup_steps);

/// First step after warm-up at which the trailing mean return over the last
/// `window` steps reaches `threshold`; total steps + 1 when never reached.
long steps_to_reach(const TrainingLog& log, double threshold, long window, long warmup_steps);

/// Baseline plus 80% of the way to `final_return`; rewards can be negative,
/// so the fraction is taken of the improvement over the random baseline.
inline double eighty_percent_threshold(double baseline, double final_return) {
  return baseline + 0.8 * (final_return - baseline);
}

}  // namespace maxent
