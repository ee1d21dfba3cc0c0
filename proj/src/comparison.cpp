#include "maxent/comparison.hpp"

#include "maxent/error.hpp"

#include <deque>

namespace maxent {

double final_window_return(const TrainingLog& log, long window) {
  if (log.rows.empty()) throw Error(ErrorKind::kInvalidArgument, "cli_harness", "empty training log");
  const long last = log.rows.back().step;
  double sum = 0.0;
  long n = 0;
  for (std::size_t i = 0; i < log.episode_returns.size(); ++i) {
    if (log.episode_end_steps[i] > last - window) {
      sum += log.episode_returns[i];
      ++n;
    }
  }
  if (n == 0) throw Error(ErrorKind::kInvalidArgument, "cli_harness", "no episode ended in the window");
  return sum / double(n);
}

double warmup_baseline_return(const TrainingLog& log, long warmup_steps) {
  double sum = 0.0;
  long n = 0;
  for (std::size_t i = 0; i < log.episode_returns.size(); ++i) {
    if (log.episode_end_steps[i] <= warmup_steps) {
      sum += log.episode_returns[i];
      ++n;
    }
  }
  if (n == 0) throw Error(ErrorKind::kInvalidArgument, "cli_harness", "no episode ended during warm-up");
  return sum / double(n);
}

long steps_to_reach(const TrainingLog& log, double threshold, long window, long warmup_steps) {
  const long total = log.rows.empty() ? 0 : log.rows.back().step;
  std::deque<std::pair<long, double>> recent;
  double sum = 0.0;
  for (std::size_t i = 0; i < log.episode_returns.size(); ++i) {
    const long t = log.episode_end_steps[i];
    recent.emplace_back(t, log.episode_returns[i]);
    sum += log.episode_returns[i];
    while (recent.front().first <= t - window) {
      sum -= recent.front().second;
      recent.pop_front();
    }
    if (t > warmup_steps && sum / double(recent.size()) >= threshold) return t;
  }
  return total + 1;
}

}  // namespace maxent
