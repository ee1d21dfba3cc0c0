#pragma once

#include "maxent/agents.hpp"
#include "maxent/config.hpp"

#include <filesystem>
#include <string>
#include <vector>

namespace maxent {

inline constexpr const char* kArtifactVersion = "0.1.0";

/// Entry point of the `maxent` binary: 0 on success, 1 on runtime failure,
/// 2 on bad usage.
int cli_main(int argc, char** argv);

struct TrainRun {
  std::string env;
  AgentConfig cfg;
};

/// Resolves a run from defaults, an optional config file and overrides;
/// rejects unknown keys. `manifest.*` keys are ignored.
TrainRun resolve_train_config(const Config& file, const std::string& env_override);

/// Writes manifest.txt, metrics.csv and checkpoints under `out`.
TrainingLog run_training(const TrainRun& run, const std::filesystem::path& out);

std::string manifest_text(const TrainRun& run, const std::filesystem::path& out);

}  // namespace maxent
