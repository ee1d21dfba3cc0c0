#pragma once

#include "maxent/autodiff.hpp"

#include <filesystem>
#include <map>
#include <string>
#include <string_view>

namespace maxent {

inline constexpr int kCheckpointFormatVersion = 1;

// Text document: {"format_version": 1, "metadata": {...},
//                 "entries": [{"name", "shape", "values"}, ...]}
// Values are written with 17 significant digits so they round-trip exactly.
struct Checkpoint {
  ad::ParamStore params;
  std::map<std::string, std::string> metadata;
};

std::string checkpoint_to_string(const Checkpoint& ckpt);
Checkpoint checkpoint_from_string(std::string_view text);

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt);
Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace maxent
