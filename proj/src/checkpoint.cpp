#include "maxent/checkpoint.hpp"

#include "maxent/error.hpp"
#include "maxent/io.hpp"

#include <json.hpp>

#include <cstdio>

namespace maxent {
namespace {

constexpr const char* kModule = "autodiff_mlp";

std::string full_precision(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.16e", v);
  return buf;
}

}  // namespace

std::string checkpoint_to_string(const Checkpoint& ckpt) {
  std::string out = "{\n  \"format_version\": " + std::to_string(kCheckpointFormatVersion) + ",\n";
  out += "  \"metadata\": " + nlohmann::json(ckpt.metadata).dump() + ",\n";
  out += "  \"entries\": [";
  bool first = true;
  for (const auto& [name, e] : ckpt.params) {
    out += first ? "\n" : ",\n";
    first = false;
    out += "    {\"name\": " + nlohmann::json(name).dump() + ", \"shape\": [";
    for (std::size_t i = 0; i < e.shape.size(); ++i) {
      if (i) out += ", ";
      out += std::to_string(e.shape[i]);
    }
    out += "], \"values\": [";
    for (std::size_t i = 0; i < e.values.size(); ++i) {
      if (i) out += ", ";
      out += full_precision(e.values[i]);
    }
    out += "]}";
  }
  out += "\n  ]\n}\n";
  return out;
}

Checkpoint checkpoint_from_string(std::string_view text) {
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::kParse, kModule, std::string("checkpoint: ") + e.what());
  }
  try {
    if (doc.at("format_version").get<int>() != kCheckpointFormatVersion) {
      throw Error(ErrorKind::kParse, kModule, "unsupported checkpoint format_version");
    }
    Checkpoint ckpt;
    if (doc.contains("metadata")) {
      ckpt.metadata = doc.at("metadata").get<std::map<std::string, std::string>>();
    }
    for (const auto& entry : doc.at("entries")) {
      ckpt.params.add(entry.at("name").get<std::string>(),
                      entry.at("shape").get<std::vector<std::size_t>>(),
                      entry.at("values").get<std::vector<double>>());
    }
    return ckpt;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::kParse, kModule, std::string("checkpoint: ") + e.what());
  }
}

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt) {
  write_file_atomic(path, checkpoint_to_string(ckpt));
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  return checkpoint_from_string(read_file(path));
}

}  // namespace maxent
