#pragma once

#include <cstddef>
#include <filesystem>
#include <fstream>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace maxent {

/// Writes `content` to a sibling temp file and renames it over `path`.
void write_file_atomic(const std::filesystem::path& path, std::string_view content);
std::string read_file(const std::filesystem::path& path);

/// RFC-4180 field quoting: fields containing separators, quotes or line
/// breaks are wrapped in double quotes with inner quotes doubled.
std::string csv_escape(std::string_view field);
std::string format_double(double v);
/// Empty field for missing values.
std::string format_optional(std::optional<double> v);

/// Streams rows to `<path>.tmp`, flushing every `flush_every` rows; `close`
/// renames the temp file onto `path`. A writer destroyed without close leaves
/// only the temp file behind.
class CsvWriter {
 public:
  CsvWriter(std::filesystem::path path, const std::vector<std::string>& header,
            std::size_t flush_every = 100);
  CsvWriter(const CsvWriter&) = delete;
  CsvWriter& operator=(const CsvWriter&) = delete;
  ~CsvWriter();

  void row(const std::vector<std::string>& fields);
  void close();
  std::size_t rows_written() const { return rows_; }

 private:
  std::filesystem::path path_;
  std::filesystem::path tmp_;
  std::ofstream out_;
  std::size_t flush_every_;
  std::size_t rows_ = 0;
  bool closed_ = false;
};

enum class LogLevel { kInfo = 0, kDebug = 1 };

/// Verbosity from MAXENT_LOG (debug|info); defaults to info.
LogLevel log_level();
void log_info(std::string_view msg);
void log_debug(std::string_view msg);

}  // namespace maxent
