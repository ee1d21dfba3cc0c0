#include "maxent/io.hpp"

#include "maxent/error.hpp"

#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <iostream>
#include <sstream>

namespace maxent {
namespace {

constexpr const char* kModule = "cli_harness";

}  // namespace

void write_file_atomic(const std::filesystem::path& path, std::string_view content) {
  std::filesystem::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error(ErrorKind::kIo, kModule, "cannot open " + tmp.string());
    out.write(content.data(), std::streamsize(content.size()));
    out.flush();
    if (!out) throw Error(ErrorKind::kIo, kModule, "write failed for " + tmp.string());
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) throw Error(ErrorKind::kIo, kModule, "rename onto " + path.string() + ": " + ec.message());
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::kIo, kModule, "cannot read " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::string csv_escape(std::string_view field) {
  if (field.find_first_of(",\"\r\n") == std::string_view::npos) return std::string(field);
  std::string out = "\"";
  for (char c : field) {
    if (c == '"') out += '"';
    out += c;
  }
  out += '"';
  return out;
}

std::string format_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::string format_optional(std::optional<double> v) {
  return v ? format_double(*v) : std::string();
}

CsvWriter::CsvWriter(std::filesystem::path path, const std::vector<std::string>& header,
                     std::size_t flush_every)
    : path_(std::move(path)), flush_every_(flush_every == 0 ? 1 : flush_every) {
  tmp_ = path_;
  tmp_ += ".tmp";
  out_.open(tmp_, std::ios::binary | std::ios::trunc);
  if (!out_) throw Error(ErrorKind::kIo, kModule, "cannot open " + tmp_.string());
  for (std::size_t i = 0; i < header.size(); ++i) {
    if (i) out_ << ',';
    out_ << csv_escape(header[i]);
  }
  out_ << "\r\n";
}

CsvWriter::~CsvWriter() {
  if (!closed_) out_.close();
}

void CsvWriter::row(const std::vector<std::string>& fields) {
  for (std::size_t i = 0; i < fields.size(); ++i) {
    if (i) out_ << ',';
    out_ << csv_escape(fields[i]);
  }
  out_ << "\r\n";
  if (++rows_ % flush_every_ == 0) out_.flush();
}

void CsvWriter::close() {
  if (closed_) return;
  out_.flush();
  if (!out_) throw Error(ErrorKind::kIo, kModule, "write failed for " + tmp_.string());
  out_.close();
  closed_ = true;
  std::error_code ec;
  std::filesystem::rename(tmp_, path_, ec);
  if (ec) throw Error(ErrorKind::kIo, kModule, "rename onto " + path_.string() + ": " + ec.message());
}

LogLevel log_level() {
  const char* env = std::getenv("MAXENT_LOG");
  if (env != nullptr && std::string_view(env) == "debug") return LogLevel::kDebug;
  return LogLevel::kInfo;
}

void log_info(std::string_view msg) { std::cerr << "[info] " << msg << '\n'; }

void log_debug(std::string_view msg) {
  if (log_level() == LogLevel::kDebug) std::cerr << "[debug] " << msg << '\n';
}

}  // namespace maxent
