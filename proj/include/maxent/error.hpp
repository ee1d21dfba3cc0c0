#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace maxent {

enum class ErrorKind {
  kMissingParameter,
  kDimensionMismatch,
  kTapeConsumed,
  kNonFinite,
  kInvalidArgument,
  kDegenerateDensity,
  kDimensionTooLarge,
  kBoundary,
  kOutOfBox,
  kIo,
  kParse,
};

std::string_view to_string(ErrorKind kind);

// Every failure raised by the library carries the module that produced it so
// the command-line front end can name it on exit.
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, std::string module, const std::string& what)
      : std::runtime_error(module + ": " + what), kind_(kind), module_(std::move(module)), detail_(what) {}

  ErrorKind kind() const noexcept { return kind_; }
  const std::string& module() const noexcept { return module_; }
  /// Message without the module prefix.
  const std::string& detail() const noexcept { return detail_; }

 private:
  ErrorKind kind_;
  std::string module_;
  std::string detail_;
};

}  // namespace maxent
