#pragma once

#include <stdexcept>
#include <string>

namespace vinemap {

// Exit codes used by the command-line tool; each error type maps to one.
enum class ExitCode : int {
  kSuccess = 0,
  kConfigError = 2,
  kDataError = 3,
  kSolverFailure = 4,
};

class ConfigError : public std::runtime_error {
 public:
  ConfigError(const std::string& field_path, const std::string& message)
      : std::runtime_error(field_path + ": " + message), field_path_(field_path) {}

  const std::string& field_path() const { return field_path_; }

 private:
  std::string field_path_;
};

class DataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class SolverError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace vinemap
