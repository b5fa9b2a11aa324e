#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>

namespace ludor {

class Error : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

/// Bad shapes, invalid hyperparameters, malformed config files.
class ConfigError : public Error {
  public:
    using Error::Error;
};

class DatasetError : public Error {
  public:
    using Error::Error;
};

class EnvError : public Error {
  public:
    using Error::Error;
};

class InternalError : public Error {
  public:
    using Error::Error;
};

/// Numerical failure during an optimization step; carries the step index.
class TrainingError : public Error {
  public:
    TrainingError(const std::string& what, std::int64_t step)
        : Error(what + " (step " + std::to_string(step) + ")"), step_(step) {}

    std::int64_t step() const noexcept { return step_; }

  private:
    std::int64_t step_;
};

/// Writes a warning line to stderr unless warnings are silenced.
void warn(const std::string& message);
void set_warnings_enabled(bool enabled);
std::uint64_t warning_count();

}  // namespace ludor
