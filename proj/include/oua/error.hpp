#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

namespace oua {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Invalid configuration or arguments. Carries every problem found.
class ConfigError : public Error {
 public:
  explicit ConfigError(std::string message);
  explicit ConfigError(std::vector<std::string> problems);

  const std::vector<std::string>& problems() const { return problems_; }

 private:
  std::vector<std::string> problems_;
};

/// Problems with input data files (weather CSV and friends).
class DataError : public Error {
 public:
  using Error::Error;
};

/// Non-finite values produced while integrating.
class IntegrationError : public Error {
 public:
  static constexpr std::size_t kNoStep = static_cast<std::size_t>(-1);

  IntegrationError(std::string what, std::string component, std::size_t step = kNoStep);

  const std::string& component() const { return component_; }
  std::size_t step() const { return step_; }
  const std::string& detail() const { return detail_; }

  IntegrationError at_step(std::size_t step) const;

 private:
  std::string detail_;
  std::string component_;
  std::size_t step_;
};

/// Vector arguments whose lengths do not match.
class DimensionError : public Error {
 public:
  using Error::Error;
};

/// Query outside the sampled range of a signal.
class OutOfRangeError : public Error {
 public:
  using Error::Error;
};

/// Asked for a quantity that does not exist for the given parameters
/// (e.g. a stationary covariance with zero mean reversion).
class DomainError : public Error {
 public:
  using Error::Error;
};

}  // namespace oua
