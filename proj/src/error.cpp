#include "oua/error.hpp"

#include <utility>

namespace oua {

namespace {

std::string join_problems(const std::vector<std::string>& problems) {
  std::string out;
  for (const auto& p : problems) {
    if (!out.empty()) out += "; ";
    out += p;
  }
  return out;
}

std::string describe(const std::string& what, const std::string& component, std::size_t step) {
  std::string msg = what + " (component '" + component + "'";
  if (step != IntegrationError::kNoStep) msg += ", step " + std::to_string(step);
  return msg + ")";
}

}  // namespace

ConfigError::ConfigError(std::string message) : Error(message), problems_{std::move(message)} {}

ConfigError::ConfigError(std::vector<std::string> problems)
    : Error(join_problems(problems)), problems_(std::move(problems)) {}

IntegrationError::IntegrationError(std::string what, std::string component, std::size_t step)
    : Error(describe(what, component, step)),
      detail_(std::move(what)),
      component_(std::move(component)),
      step_(step) {}

IntegrationError IntegrationError::at_step(std::size_t step) const {
  return IntegrationError(detail_, component_, step);
}

}  // namespace oua
