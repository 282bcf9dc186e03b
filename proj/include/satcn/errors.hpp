#pragma once

#include <stdexcept>
#include <string>

namespace satcn {

// Error categories mirror the CLI exit codes: config -> 1, numerical -> 2,
// data -> 3. Precondition violations inside the core throw
// std::invalid_argument and are mapped at the call site.
struct ConfigError : std::runtime_error {
  explicit ConfigError(const std::string& msg) : std::runtime_error(msg) {}
};

struct NumericalError : std::runtime_error {
  explicit NumericalError(const std::string& msg) : std::runtime_error(msg) {}
};

struct DataError : std::runtime_error {
  explicit DataError(const std::string& msg) : std::runtime_error(msg) {}
};

}  // namespace satcn
