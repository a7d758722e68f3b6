#pragma once

#include <stdexcept>
#include <string>

namespace secmeter {

struct ConfigError : std::runtime_error {
  explicit ConfigError(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace secmeter
