#pragma once

#include <iosfwd>
#include <stdexcept>
#include <string>
#include <vector>

namespace gepower::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitCheckFailed = 1;
inline constexpr int kExitUsage = 2;

/// Bad flags, unreadable or inconsistent configuration.
class ConfigError : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

/// Entry point shared by the executable and the in-process CLI tests.
/// Logs go to `log`; primary outputs are files under --out.
int run(const std::vector<std::string>& args, std::ostream& log);

}  // namespace gepower::cli
