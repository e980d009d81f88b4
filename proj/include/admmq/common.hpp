// Error types and logging shared by every admmq header.
#pragma once

#include <cstdio>
#include <cstdlib>
#include <stdexcept>
#include <string>
#include <utility>

namespace admmq {

// Errors carry the process exit code the CLI maps them to:
// 1 = config error, 2 = data error, 3 = numerical divergence/degeneracy.
class Error : public std::runtime_error {
 public:
  Error(std::string msg, int exit_code)
      : std::runtime_error(std::move(msg)), exit_code_(exit_code) {}
  int exit_code() const { return exit_code_; }

 private:
  int exit_code_;
};

class ConfigError : public Error {
 public:
  explicit ConfigError(std::string msg) : Error(std::move(msg), 1) {}
};

class DataError : public Error {
 public:
  explicit DataError(std::string msg) : Error(std::move(msg), 2) {}
};

class DivergenceError : public Error {
 public:
  explicit DivergenceError(std::string msg) : Error(std::move(msg), 3) {}
};

// Degenerate quantization input (e.g. an all-zero tensor, where no positive
// scaling factor exists). Signals a numerically collapsed run.
class QuantError : public Error {
 public:
  explicit QuantError(std::string msg) : Error(std::move(msg), 3) {}
};

// Verbosity from the ADMMQ_LOG environment variable:
// 0 = errors only, 1 = run progress (default), 2 = per-iteration detail.
inline int log_level() {
  static const int level = [] {
    const char* env = std::getenv("ADMMQ_LOG");
    return env ? std::atoi(env) : 1;
  }();
  return level;
}

template <typename... Args>
void log_info(const char* fmt, Args... args) {
  if (log_level() >= 1) {
    std::fprintf(stderr, fmt, args...);
    std::fputc('\n', stderr);
  }
}

template <typename... Args>
void log_debug(const char* fmt, Args... args) {
  if (log_level() >= 2) {
    std::fprintf(stderr, fmt, args...);
    std::fputc('\n', stderr);
  }
}

}  // namespace admmq
