#ifndef MPEP_ERRORS_HPP
#define MPEP_ERRORS_HPP

#include <stdexcept>
#include <string>

namespace mpep {

// Exit codes shared by all CLI commands: 0 success, 2 bad input,
// 3 convergence gate failure (artifacts are still written), 4 numerical failure.
enum exit_code : int {
  exit_ok = 0,
  exit_input_error = 2,
  exit_convergence_failure = 3,
  exit_numerical_failure = 4,
};

// Malformed input: files, configs, datasets, CLI arguments.
class validation_error : public std::runtime_error {
 public:
  explicit validation_error(const std::string &msg) : std::runtime_error(msg) {}
};

// A fit finished but failed the convergence gate.
class convergence_error : public std::runtime_error {
 public:
  explicit convergence_error(const std::string &msg) : std::runtime_error(msg) {}
};

// Non-finite posterior, failed initialization, or similar numeric breakdown.
class numerical_error : public std::runtime_error {
 public:
  explicit numerical_error(const std::string &msg) : std::runtime_error(msg) {}
};

}  // namespace mpep

#endif
