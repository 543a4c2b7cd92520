#pragma once

#include <stdexcept>
#include <string>
#include <utility>

#include <Eigen/Dense>

namespace dlreg {

// Base of every error raised by the library. `code()` is a short stable
// identifier (e.g. "censor-flag-mismatch") suitable for scripting.
class Error : public std::runtime_error {
 public:
  Error(std::string code, const std::string& what)
      : std::runtime_error(what), code_(std::move(code)) {}
  const std::string& code() const noexcept { return code_; }

 private:
  std::string code_;
};

// Malformed or unreadable input files.
class IoError : public Error {
 public:
  using Error::Error;
};

// Data that loads but cannot be fitted, or a model that fails numerically.
class ModelError : public Error {
 public:
  using Error::Error;
};

// Newton-type iteration ran out of iterations; carries the last iterate.
class NoConvergence : public ModelError {
 public:
  NoConvergence(const std::string& what, Eigen::VectorXd last)
      : ModelError("no-convergence", what), last_iterate_(std::move(last)) {}
  const Eigen::VectorXd& last_iterate() const noexcept { return last_iterate_; }

 private:
  Eigen::VectorXd last_iterate_;
};

}  // namespace dlreg
