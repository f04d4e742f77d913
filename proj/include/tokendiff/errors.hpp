#pragma once

#include <stdexcept>
#include <string>

namespace tokendiff {

// Bad argument to an operation (dimension mismatch, empty batch, ...).
class ParameterError : public std::invalid_argument {
 public:
  explicit ParameterError(const std::string& msg) : std::invalid_argument(msg) {}
};

// Infeasible noise schedule (negative residual transition mass at some step).
class ScheduleError : public std::runtime_error {
 public:
  explicit ScheduleError(const std::string& msg) : std::runtime_error(msg) {}
};

// A MASK token appeared where only resolved tokens are allowed.
class InvalidStateError : public std::runtime_error {
 public:
  explicit InvalidStateError(const std::string& msg) : std::runtime_error(msg) {}
};

// Posterior conditioned on a (z_t, z0) pair with zero forward probability.
class UnreachableStateError : public std::runtime_error {
 public:
  explicit UnreachableStateError(const std::string& msg) : std::runtime_error(msg) {}
};

// Training diverged (non-finite loss).
class TrainingError : public std::runtime_error {
 public:
  explicit TrainingError(const std::string& msg) : std::runtime_error(msg) {}
};

// Reverse chain ended in an inconsistent state (residual MASK at t=0).
class SamplingError : public std::runtime_error {
 public:
  explicit SamplingError(const std::string& msg) : std::runtime_error(msg) {}
};

// File or stream failure.
class IoError : public std::runtime_error {
 public:
  explicit IoError(const std::string& msg) : std::runtime_error(msg) {}
};

// Bad or inconsistent run configuration.
class ConfigError : public std::runtime_error {
 public:
  explicit ConfigError(const std::string& msg) : std::runtime_error(msg) {}
};

}  // namespace tokendiff
