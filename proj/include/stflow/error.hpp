#pragma once

#include <stdexcept>
#include <string>

namespace stflow {

/// Invalid or inconsistent user input (config keys, parameter ranges).
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Unreadable/unwritable files and malformed field files.
class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Violated preconditions of mesh and state operations.
class MeshError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

/// Base class for numerical failures (linear or nonlinear).
class SolverError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class SingularMatrixError : public SolverError {
 public:
  using SolverError::SolverError;
};

class IterativeSolverError : public SolverError {
 public:
  IterativeSolverError(const std::string& what, int iterations, double residual)
      : SolverError(what), iterations_(iterations), residual_(residual) {}
  int iterations() const { return iterations_; }
  double residual() const { return residual_; }

 private:
  int iterations_;
  double residual_;
};

}  // namespace stflow
