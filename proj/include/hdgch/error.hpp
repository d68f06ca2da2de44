#pragma once

#include <stdexcept>
#include <string>
#include <vector>

namespace hdgch {

/// Base of every error raised by the solver library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ResourceError : public Error {
 public:
  using Error::Error;
};

class IndexError : public Error {
 public:
  using Error::Error;
};

class TopologyError : public Error {
 public:
  using Error::Error;
};

/// Inconsistent model data, e.g. a velocity field that penetrates the boundary.
class ModelError : public Error {
 public:
  using Error::Error;
};

class ParameterError : public Error {
 public:
  using Error::Error;
};

/// A local (per-cell) block could not be factored.
class EliminationError : public Error {
 public:
  EliminationError(const std::string& what, int cell) : Error(what), cell_(cell) {}
  int cell() const { return cell_; }

 private:
  int cell_;
};

/// Assembled global matrix violated a structural property (symmetry).
class AssemblyError : public Error {
 public:
  using Error::Error;
};

/// Krylov breakdown with a nonzero residual.
class SolverError : public Error {
 public:
  SolverError(const std::string& what, double residual) : Error(what), residual_(residual) {}
  double residual() const { return residual_; }

 private:
  double residual_;
};

/// An iteration (MINRES or Newton) ran out of iterations or diverged.
class ConvergenceError : public Error {
 public:
  ConvergenceError(const std::string& what, std::vector<double> history)
      : Error(what), history_(std::move(history)) {}
  const std::vector<double>& history() const { return history_; }

 private:
  std::vector<double> history_;
};

}  // namespace hdgch
