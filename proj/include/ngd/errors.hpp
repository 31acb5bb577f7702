#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>

namespace ngd {

// Error taxonomy. The CLI maps these onto exit codes:
//   config/usage problems -> 2, numerical failures -> 3, I/O -> 4.
class Error : public std::runtime_error {
 public:
  explicit Error(const std::string& what) : std::runtime_error(what) {}
};

class InvalidArgumentError : public Error {
 public:
  using Error::Error;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

// Output/result schema version mismatch; carries expected vs found.
class SchemaError : public ConfigError {
 public:
  SchemaError(const std::string& expected, const std::string& found)
      : ConfigError("schema mismatch: expected '" + expected + "', found '" + found + "'"),
        expected_(expected),
        found_(found) {}
  const std::string& expected() const { return expected_; }
  const std::string& found() const { return found_; }

 private:
  std::string expected_;
  std::string found_;
};

class NumericalError : public Error {
 public:
  using Error::Error;
};

class SingularMatrixError : public NumericalError {
 public:
  using NumericalError::NumericalError;
};

class SolverError : public NumericalError {
 public:
  using NumericalError::NumericalError;
};

class OverflowError : public NumericalError {
 public:
  using NumericalError::NumericalError;
};

// Iterative spectral estimate failed to settle; best estimate attached.
class SpectralError : public NumericalError {
 public:
  SpectralError(const std::string& what, double best_estimate)
      : NumericalError(what), best_estimate_(best_estimate) {}
  double best_estimate() const { return best_estimate_; }

 private:
  double best_estimate_;
};

class DivergedError : public NumericalError {
 public:
  DivergedError(const std::string& what, std::int64_t iteration)
      : NumericalError(what), iteration_(iteration) {}
  std::int64_t iteration() const { return iteration_; }

 private:
  std::int64_t iteration_;
};

class TopologyGenerationError : public Error {
 public:
  explicit TopologyGenerationError(const std::string& what, int attempts = 0)
      : Error(what), attempts_(attempts) {}
  int attempts() const { return attempts_; }

 private:
  int attempts_;
};

class IoError : public Error {
 public:
  using Error::Error;
};

}  // namespace ngd
