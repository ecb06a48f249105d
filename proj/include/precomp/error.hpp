#pragma once

#include <stdexcept>
#include <string>

namespace precomp {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Geometry of two signals (or a signal and an operator) does not agree.
class GeometryError : public Error {
 public:
  using Error::Error;
};

/// Malformed file, header or bitstream.
class FormatError : public Error {
 public:
  using Error::Error;
};

/// Iterative solver hit its iteration cap before reaching tolerance.
class SolverError : public Error {
 public:
  SolverError(const std::string& what, double residual, std::size_t iterations)
      : Error(what), residual_(residual), iterations_(iterations) {}

  double residual() const noexcept { return residual_; }
  std::size_t iterations() const noexcept { return iterations_; }

 private:
  double residual_;
  std::size_t iterations_;
};

/// External codec failure. Carries the kept temp directory, if any.
class CodecError : public Error {
 public:
  explicit CodecError(const std::string& what, std::string diagnostics_path = {})
      : Error(what), diagnostics_path_(std::move(diagnostics_path)) {}

  const std::string& diagnostics_path() const noexcept { return diagnostics_path_; }

 private:
  std::string diagnostics_path_;
};

}  // namespace precomp
