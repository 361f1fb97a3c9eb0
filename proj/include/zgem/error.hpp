#pragma once

#include <stdexcept>
#include <string>
#include <utility>

namespace zgem {

/// Base error carrying a stable, machine-parsable code ("singular-delta-inertia", ...).
/// The CLI prints errors as "ERROR <code>: <message>".
class Error : public std::runtime_error {
 public:
  Error(std::string code, const std::string& message)
      : std::runtime_error(message), code_(std::move(code)) {}

  const std::string& code() const noexcept { return code_; }

 private:
  std::string code_;
};

/// Rejected inputs: bad configs, violated type invariants, singular parameter
/// combinations detectable before a run starts. CLI exit status 1.
class ValidationError : public Error {
 public:
  using Error::Error;
};

/// Failures during a run: kinematic singularities, diverging solves. CLI exit status 2.
class SimulationError : public Error {
 public:
  using Error::Error;
};

}  // namespace zgem
