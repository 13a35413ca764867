#pragma once

#include <stdexcept>
#include <string>

namespace hkin {

/// Base of every exception thrown by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Malformed or out-of-range input (bad file contents, bad parameters).
class InputError : public Error {
 public:
  using Error::Error;
};

/// A model fit could not produce a hypothesis (too few or only degenerate samples).
class FitError : public Error {
 public:
  using Error::Error;
};

/// Changepoint inference failed; carries the timestep where it happened.
class InferenceError : public Error {
 public:
  InferenceError(const std::string& what, int timestep)
      : Error(what + " (timestep " + std::to_string(timestep) + ")"), timestep_(timestep) {}

  int timestep() const noexcept { return timestep_; }

 private:
  int timestep_;
};

/// A constructed graph or automaton violates a structural invariant.
class ValidationError : public Error {
 public:
  using Error::Error;
};

}  // namespace hkin
