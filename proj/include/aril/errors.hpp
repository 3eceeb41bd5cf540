#pragma once

#include <stdexcept>
#include <string>

namespace aril {

/// Operand dimensions disagree with what a model or operation expects.
class ShapeError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// A loss, gradient or learning target became non-finite.
class DivergenceError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// The simulated expert cannot answer for the given observation.
class OracleError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Invalid configuration text or value; carries the offending keys in what().
class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

inline void require_shape(bool ok, const std::string& what) {
  if (!ok) throw ShapeError(what);
}

}  // namespace aril
