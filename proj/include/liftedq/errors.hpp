#pragma once

#include <stdexcept>
#include <string>

namespace liftedq {

struct ParseError : std::runtime_error {
  int line, col;
  ParseError(int line, int col, const std::string& msg)
      : std::runtime_error("parse error at " + std::to_string(line) + ":" +
                           std::to_string(col) + ": " + msg),
        line(line),
        col(col) {}
};

struct ValidationError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Resource guard tripped (state space, node budget, table size). Engines
// surface this as a status, not a crash.
struct GuardError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct InferenceError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Evidence (or a unit clause) has probability zero.
struct ZeroProbabilityError : InferenceError {
  using InferenceError::InferenceError;
};

// count_per_instance found a non-uniform count; count-normalisation needed.
struct NonUniformCountError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

}  // namespace liftedq
