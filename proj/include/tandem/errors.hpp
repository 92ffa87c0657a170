#pragma once

#include <stdexcept>
#include <string>

namespace tandem {

// Argument errors use std::invalid_argument; these cover the remaining
// failure classes callers may want to tell apart.

/// A model specification (pmf table, chain definition) is malformed.
class SpecError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A requested exact computation exceeds the configured size cap.
class FeasibilityError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A table or trajectory is missing entries or has an inconsistent shape,
/// or arithmetic on sentinels is undefined (inf - inf).
class StructuralError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Training diverged or received non-finite values.
class TrainingError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace tandem
