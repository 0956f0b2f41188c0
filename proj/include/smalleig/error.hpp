#pragma once

#include <stdexcept>
#include <string>

namespace smalleig {

/// Invalid grid shape, variant, or parameter combination.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Caller violated a precondition (index out of range, non-member lookup, ...).
class UsageError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

/// Ranks disagreed on a collective, or a message-passing contract was broken.
class ProtocolError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Every live logical process is blocked and no message can be delivered.
class DeadlockError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Input data rejected on load or entry (non-symmetric, non-finite, malformed).
class ValidationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// An iterative kernel failed to converge.
class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace smalleig
