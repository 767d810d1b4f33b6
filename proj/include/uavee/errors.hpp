#pragma once

#include <stdexcept>
#include <string>

namespace uavee {

/// Malformed scenario document (syntax or wrong value type).
class ParseError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A parameter violates one of the model invariants; the message names it.
class ValidationError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Evaluation outside the domain of a physical model (e.g. zero airspeed).
class DomainError : public std::domain_error {
 public:
  DomainError(const std::string& what, int slot = -1)
      : std::domain_error(what), slot_(slot) {}
  int slot() const noexcept { return slot_; }

 private:
  int slot_;
};

/// No feasible trajectory or expansion point could be constructed.
class InfeasibleError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// The interior-point solver failed; carries the context it failed in.
class SolverError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// An algorithmic invariant was broken (signals a bug, never ignored).
class InvariantViolation : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

}  // namespace uavee
