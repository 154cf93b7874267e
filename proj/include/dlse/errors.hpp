#pragma once

#include <stdexcept>
#include <string>

namespace dlse {

/// Invalid argument or violated precondition (bad dimensions, non-positive
/// temperature, out-of-range model parameter, ...).
class DomainError : public std::domain_error {
public:
  using std::domain_error::domain_error;
};

/// A computation produced a non-finite value or failed to converge.
class NumericError : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

/// An option price lies outside its static no-arbitrage bounds.
class NoArbitrageError : public std::domain_error {
public:
  NoArbitrageError(const std::string& what, double violated_bound)
      : std::domain_error(what), bound_(violated_bound) {}

  double violated_bound() const noexcept { return bound_; }

private:
  double bound_;
};

/// A requested enumeration is larger than the configured guard.
class CapacityError : public std::length_error {
public:
  using std::length_error::length_error;
};

/// A mathematical property that must hold was observed to fail.
class PropertyFailure : public std::logic_error {
public:
  using std::logic_error::logic_error;
};

/// Too few usable observations survived filtering.
class InsufficientData : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

/// Malformed configuration document or input file.
class SchemaError : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

}  // namespace dlse
