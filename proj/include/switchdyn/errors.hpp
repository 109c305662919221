#pragma once

#include <stdexcept>
#include <string>

namespace switchdyn {

// Invalid construction parameters (non-positive stiffness, bad period, ...).
class ParameterError : public std::invalid_argument {
public:
  using std::invalid_argument::invalid_argument;
};

// A potential could not be evaluated at the requested point.
class EvaluationError : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

// Non-finite or otherwise malformed numerical input.
class InputError : public std::invalid_argument {
public:
  using std::invalid_argument::invalid_argument;
};

// A documented precondition of an operation was violated by the caller.
class ContractError : public std::logic_error {
public:
  using std::logic_error::logic_error;
};

// Catalog lookups that match more than one entry.
class AmbiguityError : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

} // namespace switchdyn
