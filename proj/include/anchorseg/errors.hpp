#pragma once

#include <stdexcept>
#include <string>

namespace anchorseg {

// Shape or extent disagreement between operands.
class DimensionError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// Inconsistent parameters, plans or config values.
class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

class IndexError : public std::out_of_range {
 public:
  using std::out_of_range::out_of_range;
};

// Invalid scene description or unreadable on-disk clip.
class SpecError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// A singular referring template matched zero or several objects.
class AmbiguityError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Broken internal contract (e.g. propagation with an empty memory).
class InvariantError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

}  // namespace anchorseg
