#ifndef EVI_ERRORS_HPP_
#define EVI_ERRORS_HPP_

#include <stdexcept>
#include <string>

namespace evi {

// Argument outside the mathematical domain of a function or distribution.
class DomainError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

// Operation defined only for a specific dimensionality (the strong-condition
// bounds exist for K = 2 only).
class UnsupportedDimension : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// Structurally invalid object (responsibility rows, mixture weights, ...).
class ValidationError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// Experiment configuration that cannot be parsed or fails validation. The
// message carries the line/column or the offending field path.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace evi

#endif  // EVI_ERRORS_HPP_
