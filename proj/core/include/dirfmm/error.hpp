#pragma once

#include <stdexcept>
#include <string>

namespace dirfmm {

// Kernel evaluated at a coincident pair or a non-positive argument.
class SingularityError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

// Invalid problem or configuration (points outside the domain, bad K, ...).
class InputError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// A separated representation failed validation after all retries.
class ConstructionError : public std::runtime_error {
 public:
  ConstructionError(const std::string &what, double residual)
      : std::runtime_error(what), residual_(residual) {}
  double residual() const { return residual_; }

 private:
  double residual_;
};

// A translation was invoked before its inputs were complete.
class TraversalOrderError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

// Rep cache is unreadable, mismatched or corrupted.
class CacheError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace dirfmm
