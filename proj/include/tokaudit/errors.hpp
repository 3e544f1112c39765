#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace tokaudit {

// Invalid argument or state for an otherwise well-formed call.
class DomainError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// An enumeration or lattice exceeded its configured cap.
class ResourceError : public std::runtime_error {
 public:
  ResourceError(const std::string& what, std::size_t partial_count)
      : std::runtime_error(what), partial_count_(partial_count) {}

  std::size_t partial_count() const noexcept { return partial_count_; }

 private:
  std::size_t partial_count_;
};

// Bad configuration or unreadable input file.
class InputError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Something the construction invariants rule out actually happened.
class InvariantViolation : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

}  // namespace tokaudit
