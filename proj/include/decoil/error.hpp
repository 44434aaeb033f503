#pragma once

#include <cstddef>
#include <optional>
#include <stdexcept>
#include <string>

namespace decoil {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Malformed document or expression. `position` is a byte offset when known.
class ParseError : public Error {
 public:
  explicit ParseError(const std::string& what, std::optional<std::size_t> position = std::nullopt)
      : Error(what), position_(position) {}
  std::optional<std::size_t> position() const { return position_; }

 private:
  std::optional<std::size_t> position_;
};

// Well-formed input that violates a rule (depth chaining, partition, budget...).
class ValidationError : public Error {
 public:
  explicit ValidationError(const std::string& what,
                           std::optional<std::size_t> layer = std::nullopt)
      : Error(what), layer_(layer) {}
  std::optional<std::size_t> layer() const { return layer_; }

 private:
  std::optional<std::size_t> layer_;
};

class GeometryError : public ValidationError {
 public:
  using ValidationError::ValidationError;
};

// An internal consistency check failed; always a bug.
class InvariantError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

}  // namespace decoil
