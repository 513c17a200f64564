#pragma once

#include <stdexcept>
#include <string>

namespace osmsl {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Input violates a documented precondition (bad partition, bad schema, ...).
class ValidationError : public Error {
 public:
  using Error::Error;
};

/// A tag sequence that the link grammar rejects.
class GrammarError : public ValidationError {
 public:
  GrammarError(const std::string& what, std::size_t position)
      : ValidationError(what), position_(position) {}
  std::size_t position() const { return position_; }

 private:
  std::size_t position_;
};

class IoError : public Error {
 public:
  using Error::Error;
};

}  // namespace osmsl
