#pragma once

#include <stdexcept>
#include <string>

namespace ctr {

// Base class for all library errors.
class Error : public std::runtime_error {
 public:
  explicit Error(const std::string& what) : std::runtime_error(what) {}
};

// Malformed input text (bad field count, non-integer in an integer slot, ...).
class ParseError : public Error {
 public:
  using Error::Error;
};

// Semantically invalid data (empty corpus, single-class input, ...).
class DataError : public Error {
 public:
  using Error::Error;
};

// File-level problems: unreadable, truncated, wrong magic or version.
class IoError : public Error {
 public:
  using Error::Error;
};

// Invalid configuration (dimension mismatch, bad hyperparameter).
class ConfigError : public Error {
 public:
  using Error::Error;
};

// Non-finite loss during training.
class DivergenceError : public Error {
 public:
  using Error::Error;
};

// Checkpoint/dataset mismatch (vocabulary sizes differ, index out of range).
class CompatibilityError : public Error {
 public:
  using Error::Error;
};

}  // namespace ctr
