#pragma once

#include <cstddef>
#include <optional>
#include <stdexcept>
#include <string>

namespace cicmap {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class InvalidArgument : public Error {
 public:
  using Error::Error;
};

// Malformed input row. `line` is 1-based and counts the header.
class ParseError : public Error {
 public:
  ParseError(std::size_t line, const std::string& what)
      : Error("line " + std::to_string(line) + ": " + what), line_(line) {}
  std::size_t line() const { return line_; }

 private:
  std::size_t line_;
};

class ValidationError : public Error {
 public:
  using Error::Error;
};

class FormatError : public Error {
 public:
  using Error::Error;
};

class IoError : public Error {
 public:
  using Error::Error;
};

class UndefinedProbability : public Error {
 public:
  using Error::Error;
};

class ModelError : public Error {
 public:
  using Error::Error;
};

// No feature passed the acceptance test. Carries the training round when
// raised from inside the learner.
class EmptyModelError : public ModelError {
 public:
  explicit EmptyModelError(const std::string& what,
                           std::optional<int> round = std::nullopt)
      : ModelError(what), round_(round) {}
  std::optional<int> round() const { return round_; }

 private:
  std::optional<int> round_;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

class StateError : public Error {
 public:
  using Error::Error;
};

class EvaluationError : public Error {
 public:
  using Error::Error;
};

class SpecError : public Error {
 public:
  using Error::Error;
};

}  // namespace cicmap
