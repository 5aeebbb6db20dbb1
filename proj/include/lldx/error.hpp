// Copyright 2026 The lldx Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace lldx {

// Root of every error this library throws. User-facing errors (bad input,
// bad configuration) derive from UserError; everything else indicates a bug
// or numerical failure.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class UserError : public Error {
 public:
  using Error::Error;
};

class DimensionError : public Error {
 public:
  using Error::Error;
};

class IndexError : public Error {
 public:
  using Error::Error;
};

class EmptyInputError : public UserError {
 public:
  using UserError::UserError;
};

class ConfigError : public UserError {
 public:
  using UserError::UserError;
};

class ValidationError : public UserError {
 public:
  using UserError::UserError;
};

class NotImplementedError : public UserError {
 public:
  using UserError::UserError;
};

class ParseError : public UserError {
 public:
  explicit ParseError(const std::string& what) : UserError(what), line_(0) {}
  ParseError(const std::string& what, std::size_t line)
      : UserError("line " + std::to_string(line) + ": " + what), line_(line) {}
  std::size_t line() const { return line_; }

 private:
  std::size_t line_;
};

class IoError : public UserError {
 public:
  using UserError::UserError;
};

class DivergenceError : public Error {
 public:
  using Error::Error;
};

class StageError : public Error {
 public:
  using Error::Error;
};

class UndefinedMetricError : public Error {
 public:
  using Error::Error;
};

}  // namespace lldx
