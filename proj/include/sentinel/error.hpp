#pragma once

#include <stdexcept>
#include <string>

namespace sentinel {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Input violates a precondition (bad shape, out-of-range argument, ...).
class InvalidArgument : public Error {
 public:
  using Error::Error;
};

/// Missing column or malformed header in a tabular input.
class SchemaError : public Error {
 public:
  explicit SchemaError(std::string column)
      : Error("schema error: missing column '" + column + "'"), column_(std::move(column)) {}
  [[nodiscard]] const std::string& column() const { return column_; }

 private:
  std::string column_;
};

/// Unparseable content (CSV cell, model file, JSON body, ...).
class ParseError : public Error {
 public:
  using Error::Error;
};

}  // namespace sentinel
