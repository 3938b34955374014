#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

namespace riskbn {

/// Base class of every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Malformed input document. `line` is 1-based, 0 when unknown.
class ParseError : public Error {
 public:
  ParseError(const std::string& what, std::size_t line);
  std::size_t line() const { return line_; }

 private:
  std::size_t line_;
};

/// A record or spec references a name the schema does not declare.
class SchemaError : public Error {
 public:
  using Error::Error;
};

struct RowDiagnostic {
  std::size_t row;  // 0-based position in the input
  std::string record_id;
  std::string message;
};

/// One or more records failed validation; all offending rows are listed.
class ValidationError : public Error {
 public:
  explicit ValidationError(std::vector<RowDiagnostic> rows);
  const std::vector<RowDiagnostic>& rows() const { return rows_; }

 private:
  std::vector<RowDiagnostic> rows_;
};

class DegenerateFactorError : public Error {
 public:
  using Error::Error;
};

/// Invalid architecture spec or spec/dataset mismatch.
class SpecError : public Error {
 public:
  using Error::Error;
};

/// Caller broke an operation's precondition.
class ContractError : public Error {
 public:
  using Error::Error;
};

class ImpossibleEvidenceError : public Error {
 public:
  using Error::Error;
};

/// Exact enumeration refused because a component exceeds the node guard.
class TooLargeForExactError : public Error {
 public:
  using Error::Error;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

class TimeoutError : public Error {
 public:
  using Error::Error;
};

class MetricError : public Error {
 public:
  using Error::Error;
};

class InternalError : public Error {
 public:
  using Error::Error;
};

}  // namespace riskbn
