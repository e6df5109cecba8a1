#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace cutup {

enum class ErrorKind {
  Parse,
  Validation,
  Config,
  Coverage,
  Bounds,
  Geometry,
  Unsampleable,
};

constexpr std::string_view to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::Parse: return "parse_error";
    case ErrorKind::Validation: return "validation_error";
    case ErrorKind::Config: return "config_error";
    case ErrorKind::Coverage: return "coverage_error";
    case ErrorKind::Bounds: return "bounds_error";
    case ErrorKind::Geometry: return "geometry_error";
    case ErrorKind::Unsampleable: return "unsampleable_video";
  }
  return "error";
}

/// Base for every error the toolkit raises on bad input or configuration.
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(what), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

class ParseError : public Error {
 public:
  ParseError(const std::string& what, std::size_t line = 0, std::size_t column = 0)
      : Error(ErrorKind::Parse, what), line_(line), column_(column) {}

  std::size_t line() const noexcept { return line_; }
  std::size_t column() const noexcept { return column_; }

 private:
  std::size_t line_;
  std::size_t column_;
};

class ValidationError : public Error {
 public:
  explicit ValidationError(const std::string& what) : Error(ErrorKind::Validation, what) {}
};

class ConfigError : public Error {
 public:
  explicit ConfigError(const std::string& what) : Error(ErrorKind::Config, what) {}
};

class CoverageError : public Error {
 public:
  explicit CoverageError(const std::string& what) : Error(ErrorKind::Coverage, what) {}
};

class BoundsError : public Error {
 public:
  explicit BoundsError(const std::string& what) : Error(ErrorKind::Bounds, what) {}
};

class GeometryError : public Error {
 public:
  explicit GeometryError(const std::string& what) : Error(ErrorKind::Geometry, what) {}
};

class UnsampleableError : public Error {
 public:
  explicit UnsampleableError(const std::string& what) : Error(ErrorKind::Unsampleable, what) {}
};

}  // namespace cutup
