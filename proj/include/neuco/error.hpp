#pragma once

#include <stdexcept>
#include <string>

namespace neuco {

enum class ErrorKind { kFormat, kCorruption, kValidation, kIo, kTraining };

inline const char* to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::kFormat: return "format";
    case ErrorKind::kCorruption: return "corruption";
    case ErrorKind::kValidation: return "validation";
    case ErrorKind::kIo: return "io";
    case ErrorKind::kTraining: return "training";
  }
  return "unknown";
}

/// Base exception for every failure surfaced by the library. The kind is
/// what the CLI maps onto its machine-parsable error line.
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(what), kind_(kind) {}
  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

class FormatError : public Error {
 public:
  explicit FormatError(const std::string& w) : Error(ErrorKind::kFormat, w) {}
};

class CorruptionError : public Error {
 public:
  explicit CorruptionError(const std::string& w)
      : Error(ErrorKind::kCorruption, w) {}
};

class ValidationError : public Error {
 public:
  explicit ValidationError(const std::string& w)
      : Error(ErrorKind::kValidation, w) {}
};

class IoError : public Error {
 public:
  explicit IoError(const std::string& w) : Error(ErrorKind::kIo, w) {}
};

class TrainingError : public Error {
 public:
  explicit TrainingError(const std::string& w)
      : Error(ErrorKind::kTraining, w) {}
};

}  // namespace neuco
