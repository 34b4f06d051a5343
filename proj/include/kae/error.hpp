#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace kae {

/// Failure categories surfaced by the library. Callers that need to tell
/// failures apart (checkpoint loading, dataset parsing, CLI usage) switch on
/// this rather than on message text.
enum class ErrorKind {
  Shape,            // dimension mismatch between operands
  InvalidArgument,  // precondition on a scalar argument violated
  Io,               // file missing, unreadable or unwritable
  BadMagic,         // container magic bytes wrong
  BadVersion,       // container format version unsupported
  PayloadMismatch,  // header-declared sizes disagree with payload
  CountMismatch,    // paired dataset files disagree on sample count
  BadStride,        // CIFAR record length does not divide the file
  StaleCache,       // backward called with a cache from another layer
  Parse,            // malformed text input (config, records)
  Usage,            // CLI misuse: unknown verb, task or flag value
};

inline std::string_view to_string(ErrorKind k) {
  switch (k) {
    case ErrorKind::Shape: return "shape";
    case ErrorKind::InvalidArgument: return "invalid-argument";
    case ErrorKind::Io: return "io";
    case ErrorKind::BadMagic: return "bad-magic";
    case ErrorKind::BadVersion: return "bad-version";
    case ErrorKind::PayloadMismatch: return "payload-mismatch";
    case ErrorKind::CountMismatch: return "count-mismatch";
    case ErrorKind::BadStride: return "bad-stride";
    case ErrorKind::StaleCache: return "stale-cache";
    case ErrorKind::Parse: return "parse";
    case ErrorKind::Usage: return "usage";
  }
  return "unknown";
}

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(std::string(to_string(kind)) + ": " + what), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

}  // namespace kae
