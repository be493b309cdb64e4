#pragma once

#include <stdexcept>
#include <string>

namespace calibkit {

enum class ErrorKind {
  invalid_input,       // NaN/Inf values, malformed probability vectors
  config,              // bad settings or dimension mismatch
  empty_dataset,       // metric or fit requested on zero records
  invalid_model,       // calibration model violates its invariants
  optimization,        // non-finite objective, divergence
  degenerate_noise,    // closed-form noise solution undefined
  format,              // file parse errors
  class_mismatch,      // K differs between files
};

inline const char* to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::invalid_input: return "invalid input";
    case ErrorKind::config: return "config error";
    case ErrorKind::empty_dataset: return "empty dataset";
    case ErrorKind::invalid_model: return "invalid model";
    case ErrorKind::optimization: return "optimization error";
    case ErrorKind::degenerate_noise: return "degenerate noise";
    case ErrorKind::format: return "format error";
    case ErrorKind::class_mismatch: return "class count mismatch";
  }
  return "error";
}

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(std::string(to_string(kind)) + ": " + what), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

}  // namespace calibkit
