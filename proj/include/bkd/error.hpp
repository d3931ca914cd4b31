#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace bkd {

enum class ErrorKind {
  invalid_input,
  training_fault,
  degenerate_agreement,
  rejected_threshold,
  degenerate_distribution,
  degenerate_target,
  malformed_file,
  malformed_record,
  malformed_label,
  length_mismatch,
  invalid_config,
  missing_artifact,
  io,
};

constexpr std::string_view to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::invalid_input: return "invalid_input";
    case ErrorKind::training_fault: return "training_fault";
    case ErrorKind::degenerate_agreement: return "degenerate_agreement";
    case ErrorKind::rejected_threshold: return "rejected_threshold";
    case ErrorKind::degenerate_distribution: return "degenerate_distribution";
    case ErrorKind::degenerate_target: return "degenerate_target";
    case ErrorKind::malformed_file: return "malformed_file";
    case ErrorKind::malformed_record: return "malformed_record";
    case ErrorKind::malformed_label: return "malformed_label";
    case ErrorKind::length_mismatch: return "length_mismatch";
    case ErrorKind::invalid_config: return "invalid_config";
    case ErrorKind::missing_artifact: return "missing_artifact";
    case ErrorKind::io: return "io";
  }
  return "unknown";
}

/// Every failure raised by the library carries a kind so callers (and the
/// CLI's machine-readable error line) can branch on it without parsing text.
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(what), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

inline void require(bool condition, ErrorKind kind, const std::string& what) {
  if (!condition) throw Error(kind, what);
}

}  // namespace bkd
