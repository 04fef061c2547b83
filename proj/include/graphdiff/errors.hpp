#pragma once

#include <stdexcept>
#include <string>

namespace graphdiff {

enum class Errc {
  ParseError,
  SchemaVersionUnsupported,
  IoError,
  EmptyCorpus,
  ElementCapExceeded,
  UnsatisfiableConstraint,
  CycleDetected,
  InvalidArgument,
  DigestMismatch,
  NoDivergence,
};

inline const char* errc_name(Errc c) {
  switch (c) {
    case Errc::ParseError: return "ParseError";
    case Errc::SchemaVersionUnsupported: return "SchemaVersionUnsupported";
    case Errc::IoError: return "IoError";
    case Errc::EmptyCorpus: return "EmptyCorpus";
    case Errc::ElementCapExceeded: return "ElementCapExceeded";
    case Errc::UnsatisfiableConstraint: return "UnsatisfiableConstraint";
    case Errc::CycleDetected: return "CycleDetected";
    case Errc::InvalidArgument: return "InvalidArgument";
    case Errc::DigestMismatch: return "DigestMismatch";
    case Errc::NoDivergence: return "NoDivergence";
  }
  return "Unknown";
}

class Error : public std::runtime_error {
 public:
  Error(Errc code, const std::string& what)
      : std::runtime_error(std::string(errc_name(code)) + ": " + what), code_(code) {}
  Errc code() const { return code_; }

 private:
  Errc code_;
};

}  // namespace graphdiff
