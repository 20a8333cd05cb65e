#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace catql {

enum class ErrorCode {
  // core model
  MissingMorphism,
  CompositionMismatch,
  // ingestion
  Io,
  ManifestSyntax,
  DuplicateKey,
  MissingColumn,
  TypeMismatch,
  MalformedXml,
  UnsupportedFeature,
  DanglingEndpoint,
  ThinnessViolation,
  TotalityViolation,
  NameClash,
  // algebra
  UnresolvablePath,
  UnknownComponent,
  UnionIncompatible,
  ComponentMismatch,
  KindMismatch,
  InvalidHopCount,
  PartialFunction,
  // calculus / compiler
  SyntaxError,
  UnknownObject,
  UnboundVariable,
  UnsafeQuery,
  Unsupported,
};

std::string_view to_string(ErrorCode code);

// Every failure raised by the engine carries a machine-readable code so the
// CLI can map it to an exit status.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(std::string(to_string(code)) + ": " + message),
        code_(code) {}

  [[nodiscard]] ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace catql
