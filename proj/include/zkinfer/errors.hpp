#pragma once

#include <stdexcept>
#include <string>

namespace zkinfer {

// Error taxonomy shared by the library and the CLI. Each kind maps to a
// distinct process exit code (see pipeline.hpp).
enum class ErrorKind {
  Io,                  // file missing / unreadable / unwritable
  Schema,              // malformed JSON or binary artifact
  UnsupportedOp,       // operator outside the supported set
  Overflow,            // compile-time overflow audit failure
  ShapeMismatch,       // tensor shape / input validation failure
  ArtifactMismatch,    // digest mismatch between pipeline artifacts
  ConstraintViolation, // prover refusal: witness does not satisfy the system
  Config,              // invalid field/quant/cost configuration
  Range,               // value outside its documented window
};

class Error : public std::runtime_error {
public:
  Error(ErrorKind kind, const std::string& message)
      : std::runtime_error(message), kind_(kind) {}

  ErrorKind kind() const { return kind_; }

private:
  ErrorKind kind_;
};

[[noreturn]] inline void fail(ErrorKind kind, const std::string& message) {
  throw Error(kind, message);
}

}  // namespace zkinfer
