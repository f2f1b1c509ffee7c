#pragma once

#include <stdexcept>
#include <string>

namespace robustloc {

enum class ErrorCode {
  InvalidPair,
  InvalidSequence,
  InvalidNetwork,
  InvalidArgument,
  SingularGeometry,
  InvalidQ,
  InfeasibleBound,
  UnsupportedTechnique,
  Underdetermined,
  Config,
  Io,
};

const char* to_string(ErrorCode code);

// Single exception type for the library; callers branch on code().
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(what), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace robustloc
