#include "robustloc/error.hpp"

namespace robustloc {

const char* to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::InvalidPair: return "invalid pair";
    case ErrorCode::InvalidSequence: return "invalid sequence";
    case ErrorCode::InvalidNetwork: return "invalid network";
    case ErrorCode::InvalidArgument: return "invalid argument";
    case ErrorCode::SingularGeometry: return "singular geometry";
    case ErrorCode::InvalidQ: return "invalid Q";
    case ErrorCode::InfeasibleBound: return "infeasible bound";
    case ErrorCode::UnsupportedTechnique: return "unsupported technique";
    case ErrorCode::Underdetermined: return "underdetermined";
    case ErrorCode::Config: return "config error";
    case ErrorCode::Io: return "io error";
  }
  return "unknown error";
}

}  // namespace robustloc
