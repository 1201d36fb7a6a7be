#include "prefprog/error.hpp"

namespace prefprog {

std::string_view error_code_name(ErrorCode code) {
  switch (code) {
    case ErrorCode::kSyntax: return "syntax";
    case ErrorCode::kUnknownLabel: return "unknown_label";
    case ErrorCode::kUnresolvedName: return "unresolved_name";
    case ErrorCode::kArityMismatch: return "arity_mismatch";
    case ErrorCode::kTypeError: return "type_error";
    case ErrorCode::kHoleBounds: return "hole_bounds";
    case ErrorCode::kUnboundHole: return "unbound_hole";
    case ErrorCode::kEmptyMask: return "empty_mask";
    case ErrorCode::kDepthUnavailable: return "depth_unavailable";
    case ErrorCode::kOutOfBounds: return "out_of_bounds";
    case ErrorCode::kSchema: return "schema";
    case ErrorCode::kNameCollision: return "name_collision";
    case ErrorCode::kCycle: return "cycle";
    case ErrorCode::kMissingDependency: return "missing_dependency";
    case ErrorCode::kVersionFormat: return "version_format";
    case ErrorCode::kProviderFailure: return "provider_failure";
    case ErrorCode::kProviderResponse: return "provider_response";
    case ErrorCode::kUnresolvedPredicate: return "unresolved_predicate";
    case ErrorCode::kContractViolation: return "contract_violation";
    case ErrorCode::kUnsupportedAtom: return "unsupported_atom";
    case ErrorCode::kTooManyHoles: return "too_many_holes";
    case ErrorCode::kChannel: return "channel";
    case ErrorCode::kAwaitingUser: return "awaiting_user";
    case ErrorCode::kRecursionDepth: return "recursion_depth";
    case ErrorCode::kQueryCap: return "query_cap";
    case ErrorCode::kDigestMismatch: return "digest_mismatch";
    case ErrorCode::kDimensionMismatch: return "dimension_mismatch";
    case ErrorCode::kIo: return "io";
  }
  return "unknown";
}

}  // namespace prefprog
