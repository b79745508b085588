#include "twofe/error.hpp"

namespace twofe {

std::string_view error_name(ErrorCode code) {
  switch (code) {
    case ErrorCode::usage: return "usage";
    case ErrorCode::io: return "io";
    case ErrorCode::entropy_failure: return "entropy-failure";
    case ErrorCode::invalid_encoding: return "invalid-encoding";
    case ErrorCode::bad_length: return "bad-length";
    case ErrorCode::length_mismatch: return "length-mismatch";
    case ErrorCode::protocol_order: return "protocol-order";
    case ErrorCode::session_aborted: return "session-aborted";
    case ErrorCode::timeout: return "timeout";
    case ErrorCode::sr_abort: return "sr-abort";
    case ErrorCode::bad_proof: return "bad-proof";
    case ErrorCode::auth_failure: return "auth-failure";
    case ErrorCode::policy_denied: return "policy-denied";
    case ErrorCode::name_not_found: return "name-not-found";
    case ErrorCode::catalog_decrypt_failure: return "catalog-decrypt-failure";
    case ErrorCode::unknown_tag: return "unknown-tag";
    case ErrorCode::tag_exists: return "tag-exists";
    case ErrorCode::bad_token: return "bad-token";
    case ErrorCode::not_enrolled: return "not-enrolled";
    case ErrorCode::duplicate_enrollment: return "duplicate-enrollment";
    case ErrorCode::pairing_failure: return "pairing-failure";
    case ErrorCode::cloud_unreachable: return "cloud-unreachable";
    case ErrorCode::peer_unreachable: return "peer-unreachable";
    case ErrorCode::approval_denied: return "approval-denied";
    case ErrorCode::old_device_unreachable: return "old-device-unreachable";
    case ErrorCode::old_device_responded: return "old-device-responded";
    case ErrorCode::verification_failed: return "verification-failed";
    case ErrorCode::recovery_locked: return "recovery-locked";
    case ErrorCode::unknown_account: return "unknown-account";
    case ErrorCode::account_exists: return "account-exists";
    case ErrorCode::unknown_request: return "unknown-request";
    case ErrorCode::already_decided: return "already-decided";
    case ErrorCode::deployment_unreachable: return "deployment-unreachable";
    case ErrorCode::internal: return "internal";
  }
  return "unknown";
}

int exit_code(ErrorCode code) { return static_cast<int>(code); }

Error::Error(ErrorCode code, const std::string& detail)
    : std::runtime_error(detail.empty() ? std::string(error_name(code))
                                        : std::string(error_name(code)) + ": " + detail),
      code_(code),
      detail_(detail) {}

}  // namespace twofe
