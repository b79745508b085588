#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <string_view>

namespace twofe {

// Error classes shared by every module. The numeric value doubles as the
// wire code in ERROR messages and as the CLI exit code, so values are stable.
enum class ErrorCode : std::uint16_t {
  usage = 2,
  io = 3,
  entropy_failure = 10,
  invalid_encoding = 11,
  bad_length = 12,
  length_mismatch = 13,
  protocol_order = 14,
  session_aborted = 15,
  timeout = 16,
  sr_abort = 20,
  bad_proof = 21,
  auth_failure = 22,
  policy_denied = 23,
  name_not_found = 30,
  catalog_decrypt_failure = 31,
  unknown_tag = 32,
  tag_exists = 33,
  bad_token = 34,
  not_enrolled = 35,
  duplicate_enrollment = 36,
  pairing_failure = 37,
  cloud_unreachable = 40,
  peer_unreachable = 41,
  approval_denied = 50,
  old_device_unreachable = 51,
  old_device_responded = 52,
  verification_failed = 53,
  recovery_locked = 54,
  unknown_account = 55,
  account_exists = 56,
  unknown_request = 60,
  already_decided = 61,
  deployment_unreachable = 70,
  internal = 99,
};

std::string_view error_name(ErrorCode code);
int exit_code(ErrorCode code);

class Error : public std::runtime_error {
 public:
  explicit Error(ErrorCode code, const std::string& detail = {});

  ErrorCode code() const noexcept { return code_; }
  const std::string& detail() const noexcept { return detail_; }

 private:
  ErrorCode code_;
  std::string detail_;
};

}  // namespace twofe
