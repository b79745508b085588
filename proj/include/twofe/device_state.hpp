#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>

#include "twofe/bytes.hpp"
#include "twofe/file_crypto.hpp"
#include "twofe/ristretto.hpp"
#include "twofe/secret_sharing.hpp"
#include "twofe/tcp_transport.hpp"

namespace twofe {

using Scalar = Ristretto255::Scalar;
using Element = Ristretto255::Element;

// Everything a device keeps at rest. The primary holds k_C, the secondary's
// recovery sub-share k_D^C and pk; the secondary holds k_D and k_C^D. Both
// keep the sub-shares they handed out for the current epoch.
struct DeviceState {
  Role role = Role::primary;
  std::string device_id;
  std::string account;
  Identity identity;
  bool enrolled = false;
  std::uint32_t epoch = 0;

  Scalar own_share;
  Scalar sub_share_peer;   // outgoing: k_C^D or k_D^C
  Scalar sub_share_cloud;  // outgoing: k_C^S or k_D^S
  Scalar held_sub_share;   // incoming from the peer: k_D^C on the primary, k_C^D on the secondary
  Element public_key;      // pk = k_D * G

  CatalogKey catalog_key{};
  Bytes session_token;
  Bytes wrapping_key;  // reserved; empty means the file itself is the trust boundary

  std::string cloud_address;
  Bytes cloud_identity;
  std::string peer_address;
  Bytes peer_identity;
  std::string listen_address;

  // Secondary: filename mirror of the catalog, by tag hex.
  std::map<std::string, std::string> catalog_mirror;

  Bytes encode() const;
  static DeviceState decode(ByteView bytes);

  // Overwrites every secret in place.
  void wipe_shares();
};

// Resolves the state path: TWOFE_STATE wins over the configured path.
std::filesystem::path state_path(const std::filesystem::path& configured);

// Atomic save (temp file + fsync + rename) and load.
void save_state(const std::filesystem::path& path, const DeviceState& state);
DeviceState load_state(const std::filesystem::path& path);

// Exclusive advisory lock on "<path>.lock" for the lifetime of the object, so
// independent CLI processes never interleave state updates.
class StateLock {
 public:
  explicit StateLock(const std::filesystem::path& state_path);
  ~StateLock();
  StateLock(const StateLock&) = delete;
  StateLock& operator=(const StateLock&) = delete;

 private:
  int fd_ = -1;
};

}  // namespace twofe
