#include "twofe/device_state.hpp"

#include <fcntl.h>
#include <sys/file.h>
#include <unistd.h>

#include <cerrno>
#include <cstdlib>
#include <cstring>
#include <fstream>
#include <iterator>

#include "twofe/error.hpp"

namespace twofe {

namespace {

constexpr std::string_view kMagic = "2FESTATE";
constexpr std::uint8_t kStateVersion = 1;

using FieldMap = std::map<std::string, Bytes>;

void put_text(FieldMap& m, const std::string& k, const std::string& v) { m[k] = to_bytes(v); }

const Bytes& get(const FieldMap& m, const std::string& k) {
  auto it = m.find(k);
  if (it == m.end()) throw Error(ErrorCode::invalid_encoding, "state file lacks field " + k);
  return it->second;
}

std::string get_text(const FieldMap& m, const std::string& k) { return to_string(get(m, k)); }

}  // namespace

Bytes DeviceState::encode() const {
  FieldMap m;
  m["role"] = Bytes{static_cast<std::uint8_t>(role)};
  put_text(m, "device_id", device_id);
  put_text(m, "account", account);
  m["identity"] = to_bytes(identity.secret_key);
  m["enrolled"] = Bytes{static_cast<std::uint8_t>(enrolled ? 1 : 0)};
  m["epoch"] = [&] {
    ByteWriter w;
    w.u32(epoch);
    return w.take();
  }();
  m["own_share"] = own_share.encode();
  m["sub_share_peer"] = sub_share_peer.encode();
  m["sub_share_cloud"] = sub_share_cloud.encode();
  m["held_sub_share"] = held_sub_share.encode();
  m["public_key"] = public_key.encode();
  m["catalog_key"] = to_bytes(catalog_key);
  m["session_token"] = session_token;
  m["wrapping_key"] = wrapping_key;
  put_text(m, "cloud_address", cloud_address);
  m["cloud_identity"] = cloud_identity;
  put_text(m, "peer_address", peer_address);
  m["peer_identity"] = peer_identity;
  put_text(m, "listen_address", listen_address);
  ByteWriter mirror;
  mirror.u32(static_cast<std::uint32_t>(catalog_mirror.size()));
  for (const auto& [tag, name] : catalog_mirror) mirror.field(tag).field(name);
  m["catalog_mirror"] = mirror.take();

  ByteWriter w;
  w.raw(to_bytes(kMagic)).u8(kStateVersion).u32(static_cast<std::uint32_t>(m.size()));
  for (const auto& [k, v] : m) w.field(k).field(v);
  return w.take();
}

DeviceState DeviceState::decode(ByteView bytes) {
  ByteReader r(bytes);
  if (to_string(r.raw(kMagic.size())) != kMagic) throw Error(ErrorCode::invalid_encoding, "not a device state file");
  if (r.u8() != kStateVersion) throw Error(ErrorCode::invalid_encoding, "unsupported state file version");
  FieldMap m;
  const std::uint32_t n = r.u32();
  for (std::uint32_t i = 0; i < n; ++i) {
    std::string k = r.field_string();
    m[k] = r.field();
  }
  r.expect_end();

  DeviceState s;
  const Bytes& role = get(m, "role");
  if (role.size() != 1 || (role[0] != 1 && role[0] != 2)) throw Error(ErrorCode::invalid_encoding, "bad role");
  s.role = static_cast<Role>(role[0]);
  s.device_id = get_text(m, "device_id");
  s.account = get_text(m, "account");
  s.identity = Identity::from_secret(get(m, "identity"));
  s.enrolled = get(m, "enrolled") == Bytes{1};
  {
    ByteReader e(get(m, "epoch"));
    s.epoch = e.u32();
    e.expect_end();
  }
  s.own_share = Scalar::decode(get(m, "own_share"));
  s.sub_share_peer = Scalar::decode(get(m, "sub_share_peer"));
  s.sub_share_cloud = Scalar::decode(get(m, "sub_share_cloud"));
  s.held_sub_share = Scalar::decode(get(m, "held_sub_share"));
  s.public_key = Element::decode(get(m, "public_key"));
  s.catalog_key = to_array<32>(get(m, "catalog_key"));
  s.session_token = get(m, "session_token");
  s.wrapping_key = get(m, "wrapping_key");
  s.cloud_address = get_text(m, "cloud_address");
  s.cloud_identity = get(m, "cloud_identity");
  s.peer_address = get_text(m, "peer_address");
  s.peer_identity = get(m, "peer_identity");
  s.listen_address = get_text(m, "listen_address");
  ByteReader mirror(get(m, "catalog_mirror"));
  const std::uint32_t entries = mirror.u32();
  for (std::uint32_t i = 0; i < entries; ++i) {
    std::string tag = mirror.field_string();
    s.catalog_mirror[tag] = mirror.field_string();
  }
  mirror.expect_end();
  return s;
}

void DeviceState::wipe_shares() {
  own_share.wipe();
  sub_share_peer.wipe();
  sub_share_cloud.wipe();
  held_sub_share.wipe();
  secure_wipe(std::span<std::uint8_t>(catalog_key));
  secure_wipe(session_token);
  enrolled = false;
}

std::filesystem::path state_path(const std::filesystem::path& configured) {
  if (const char* env = std::getenv("TWOFE_STATE"); env != nullptr && *env != '\0') return env;
  return configured;
}

void save_state(const std::filesystem::path& path, const DeviceState& state) {
  const Bytes data = state.encode();
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  const std::filesystem::path tmp = path.string() + ".tmp";
  const int fd = ::open(tmp.c_str(), O_WRONLY | O_CREAT | O_TRUNC, 0600);
  if (fd < 0) throw Error(ErrorCode::io, "cannot write " + tmp.string() + ": " + std::strerror(errno));
  std::size_t off = 0;
  while (off < data.size()) {
    const ssize_t n = ::write(fd, data.data() + off, data.size() - off);
    if (n < 0) {
      if (errno == EINTR) continue;
      ::close(fd);
      throw Error(ErrorCode::io, "write failed: " + std::string(std::strerror(errno)));
    }
    off += static_cast<std::size_t>(n);
  }
  if (::fsync(fd) != 0 || ::close(fd) != 0) throw Error(ErrorCode::io, "cannot flush " + tmp.string());
  std::filesystem::rename(tmp, path);
}

DeviceState load_state(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::not_enrolled, "no device state at " + path.string());
  const Bytes data((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return DeviceState::decode(data);
}

StateLock::StateLock(const std::filesystem::path& state_path) {
  if (state_path.has_parent_path()) std::filesystem::create_directories(state_path.parent_path());
  const std::string lock_path = state_path.string() + ".lock";
  fd_ = ::open(lock_path.c_str(), O_RDWR | O_CREAT, 0600);
  if (fd_ < 0) throw Error(ErrorCode::io, "cannot open " + lock_path);
  while (::flock(fd_, LOCK_EX) != 0) {
    if (errno != EINTR) throw Error(ErrorCode::io, "cannot lock " + lock_path);
  }
}

StateLock::~StateLock() {
  if (fd_ >= 0) {
    ::flock(fd_, LOCK_UN);
    ::close(fd_);
  }
}

}  // namespace twofe
