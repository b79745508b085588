#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "twofe/bytes.hpp"
#include "twofe/tprf.hpp"

namespace twofe {

using FileTag = std::array<std::uint8_t, 16>;
using Seed = std::array<std::uint8_t, 32>;
using CatalogKey = std::array<std::uint8_t, 32>;

// Reserved tag under which the sealed catalog is stored; generate_tag()
// never returns it.
inline constexpr FileTag kCatalogTag = {0xff, 0xff, 0xff, 0xff, 0xff, 0xff, 0xff, 0xff,
                                        0xff, 0xff, 0xff, 0xff, 0xff, 0xff, 0xff, 0xfe};
// Reserved tag used as PRF input when wrapping the catalog key for the vault.
inline constexpr FileTag kCatalogWrapTag = {0xff, 0xff, 0xff, 0xff, 0xff, 0xff, 0xff, 0xff,
                                            0xff, 0xff, 0xff, 0xff, 0xff, 0xff, 0xff, 0xfd};

inline constexpr std::uint8_t kFileRecordVersion = 1;
inline constexpr std::size_t kChunkSize = std::size_t{1} << 20;
inline constexpr std::size_t kAeadTagBytes = 16;

bool is_reserved_tag(const FileTag& t);
FileTag generate_tag();

// Chunked ChaCha20-Poly1305. Each derived key seals exactly one file, so the
// nonce is just the chunk index; the associated data binds the record
// version, the tag, the chunk index and a final-chunk flag (truncation and
// reordering both fail authentication). An empty file still produces one
// authenticated chunk.
std::vector<Bytes> encrypt_file(DerivedKey& key, ByteView plaintext, const FileTag& tag);
Bytes decrypt_file(const DerivedKey& key, const std::vector<Bytes>& chunks, const FileTag& tag);

// At-rest / on-wire layout:
//   version:1 | t:16 | s:32 | chunk_count:4 BE | chunk_count x (len:4 BE | chunk)
struct FileRecord {
  FileTag tag{};
  Seed seed{};
  std::vector<Bytes> chunks;

  Bytes encode() const;
  static FileRecord decode(ByteView bytes);
};

// filename -> tag map, sealed with XChaCha20-Poly1305 under the static
// catalog key (random 24-byte nonce, since the key is long-lived).
class Catalog {
 public:
  void put(const std::string& name, const FileTag& tag);
  FileTag resolve(const std::string& name) const;  // throws name-not-found
  std::optional<std::string> name_of(const FileTag& tag) const;
  bool erase(const std::string& name);
  const std::map<std::string, FileTag>& entries() const { return entries_; }
  bool empty() const { return entries_.empty(); }

  // Plaintext form: sequence of field(name) || tag:16.
  Bytes serialize() const;
  static Catalog deserialize(ByteView bytes);

  Bytes seal(const CatalogKey& key) const;
  static Catalog open(const CatalogKey& key, ByteView sealed);  // throws catalog-decrypt-failure

 private:
  std::map<std::string, FileTag> entries_;
};

// XChaCha20-Poly1305 with a random nonce; used for static-key blobs (the
// catalog and the vault copy of the catalog key).
Bytes seal_static(ByteView key, ByteView plaintext, ByteView associated);
Bytes open_static(ByteView key, ByteView sealed, ByteView associated, ErrorCode on_failure);

}  // namespace twofe
