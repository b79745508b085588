#include "twofe/file_crypto.hpp"

#include <sodium.h>

#include <algorithm>

#include "twofe/error.hpp"
#include "twofe/random.hpp"

namespace twofe {

namespace {

constexpr std::string_view kFileAdLabel = "2FE-FILE";
constexpr std::string_view kCatalogAdLabel = "2FE-CATALOG";

std::array<std::uint8_t, crypto_aead_chacha20poly1305_IETF_NPUBBYTES> chunk_nonce(std::uint32_t index) {
  std::array<std::uint8_t, crypto_aead_chacha20poly1305_IETF_NPUBBYTES> n{};
  n[8] = static_cast<std::uint8_t>(index >> 24);
  n[9] = static_cast<std::uint8_t>(index >> 16);
  n[10] = static_cast<std::uint8_t>(index >> 8);
  n[11] = static_cast<std::uint8_t>(index);
  return n;
}

Bytes chunk_ad(const FileTag& tag, std::uint32_t index, bool final) {
  ByteWriter w;
  w.raw(to_bytes(kFileAdLabel)).u8(kFileRecordVersion).raw(tag).u32(index).u8(final ? 1 : 0);
  return w.take();
}

}  // namespace

bool is_reserved_tag(const FileTag& t) { return t == kCatalogTag || t == kCatalogWrapTag; }

FileTag generate_tag() {
  for (;;) {
    FileTag t = random_array<16>();
    if (!is_reserved_tag(t)) return t;
  }
}

std::vector<Bytes> encrypt_file(DerivedKey& key, ByteView plaintext, const FileTag& tag) {
  ensure_crypto_init();
  key.mark_sealed();
  const std::size_t count = std::max<std::size_t>(1, (plaintext.size() + kChunkSize - 1) / kChunkSize);
  if (count > UINT32_MAX) throw Error(ErrorCode::bad_length, "file too large");
  std::vector<Bytes> chunks;
  chunks.reserve(count);
  for (std::size_t i = 0; i < count; ++i) {
    const std::size_t begin = i * kChunkSize;
    const std::size_t len = std::min(kChunkSize, plaintext.size() - std::min(begin, plaintext.size()));
    const auto index = static_cast<std::uint32_t>(i);
    const Bytes ad = chunk_ad(tag, index, i + 1 == count);
    const auto nonce = chunk_nonce(index);
    Bytes out(len + kAeadTagBytes);
    unsigned long long out_len = 0;
    crypto_aead_chacha20poly1305_ietf_encrypt(out.data(), &out_len, plaintext.data() + std::min(begin, plaintext.size()),
                                              len, ad.data(), ad.size(), nullptr, nonce.data(),
                                              key.bytes().data());
    out.resize(out_len);
    chunks.push_back(std::move(out));
  }
  return chunks;
}

Bytes decrypt_file(const DerivedKey& key, const std::vector<Bytes>& chunks, const FileTag& tag) {
  ensure_crypto_init();
  if (chunks.empty()) throw Error(ErrorCode::auth_failure, "record has no chunks");
  Bytes plaintext;
  for (std::size_t i = 0; i < chunks.size(); ++i) {
    const auto& c = chunks[i];
    if (c.size() < kAeadTagBytes) throw Error(ErrorCode::auth_failure, "chunk too short");
    const auto index = static_cast<std::uint32_t>(i);
    const Bytes ad = chunk_ad(tag, index, i + 1 == chunks.size());
    const auto nonce = chunk_nonce(index);
    const std::size_t offset = plaintext.size();
    plaintext.resize(offset + c.size() - kAeadTagBytes);
    unsigned long long out_len = 0;
    if (crypto_aead_chacha20poly1305_ietf_decrypt(plaintext.data() + offset, &out_len, nullptr, c.data(), c.size(),
                                                  ad.data(), ad.size(), nonce.data(), key.bytes().data()) != 0) {
      secure_wipe(plaintext);
      throw Error(ErrorCode::auth_failure, "chunk " + std::to_string(i) + " failed authentication");
    }
  }
  return plaintext;
}

Bytes FileRecord::encode() const {
  ByteWriter w;
  w.u8(kFileRecordVersion).raw(tag).raw(seed).u32(static_cast<std::uint32_t>(chunks.size()));
  for (const auto& c : chunks) w.field(c);
  return w.take();
}

FileRecord FileRecord::decode(ByteView bytes) {
  ByteReader r(bytes);
  if (r.u8() != kFileRecordVersion) throw Error(ErrorCode::invalid_encoding, "unsupported record version");
  FileRecord rec;
  rec.tag = to_array<16>(r.raw(16));
  rec.seed = to_array<32>(r.raw(32));
  const std::uint32_t count = r.u32();
  if (count > r.remaining() / 4) throw Error(ErrorCode::invalid_encoding, "chunk count exceeds record size");
  rec.chunks.reserve(count);
  for (std::uint32_t i = 0; i < count; ++i) rec.chunks.push_back(r.field());
  r.expect_end();
  return rec;
}

void Catalog::put(const std::string& name, const FileTag& tag) { entries_[name] = tag; }

FileTag Catalog::resolve(const std::string& name) const {
  auto it = entries_.find(name);
  if (it == entries_.end()) throw Error(ErrorCode::name_not_found, name);
  return it->second;
}

std::optional<std::string> Catalog::name_of(const FileTag& tag) const {
  for (const auto& [name, t] : entries_) {
    if (t == tag) return name;
  }
  return std::nullopt;
}

bool Catalog::erase(const std::string& name) { return entries_.erase(name) > 0; }

Bytes Catalog::serialize() const {
  ByteWriter w;
  for (const auto& [name, tag] : entries_) w.field(name).raw(tag);
  return w.take();
}

Catalog Catalog::deserialize(ByteView bytes) {
  Catalog c;
  ByteReader r(bytes);
  while (!r.done()) {
    std::string name = r.field_string();
    c.entries_[name] = to_array<16>(r.raw(16));
  }
  return c;
}

Bytes Catalog::seal(const CatalogKey& key) const {
  Bytes plain = serialize();
  Bytes sealed = seal_static(key, plain, to_bytes(kCatalogAdLabel));
  secure_wipe(plain);
  return sealed;
}

Catalog Catalog::open(const CatalogKey& key, ByteView sealed) {
  Bytes plain = open_static(key, sealed, to_bytes(kCatalogAdLabel), ErrorCode::catalog_decrypt_failure);
  try {
    Catalog c = deserialize(plain);
    secure_wipe(plain);
    return c;
  } catch (const Error&) {
    secure_wipe(plain);
    throw Error(ErrorCode::catalog_decrypt_failure, "catalog plaintext malformed");
  }
}

Bytes seal_static(ByteView key, ByteView plaintext, ByteView associated) {
  ensure_crypto_init();
  if (key.size() != crypto_aead_xchacha20poly1305_ietf_KEYBYTES) throw Error(ErrorCode::bad_length, "key size");
  auto nonce = random_array<crypto_aead_xchacha20poly1305_ietf_NPUBBYTES>();
  Bytes out(nonce.size() + plaintext.size() + crypto_aead_xchacha20poly1305_ietf_ABYTES);
  std::copy(nonce.begin(), nonce.end(), out.begin());
  unsigned long long clen = 0;
  crypto_aead_xchacha20poly1305_ietf_encrypt(out.data() + nonce.size(), &clen, plaintext.data(), plaintext.size(),
                                             associated.data(), associated.size(), nullptr, nonce.data(),
                                             key.data());
  out.resize(nonce.size() + clen);
  return out;
}

Bytes open_static(ByteView key, ByteView sealed, ByteView associated, ErrorCode on_failure) {
  ensure_crypto_init();
  constexpr std::size_t nlen = crypto_aead_xchacha20poly1305_ietf_NPUBBYTES;
  constexpr std::size_t alen = crypto_aead_xchacha20poly1305_ietf_ABYTES;
  if (key.size() != crypto_aead_xchacha20poly1305_ietf_KEYBYTES || sealed.size() < nlen + alen) {
    throw Error(on_failure, "sealed blob too short");
  }
  Bytes out(sealed.size() - nlen - alen);
  unsigned long long mlen = 0;
  if (crypto_aead_xchacha20poly1305_ietf_decrypt(out.data(), &mlen, nullptr, sealed.data() + nlen,
                                                 sealed.size() - nlen, associated.data(), associated.size(),
                                                 sealed.data(), key.data()) != 0) {
    throw Error(on_failure, "authentication failed");
  }
  out.resize(mlen);
  return out;
}

}  // namespace twofe
