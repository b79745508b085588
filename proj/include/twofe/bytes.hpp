#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace twofe {

using Bytes = std::vector<std::uint8_t>;
using ByteView = std::span<const std::uint8_t>;

std::string to_hex(ByteView data);
Bytes from_hex(std::string_view hex);

inline Bytes to_bytes(std::string_view s) { return Bytes(s.begin(), s.end()); }
inline std::string to_string(ByteView b) { return std::string(b.begin(), b.end()); }

template <std::size_t N>
Bytes to_bytes(const std::array<std::uint8_t, N>& a) {
  return Bytes(a.begin(), a.end());
}

// Copies exactly N bytes; throws invalid-encoding on size mismatch.
template <std::size_t N>
std::array<std::uint8_t, N> to_array(ByteView b);

Bytes concat(std::initializer_list<ByteView> parts);

void secure_wipe(std::span<std::uint8_t> data);
inline void secure_wipe(Bytes& data) {
  secure_wipe(std::span<std::uint8_t>(data));
  data.clear();
}

bool constant_time_equal(ByteView a, ByteView b);

// Big-endian serializer with u32 length-prefixed fields.
class ByteWriter {
 public:
  ByteWriter& u8(std::uint8_t v);
  ByteWriter& u16(std::uint16_t v);
  ByteWriter& u32(std::uint32_t v);
  ByteWriter& u64(std::uint64_t v);
  ByteWriter& raw(ByteView data);
  ByteWriter& field(ByteView data);
  ByteWriter& field(std::string_view s) { return field(ByteView(reinterpret_cast<const std::uint8_t*>(s.data()), s.size())); }

  const Bytes& bytes() const { return out_; }
  Bytes take() { return std::move(out_); }

 private:
  Bytes out_;
};

// Reader counterpart; every short read throws Error(invalid-encoding).
class ByteReader {
 public:
  explicit ByteReader(ByteView data) : data_(data) {}

  std::uint8_t u8();
  std::uint16_t u16();
  std::uint32_t u32();
  std::uint64_t u64();
  ByteView raw(std::size_t n);
  Bytes field();
  std::string field_string();

  std::size_t remaining() const { return data_.size() - pos_; }
  bool done() const { return pos_ == data_.size(); }
  void expect_end() const;

 private:
  ByteView data_;
  std::size_t pos_ = 0;
};

}  // namespace twofe

#include "twofe/error.hpp"

namespace twofe {

template <std::size_t N>
std::array<std::uint8_t, N> to_array(ByteView b) {
  if (b.size() != N) {
    throw Error(ErrorCode::invalid_encoding,
                "expected " + std::to_string(N) + " bytes, got " + std::to_string(b.size()));
  }
  std::array<std::uint8_t, N> out{};
  std::copy(b.begin(), b.end(), out.begin());
  return out;
}

}  // namespace twofe
