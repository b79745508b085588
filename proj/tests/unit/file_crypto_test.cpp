#include <gtest/gtest.h>

#include <set>

#include "twofe/file_crypto.hpp"
#include "twofe/random.hpp"
#include "oracles.hpp"

namespace twofe {
namespace {

DerivedKey fresh_key() {
  Digest256 k{};
  random_bytes(k);
  return DerivedKey(k);
}

TEST(FileCrypto, RoundTripAcrossSizes) {
  for (std::size_t size : {std::size_t{0}, std::size_t{1}, kChunkSize - 1, kChunkSize, kChunkSize + 1,
                           std::size_t{1000000}, 3 * kChunkSize + 17}) {
    DerivedKey k = fresh_key();
    const FileTag t = generate_tag();
    const Bytes m = random_vector(size);
    const auto chunks = encrypt_file(k, m, t);
    EXPECT_EQ(chunks.size(), std::max<std::size_t>(1, (size + kChunkSize - 1) / kChunkSize));
    EXPECT_EQ(decrypt_file(k, chunks, t), m) << size;
  }
}

void expect_auth_failure(const std::function<void()>& f) {
  try {
    f();
    FAIL() << "expected auth-failure";
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::auth_failure);
  }
}

TEST(FileCrypto, WrongTagKeyOrBitFlipFails) {
  DerivedKey k = fresh_key();
  const FileTag t = generate_tag();
  const Bytes m = random_vector(5000);
  auto chunks = encrypt_file(k, m, t);
  expect_auth_failure([&] { decrypt_file(k, chunks, generate_tag()); });
  expect_auth_failure([&] { decrypt_file(fresh_key(), chunks, t); });
  chunks[0][100] ^= 0x01;
  expect_auth_failure([&] { decrypt_file(k, chunks, t); });
}

TEST(FileCrypto, TruncationAndReorderFail) {
  DerivedKey k = fresh_key();
  const FileTag t = generate_tag();
  const auto chunks = encrypt_file(k, random_vector(2 * kChunkSize + 5), t);
  auto truncated = chunks;
  truncated.pop_back();
  expect_auth_failure([&] { decrypt_file(k, truncated, t); });
  auto swapped = chunks;
  std::swap(swapped[0], swapped[1]);
  expect_auth_failure([&] { decrypt_file(k, swapped, t); });
  expect_auth_failure([&] { decrypt_file(k, {}, t); });
}

TEST(FileCrypto, KeyCannotSealTwice) {
  DerivedKey k = fresh_key();
  encrypt_file(k, Bytes{1}, generate_tag());
  EXPECT_THROW(encrypt_file(k, Bytes{2}, generate_tag()), Error);
}

TEST(FileCrypto, TagsDistinctAndNeverReserved) {
  std::set<FileTag> tags;
  for (int i = 0; i < 10000; ++i) {
    const FileTag t = generate_tag();
    ASSERT_FALSE(is_reserved_tag(t));
    tags.insert(t);
  }
  EXPECT_EQ(tags.size(), 10000u);
}

TEST(FileCrypto, CiphertextLooksBalancedForZeroAndRandomInput) {
  for (bool zeros : {true, false}) {
    DerivedKey k = fresh_key();
    const Bytes m = zeros ? Bytes(200000, 0) : random_vector(200000);
    const auto chunks = encrypt_file(k, m, generate_tag());
    const Bytes& c = chunks.front();
    EXPECT_GT(testing::monobit_p(ByteView(c).first(m.size())), 0.001);
  }
}

TEST(FileRecord, LayoutAndRoundTrip) {
  FileRecord rec;
  rec.tag = generate_tag();
  rec.seed = random_array<32>();
  rec.chunks = {Bytes{1, 2, 3}, Bytes{}};
  const Bytes enc = rec.encode();
  EXPECT_EQ(enc[0], kFileRecordVersion);
  EXPECT_TRUE(std::equal(rec.tag.begin(), rec.tag.end(), enc.begin() + 1));
  EXPECT_TRUE(std::equal(rec.seed.begin(), rec.seed.end(), enc.begin() + 17));
  EXPECT_EQ(enc[49], 0);
  EXPECT_EQ(enc[52], 2);
  const FileRecord back = FileRecord::decode(enc);
  EXPECT_EQ(back.tag, rec.tag);
  EXPECT_EQ(back.seed, rec.seed);
  EXPECT_EQ(back.chunks, rec.chunks);

  Bytes bad = enc;
  bad[0] = 2;
  EXPECT_THROW(FileRecord::decode(bad), Error);
  Bytes trailing = enc;
  trailing.push_back(0);
  EXPECT_THROW(FileRecord::decode(trailing), Error);
  EXPECT_THROW(FileRecord::decode(ByteView(enc).first(40)), Error);
}

TEST(Catalog, PutResolveSealOpen) {
  Catalog cat;
  try {
    cat.resolve("missing");
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::name_not_found);
  }
  const FileTag t1 = generate_tag(), t2 = generate_tag();
  cat.put("docs/report.pdf", t1);
  cat.put("photo.jpg", t2);
  EXPECT_EQ(cat.resolve("docs/report.pdf"), t1);
  EXPECT_EQ(cat.name_of(t2), "photo.jpg");

  const CatalogKey key = random_array<32>();
  const Bytes sealed = cat.seal(key);
  const std::string blob(sealed.begin(), sealed.end());
  EXPECT_EQ(blob.find("report"), std::string::npos);
  const Catalog opened = Catalog::open(key, sealed);
  EXPECT_EQ(opened.entries(), cat.entries());

  try {
    Catalog::open(random_array<32>(), sealed);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::catalog_decrypt_failure);
  }
}

}  // namespace
}  // namespace twofe
