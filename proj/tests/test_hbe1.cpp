#include <doctest.h>

#include <cstring>
#include <fstream>
#include <sstream>

#include "hyperagent/errors.hpp"
#include "hyperagent/hbe1.hpp"
#include "support.hpp"

using namespace hyperagent;

namespace {

EmbeddingDataset random_dataset(std::uint32_t d, std::size_t n, Rng& rng) {
  std::normal_distribution<float> normal;
  EmbeddingDataset data;
  data.dim = d;
  for (std::size_t i = 0; i < n * d; ++i) data.embeddings.push_back(normal(rng));
  for (std::size_t i = 0; i < n; ++i) data.labels.push_back(static_cast<std::uint8_t>(rng() & 1));
  return data;
}

// Builds the byte layout by hand, independent of the encoder.
std::string handmade(std::uint32_t d, const std::vector<std::vector<float>>& rows,
                     const std::vector<std::uint8_t>& labels) {
  std::string bytes = "HBE1";
  auto put = [&](const void* p, std::size_t n) { bytes.append(static_cast<const char*>(p), n); };
  unsigned char u32[4], u64[8];
  for (int i = 0; i < 4; ++i) u32[i] = static_cast<unsigned char>(d >> (8 * i));
  put(u32, 4);
  const std::uint64_t n = labels.size();
  for (int i = 0; i < 8; ++i) u64[i] = static_cast<unsigned char>(n >> (8 * i));
  put(u64, 8);
  for (std::size_t r = 0; r < rows.size(); ++r) {
    for (const float f : rows[r]) {
      std::uint32_t bits;
      std::memcpy(&bits, &f, 4);
      for (int i = 0; i < 4; ++i) u32[i] = static_cast<unsigned char>(bits >> (8 * i));
      put(u32, 4);
    }
    bytes.push_back(static_cast<char>(labels[r]));
  }
  const auto digest = sha256(bytes.data(), bytes.size());
  put(digest.data(), 16);
  return bytes;
}

std::string hex(const std::array<std::uint8_t, 32>& digest) {
  static const char* digits = "0123456789abcdef";
  std::string out;
  for (const auto b : digest) {
    out += digits[b >> 4];
    out += digits[b & 15];
  }
  return out;
}

}  // namespace

TEST_SUITE("hbe1") {

TEST_CASE("sha256 known answer") {
  CHECK(hex(sha256("abc", 3)) == "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
  CHECK(hex(sha256("", 0)) == "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855");
}

TEST_CASE("encoder matches the handmade layout") {
  EmbeddingDataset data;
  data.dim = 2;
  data.embeddings = {1.5f, -2.0f, 0.25f, 3.0f};
  data.labels = {0, 1};
  const std::string expected = handmade(2, {{1.5f, -2.0f}, {0.25f, 3.0f}}, {0, 1});
  CHECK(encode_hbe1(data) == expected);
  CHECK(expected.size() == 4 + 4 + 8 + 2 * 9 + 16);
  const auto back = decode_hbe1(expected);
  CHECK(back.dim == 2);
  CHECK(back.embeddings == data.embeddings);
  CHECK(back.labels == data.labels);
}

TEST_CASE("round trip through a file") {
  Rng rng(1);
  const auto data = random_dataset(16, 300, rng);
  const auto dir = test_support::scratch_dir("hbe1");
  const std::string path = (dir / "x.hbe").string();
  save_hbe1(path, data);
  const auto back = load_hbe1(path);
  CHECK(back.dim == 16);
  CHECK(back.size() == 300);
  CHECK(back.embeddings == data.embeddings);
  CHECK(back.labels == data.labels);
}

TEST_CASE("empty dataset is valid") {
  EmbeddingDataset empty;
  empty.dim = 8;
  const auto back = decode_hbe1(encode_hbe1(empty));
  CHECK(back.dim == 8);
  CHECK(back.size() == 0);
}

TEST_CASE("malformed files report offsets") {
  Rng rng(2);
  const std::string good = encode_hbe1(random_dataset(3, 4, rng));

  std::string bad_magic = good;
  bad_magic[0] = 'X';
  try {
    decode_hbe1(bad_magic);
    FAIL("expected FormatError");
  } catch (const FormatError& e) {
    CHECK(e.offset() == 0);
  }

  // Drop the trailer and half of the last record: record 3 starts at 16 + 3 * 13.
  const std::string truncated = good.substr(0, 16 + 3 * 13 + 5);
  try {
    decode_hbe1(truncated);
    FAIL("expected FormatError");
  } catch (const FormatError& e) {
    CHECK(e.offset() == 16 + 2 * 13);
  }

  std::string flipped = good;
  flipped[20] ^= 0x40;
  try {
    decode_hbe1(flipped);
    FAIL("expected FormatError");
  } catch (const FormatError& e) {
    CHECK(e.offset() == 16 + 4 * 13);
  }

  CHECK_THROWS_AS(decode_hbe1(good + "x"), FormatError);
  CHECK_THROWS_AS(decode_hbe1(good.substr(0, 10)), FormatError);
  CHECK_THROWS_AS(decode_hbe1(""), FormatError);
}

TEST_CASE("labels outside {0,1} are data errors") {
  const std::string bytes = handmade(1, {{0.5f}, {1.0f}}, {0, 2});
  CHECK_THROWS_AS(decode_hbe1(bytes), DataError);
}

TEST_CASE("missing file is a data error") {
  CHECK_THROWS_AS(load_hbe1("/nonexistent/path/x.hbe"), DataError);
}

}
