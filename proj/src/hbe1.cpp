#include "hyperagent/hbe1.hpp"

#include <openssl/evp.h>

#include <cstring>
#include <fstream>
#include <iterator>
#include <sstream>

#include "hyperagent/binary_io.hpp"
#include "hyperagent/errors.hpp"

namespace hyperagent {
namespace {

constexpr char kMagic[4] = {'H', 'B', 'E', '1'};
constexpr std::size_t kHeaderBytes = 4 + 4 + 8;

}  // namespace

std::array<std::uint8_t, 32> sha256(const void* data, std::size_t size) {
  std::array<std::uint8_t, 32> digest{};
  unsigned int len = 0;
  if (EVP_Digest(data, size, digest.data(), &len, EVP_sha256(), nullptr) != 1 || len != 32) {
    throw std::runtime_error("SHA-256 computation failed");
  }
  return digest;
}

std::string encode_hbe1(const EmbeddingDataset& data) {
  if (data.embeddings.size() != data.labels.size() * data.dim) {
    throw InputError("embedding buffer size does not match dim * labels");
  }
  std::ostringstream out(std::ios::binary);
  out.write(kMagic, 4);
  binary::write_le<std::uint32_t>(out, data.dim);
  binary::write_le<std::uint64_t>(out, data.labels.size());
  for (std::size_t i = 0; i < data.size(); ++i) {
    const float* row = data.row(i);
    for (std::uint32_t j = 0; j < data.dim; ++j) binary::write_le<float>(out, row[j]);
    binary::write_le<std::uint8_t>(out, data.labels[i]);
  }
  std::string bytes = std::move(out).str();
  const auto digest = sha256(bytes.data(), bytes.size());
  bytes.append(reinterpret_cast<const char*>(digest.data()), kHbe1TrailerBytes);
  return bytes;
}

void write_hbe1(std::ostream& out, const EmbeddingDataset& data) {
  const std::string bytes = encode_hbe1(data);
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
}

void save_hbe1(const std::string& path, const EmbeddingDataset& data) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot open " + path + " for writing");
  write_hbe1(out, data);
  if (!out) throw std::runtime_error("failed writing " + path);
}

EmbeddingDataset decode_hbe1(const std::string& bytes) {
  const auto* raw = reinterpret_cast<const unsigned char*>(bytes.data());
  if (bytes.size() < 4) throw FormatError("file too short for HBE1 magic", bytes.size());
  if (std::memcmp(raw, kMagic, 4) != 0) throw FormatError("bad magic, expected \"HBE1\"", 0);
  if (bytes.size() < kHeaderBytes) throw FormatError("truncated HBE1 header", bytes.size());

  EmbeddingDataset data;
  data.dim = binary::decode_le<std::uint32_t>(raw + 4);
  const auto count = binary::decode_le<std::uint64_t>(raw + 8);
  if (data.dim == 0 && count > 0) throw FormatError("zero feature dimension with records", 4);

  const std::uint64_t record_bytes = 4ULL * data.dim + 1;
  const std::uint64_t available = bytes.size() - kHeaderBytes;
  if (count > 0 && (available < kHbe1TrailerBytes ||
                    (available - kHbe1TrailerBytes) / record_bytes < count)) {
    const std::uint64_t whole = available >= kHbe1TrailerBytes
                                    ? (available - kHbe1TrailerBytes) / record_bytes
                                    : 0;
    throw FormatError("truncated record " + std::to_string(whole),
                      kHeaderBytes + whole * record_bytes);
  }
  const std::uint64_t payload = kHeaderBytes + count * record_bytes;
  if (bytes.size() < payload + kHbe1TrailerBytes) {
    throw FormatError("missing checksum trailer", bytes.size());
  }
  if (bytes.size() > payload + kHbe1TrailerBytes) {
    throw FormatError("trailing bytes after checksum", payload + kHbe1TrailerBytes);
  }

  const auto digest = sha256(raw, payload);
  if (std::memcmp(digest.data(), raw + payload, kHbe1TrailerBytes) != 0) {
    throw FormatError("checksum mismatch", payload);
  }

  data.embeddings.resize(count * data.dim);
  data.labels.resize(count);
  const unsigned char* cursor = raw + kHeaderBytes;
  for (std::uint64_t i = 0; i < count; ++i) {
    for (std::uint32_t j = 0; j < data.dim; ++j) {
      data.embeddings[i * data.dim + j] = binary::decode_le<float>(cursor);
      cursor += 4;
    }
    const std::uint8_t label = *cursor++;
    if (label > kLabelHate) {
      throw DataError("record " + std::to_string(i) + " has label " + std::to_string(label) +
                      " outside {0, 1}");
    }
    data.labels[i] = label;
  }
  return data;
}

EmbeddingDataset read_hbe1(std::istream& in) {
  std::string bytes{std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
  return decode_hbe1(bytes);
}

EmbeddingDataset load_hbe1(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open embeddings file " + path);
  return read_hbe1(in);
}

}  // namespace hyperagent
