#pragma once

// HBE1 embedding file:
//   "HBE1" | u32 d | u64 N | N x ([f32 x d] embedding, u8 label) | 16-byte trailer
// All integers and floats little-endian, no padding. The trailer is the first
// 16 bytes of SHA-256 over every preceding byte (magic, header and records).
// Labels: 0 = free, 1 = hate.

#include <array>
#include <cstdint>
#include <istream>
#include <ostream>
#include <string>
#include <vector>

namespace hyperagent {

struct EmbeddingDataset {
  std::uint32_t dim = 0;
  std::vector<float> embeddings;  // row-major, size() * dim
  std::vector<std::uint8_t> labels;

  std::size_t size() const { return labels.size(); }
  const float* row(std::size_t i) const { return embeddings.data() + i * dim; }
};

inline constexpr std::uint8_t kLabelFree = 0;
inline constexpr std::uint8_t kLabelHate = 1;
inline constexpr std::size_t kHbe1TrailerBytes = 16;

std::array<std::uint8_t, 32> sha256(const void* data, std::size_t size);

/// Serialized bytes of `data`, trailer included.
std::string encode_hbe1(const EmbeddingDataset& data);
void write_hbe1(std::ostream& out, const EmbeddingDataset& data);
void save_hbe1(const std::string& path, const EmbeddingDataset& data);

/// Throws FormatError (with byte offset) on layout or checksum problems and
/// DataError for labels outside {0, 1}.
EmbeddingDataset decode_hbe1(const std::string& bytes);
EmbeddingDataset read_hbe1(std::istream& in);
EmbeddingDataset load_hbe1(const std::string& path);

}  // namespace hyperagent
