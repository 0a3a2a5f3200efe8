#pragma once

// Binary feature matrices ("FVDF" files):
//
//   offset 0   magic   "FVDF"
//   offset 4   u32     version (= 1)
//   offset 8   u32     N (rows, one per clip)
//   offset 12  u32     d (feature dimension)
//   offset 16  N*d     float32, row-major
//
// All integers and floats are little-endian.

#include <array>
#include <bit>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "robogrid/error.hpp"

namespace robogrid {

inline constexpr std::array<char, 4> kFeatureMagic{'F', 'V', 'D', 'F'};
inline constexpr std::uint32_t kFeatureVersion = 1;

struct FeatureMatrix {
  std::uint32_t rows = 0;
  std::uint32_t cols = 0;
  std::vector<float> values;  // row-major

  float at(std::size_t r, std::size_t c) const { return values[r * cols + c]; }
};

namespace detail {

static_assert(std::endian::native == std::endian::little || std::endian::native == std::endian::big);

inline void put_u32(std::ostream& out, std::uint32_t v) {
  const unsigned char b[4] = {static_cast<unsigned char>(v), static_cast<unsigned char>(v >> 8),
                              static_cast<unsigned char>(v >> 16), static_cast<unsigned char>(v >> 24)};
  out.write(reinterpret_cast<const char*>(b), 4);
}

inline std::uint32_t get_u32(const unsigned char* b) {
  return static_cast<std::uint32_t>(b[0]) | (static_cast<std::uint32_t>(b[1]) << 8) |
         (static_cast<std::uint32_t>(b[2]) << 16) | (static_cast<std::uint32_t>(b[3]) << 24);
}

}  // namespace detail

inline void write_features(const std::filesystem::path& path, const FeatureMatrix& m) {
  if (m.values.size() != static_cast<std::size_t>(m.rows) * m.cols) {
    throw InvalidInput("feature matrix holds " + std::to_string(m.values.size()) + " values, expected " +
                       std::to_string(static_cast<std::size_t>(m.rows) * m.cols));
  }
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write feature file '" + path.string() + "'");
  out.write(kFeatureMagic.data(), kFeatureMagic.size());
  detail::put_u32(out, kFeatureVersion);
  detail::put_u32(out, m.rows);
  detail::put_u32(out, m.cols);
  for (float v : m.values) detail::put_u32(out, std::bit_cast<std::uint32_t>(v));
  if (!out) throw IoError("short write to feature file '" + path.string() + "'");
}

inline FeatureMatrix read_features(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot read feature file '" + path.string() + "'");
  std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  if (bytes.size() < 16 || std::memcmp(bytes.data(), kFeatureMagic.data(), 4) != 0) {
    throw IoError("'" + path.string() + "' is not a feature file (bad magic)");
  }
  const std::uint32_t version = detail::get_u32(bytes.data() + 4);
  if (version != kFeatureVersion) {
    throw IoError("'" + path.string() + "': unsupported feature file version " + std::to_string(version));
  }
  FeatureMatrix m;
  m.rows = detail::get_u32(bytes.data() + 8);
  m.cols = detail::get_u32(bytes.data() + 12);
  const std::size_t count = static_cast<std::size_t>(m.rows) * m.cols;
  if (bytes.size() != 16 + 4 * count) {
    throw IoError("'" + path.string() + "': payload is " + std::to_string(bytes.size() - 16) + " bytes, header says " +
                  std::to_string(4 * count));
  }
  m.values.resize(count);
  for (std::size_t i = 0; i < count; ++i) {
    m.values[i] = std::bit_cast<float>(detail::get_u32(bytes.data() + 16 + 4 * i));
  }
  return m;
}

}  // namespace robogrid
