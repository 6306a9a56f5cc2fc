#pragma once

// Little-endian encoding helpers shared by the DDTB and DDTS formats.

#include <bit>
#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "ddtime/error.hpp"

namespace ddtime::detail {

std::uint32_t crc32_of(const std::uint8_t* data, std::size_t size);

class ByteWriter {
 public:
  void put_bytes(std::string_view s) { bytes_.insert(bytes_.end(), s.begin(), s.end()); }
  void put_u16(std::uint16_t v) { put_le(v, 2); }
  void put_u32(std::uint32_t v) { put_le(v, 4); }
  void put_u64(std::uint64_t v) { put_le(v, 8); }
  void put_f32(float v) { put_u32(std::bit_cast<std::uint32_t>(v)); }
  void put_f64(double v) { put_u64(std::bit_cast<std::uint64_t>(v)); }

  /// Appends the CRC32 of everything written so far.
  void seal() { put_u32(crc32_of(bytes_.data(), bytes_.size())); }

  const std::vector<std::uint8_t>& bytes() const noexcept { return bytes_; }
  void write_file(const std::filesystem::path& path) const;

 private:
  void put_le(std::uint64_t v, int n) {
    for (int i = 0; i < n; ++i) bytes_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
  }
  std::vector<std::uint8_t> bytes_;
};

class ByteReader {
 public:
  explicit ByteReader(std::vector<std::uint8_t> bytes) : bytes_(std::move(bytes)) {}
  static ByteReader from_file(const std::filesystem::path& path);

  std::size_t size() const noexcept { return bytes_.size(); }
  std::size_t position() const noexcept { return pos_; }

  void expect_magic(std::string_view magic);
  std::uint16_t u16() { return static_cast<std::uint16_t>(get_le(2)); }
  std::uint32_t u32() { return static_cast<std::uint32_t>(get_le(4)); }
  std::uint64_t u64() { return get_le(8); }
  float f32() { return std::bit_cast<float>(u32()); }
  double f64() { return std::bit_cast<double>(u64()); }

  /// Throws truncated_file unless the file holds exactly `payload_end`
  /// bytes plus the trailing CRC, then verifies the CRC.
  void verify_crc(std::uint64_t payload_end) const;

 private:
  std::uint64_t get_le(int n);
  std::vector<std::uint8_t> bytes_;
  std::size_t pos_ = 0;
};

}  // namespace ddtime::detail
