#include "binary_io.hpp"

#include <zlib.h>

#include <algorithm>
#include <fstream>
#include <iterator>

namespace ddtime::detail {

std::uint32_t crc32_of(const std::uint8_t* data, std::size_t size) {
  uLong crc = ::crc32(0L, Z_NULL, 0);
  // zlib takes uInt lengths; feed in chunks so huge buffers stay correct.
  constexpr std::size_t chunk = 1u << 30;
  for (std::size_t off = 0; off < size; off += chunk) {
    const std::size_t n = std::min(chunk, size - off);
    crc = ::crc32(crc, data + off, static_cast<uInt>(n));
  }
  return static_cast<std::uint32_t>(crc);
}

void ByteWriter::write_file(const std::filesystem::path& path) const {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorCode::io_error, "cannot open " + path.string() + " for writing");
  out.write(reinterpret_cast<const char*>(bytes_.data()), static_cast<std::streamsize>(bytes_.size()));
  if (!out) throw Error(ErrorCode::io_error, "failed writing " + path.string());
}

ByteReader ByteReader::from_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::missing_file, path.string());
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return ByteReader(std::move(bytes));
}

void ByteReader::expect_magic(std::string_view magic) {
  if (bytes_.size() < magic.size()) throw Error(ErrorCode::truncated_file, "file shorter than its magic");
  for (std::size_t i = 0; i < magic.size(); ++i) {
    if (bytes_[pos_ + i] != static_cast<std::uint8_t>(magic[i])) {
      throw Error(ErrorCode::bad_magic, "expected " + std::string(magic));
    }
  }
  pos_ += magic.size();
}

std::uint64_t ByteReader::get_le(int n) {
  if (pos_ + static_cast<std::size_t>(n) > bytes_.size()) throw Error(ErrorCode::truncated_file, "unexpected end of file");
  std::uint64_t v = 0;
  for (int i = 0; i < n; ++i) v |= static_cast<std::uint64_t>(bytes_[pos_ + i]) << (8 * i);
  pos_ += static_cast<std::size_t>(n);
  return v;
}

void ByteReader::verify_crc(std::uint64_t payload_end) const {
  if (bytes_.size() < payload_end + 4) throw Error(ErrorCode::truncated_file, "file shorter than its header declares");
  if (bytes_.size() > payload_end + 4) throw Error(ErrorCode::checksum_failure, "trailing bytes after checksum");
  std::uint32_t stored = 0;
  for (int i = 0; i < 4; ++i) stored |= static_cast<std::uint32_t>(bytes_[payload_end + i]) << (8 * i);
  if (crc32_of(bytes_.data(), payload_end) != stored) throw Error(ErrorCode::checksum_failure, "CRC32 mismatch");
}

}  // namespace ddtime::detail
