#pragma once

// Little-endian binary encoding helpers shared by the NCSF, NCDT and NCSM
// file formats.

#include <bit>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace neuco::io {

class ByteWriter {
 public:
  void bytes(std::string_view raw) { buf_.insert(buf_.end(), raw.begin(), raw.end()); }
  void u8(std::uint8_t v) { buf_.push_back(static_cast<char>(v)); }
  void u16(std::uint16_t v) { put_le(v); }
  void u32(std::uint32_t v) { put_le(v); }
  void u64(std::uint64_t v) { put_le(v); }
  void f32(float v) { put_le(std::bit_cast<std::uint32_t>(v)); }
  void f64(double v) { put_le(std::bit_cast<std::uint64_t>(v)); }
  void f32s(std::span<const float> values);
  // u16 length prefix + UTF-8 bytes.
  void short_string(std::string_view s);

  const std::string& data() const { return buf_; }

 private:
  template <typename U>
  void put_le(U v) {
    for (std::size_t i = 0; i < sizeof(U); ++i) {
      buf_.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
    }
  }
  std::string buf_;
};

/// Bounds-checked cursor over a byte buffer. Running past the end throws
/// CorruptionError naming the field being read.
class ByteReader {
 public:
  explicit ByteReader(std::string_view data) : data_(data) {}

  std::string_view bytes(std::size_t n, const char* field);
  std::uint8_t u8(const char* field) { return get_le<std::uint8_t>(field); }
  std::uint16_t u16(const char* field) { return get_le<std::uint16_t>(field); }
  std::uint32_t u32(const char* field) { return get_le<std::uint32_t>(field); }
  std::uint64_t u64(const char* field) { return get_le<std::uint64_t>(field); }
  float f32(const char* field) { return std::bit_cast<float>(u32(field)); }
  double f64(const char* field) { return std::bit_cast<double>(u64(field)); }
  void f32s(std::span<float> out, const char* field);
  std::string short_string(const char* field);

  std::size_t remaining() const { return data_.size() - pos_; }
  std::size_t position() const { return pos_; }

 private:
  template <typename U>
  U get_le(const char* field) {
    auto raw = bytes(sizeof(U), field);
    U v = 0;
    for (std::size_t i = 0; i < sizeof(U); ++i) {
      v |= static_cast<U>(static_cast<U>(static_cast<unsigned char>(raw[i])) << (8 * i));
    }
    return v;
  }
  std::string_view data_;
  std::size_t pos_ = 0;
};

std::string read_file(const std::filesystem::path& path);

/// Writes via a sibling temp file and rename so readers never observe a
/// partially written artifact.
void write_file_atomic(const std::filesystem::path& path, std::string_view contents);

}  // namespace neuco::io
