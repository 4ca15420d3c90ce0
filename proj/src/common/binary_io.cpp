#include "neuco/binary_io.hpp"

#include <fstream>
#include <sstream>
#include <system_error>

#include "neuco/error.hpp"

namespace neuco::io {

void ByteWriter::f32s(std::span<const float> values) {
  if constexpr (std::endian::native == std::endian::little) {
    const auto* p = reinterpret_cast<const char*>(values.data());
    buf_.append(p, values.size_bytes());
  } else {
    for (float v : values) f32(v);
  }
}

void ByteWriter::short_string(std::string_view s) {
  if (s.size() > 0xFFFF) throw ValidationError("string field longer than 65535 bytes");
  u16(static_cast<std::uint16_t>(s.size()));
  bytes(s);
}

std::string_view ByteReader::bytes(std::size_t n, const char* field) {
  if (n > remaining()) {
    std::ostringstream msg;
    msg << "truncated payload while reading " << field << " at byte " << pos_
        << " (need " << n << ", have " << remaining() << ")";
    throw CorruptionError(msg.str());
  }
  auto out = data_.substr(pos_, n);
  pos_ += n;
  return out;
}

void ByteReader::f32s(std::span<float> out, const char* field) {
  auto raw = bytes(out.size_bytes(), field);
  if constexpr (std::endian::native == std::endian::little) {
    std::memcpy(out.data(), raw.data(), raw.size());
  } else {
    ByteReader sub(raw);
    for (auto& v : out) v = sub.f32(field);
  }
}

std::string ByteReader::short_string(const char* field) {
  auto n = u16(field);
  return std::string(bytes(n, field));
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string() + " for reading");
  std::ostringstream ss;
  ss << in.rdbuf();
  if (in.bad()) throw IoError("read failure on " + path.string());
  return ss.str();
}

void write_file_atomic(const std::filesystem::path& path, std::string_view contents) {
  auto tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot open " + tmp.string() + " for writing");
    out.write(contents.data(), static_cast<std::streamsize>(contents.size()));
    out.flush();
    if (!out) throw IoError("write failure on " + tmp.string());
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) {
    std::filesystem::remove(tmp, ec);
    throw IoError("cannot move " + tmp.string() + " to " + path.string());
  }
}

}  // namespace neuco::io
