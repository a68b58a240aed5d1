#include "mufnet/binary_io.hpp"

#include <bit>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iterator>

namespace mufnet {

FormatError::FormatError(Kind kind, std::uint64_t offset, const std::string& detail)
    : Error(std::string(kind_name(kind)) + " at byte offset " + std::to_string(offset) +
            (detail.empty() ? "" : ": " + detail)),
      kind_(kind),
      offset_(offset) {}

std::string_view FormatError::kind_name(Kind kind) noexcept {
  switch (kind) {
    case Kind::bad_magic: return "bad magic";
    case Kind::bad_version: return "bad version";
    case Kind::truncated: return "truncated";
    case Kind::duplicate_id: return "duplicate id";
    case Kind::trailing_bytes: return "trailing bytes";
    case Kind::invalid_value: return "invalid value";
    case Kind::missing_parameter: return "missing parameter";
    case Kind::unexpected_parameter: return "unexpected parameter";
  }
  return "format error";
}

void ByteWriter::bytes(std::string_view raw) { buf_.insert(buf_.end(), raw.begin(), raw.end()); }

void ByteWriter::put(std::uint64_t v, int width) {
  for (int i = 0; i < width; ++i) buf_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

void ByteWriter::f32(float v) { u32(std::bit_cast<std::uint32_t>(v)); }
void ByteWriter::f64(double v) { u64(std::bit_cast<std::uint64_t>(v)); }

void ByteReader::require(std::uint64_t n, std::string_view what) const {
  if (n > remaining()) {
    throw FormatError(FormatError::Kind::truncated, pos_,
                      "need " + std::to_string(n) + " bytes for " + std::string(what) + ", " +
                          std::to_string(remaining()) + " left");
  }
}

std::uint64_t ByteReader::get(int width, std::string_view what) {
  require(static_cast<std::uint64_t>(width), what);
  std::uint64_t v = 0;
  for (int i = 0; i < width; ++i) v |= static_cast<std::uint64_t>(data_[pos_ + i]) << (8 * i);
  pos_ += static_cast<std::uint64_t>(width);
  return v;
}

std::string ByteReader::bytes(std::size_t n, std::string_view what) {
  require(n, what);
  std::string out(reinterpret_cast<const char*>(data_.data() + pos_), n);
  pos_ += n;
  return out;
}

float ByteReader::f32(std::string_view what) { return std::bit_cast<float>(u32(what)); }
double ByteReader::f64(std::string_view what) { return std::bit_cast<double>(u64(what)); }

std::vector<std::uint8_t> read_file_bytes(const std::string& path) {
  std::error_code ec;
  if (!std::filesystem::is_regular_file(path, ec)) throw MissingFileError(path);
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError(path, "cannot open");
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void write_file_bytes(const std::string& path, std::span<const std::uint8_t> bytes) {
  const std::string tmp = path + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError(tmp, "cannot open for writing");
    out.write(reinterpret_cast<const char*>(bytes.data()),
              static_cast<std::streamsize>(bytes.size()));
    if (!out) throw IoError(tmp, "write failed");
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) throw IoError(path, "rename failed: " + ec.message());
}

}  // namespace mufnet
