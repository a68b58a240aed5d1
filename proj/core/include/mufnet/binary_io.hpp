#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "mufnet/errors.hpp"

namespace mufnet {

// Little-endian append-only byte buffer.
class ByteWriter {
 public:
  void bytes(std::string_view raw);
  void u8(std::uint8_t v) { buf_.push_back(v); }
  void u16(std::uint16_t v) { put(v, 2); }
  void u32(std::uint32_t v) { put(v, 4); }
  void u64(std::uint64_t v) { put(v, 8); }
  void f32(float v);
  void f64(double v);

  const std::vector<std::uint8_t>& data() const noexcept { return buf_; }
  std::vector<std::uint8_t> take() noexcept { return std::move(buf_); }

 private:
  void put(std::uint64_t v, int width);
  std::vector<std::uint8_t> buf_;
};

// Bounds-checked little-endian reader. Every failure is a FormatError carrying
// the byte offset where the read started.
class ByteReader {
 public:
  explicit ByteReader(std::span<const std::uint8_t> data) noexcept : data_(data) {}

  std::uint64_t offset() const noexcept { return pos_; }
  std::uint64_t remaining() const noexcept { return data_.size() - pos_; }
  bool at_end() const noexcept { return pos_ == data_.size(); }

  std::string bytes(std::size_t n, std::string_view what);
  std::uint8_t u8(std::string_view what) { return static_cast<std::uint8_t>(get(1, what)); }
  std::uint16_t u16(std::string_view what) { return static_cast<std::uint16_t>(get(2, what)); }
  std::uint32_t u32(std::string_view what) { return static_cast<std::uint32_t>(get(4, what)); }
  std::uint64_t u64(std::string_view what) { return get(8, what); }
  float f32(std::string_view what);
  double f64(std::string_view what);

  // Throws `truncated` unless `n` more bytes are available.
  void require(std::uint64_t n, std::string_view what) const;

 private:
  std::uint64_t get(int width, std::string_view what);

  std::span<const std::uint8_t> data_;
  std::uint64_t pos_ = 0;
};

std::vector<std::uint8_t> read_file_bytes(const std::string& path);
// Writes to `path + ".tmp"` and renames over `path` on success.
void write_file_bytes(const std::string& path, std::span<const std::uint8_t> bytes);

}  // namespace mufnet
