#pragma once

#include <bit>
#include <cstdint>
#include <cstring>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace vmg::io {

static_assert(std::endian::native == std::endian::little,
              "binary formats are little-endian; big-endian hosts need byte swapping");

// Append-only little-endian encoder.
class BinaryWriter {
 public:
  void bytes(const void* data, std::size_t n);
  void u8(std::uint8_t v) { bytes(&v, 1); }
  void u32(std::uint32_t v) { bytes(&v, 4); }
  void u64(std::uint64_t v) { bytes(&v, 8); }
  void i64(std::int64_t v) { bytes(&v, 8); }
  void f64(double v) { bytes(&v, 8); }
  void f64s(std::span<const double> v) { bytes(v.data(), v.size() * sizeof(double)); }
  void string(std::string_view s);

  const std::vector<char>& buffer() const { return buf_; }

 private:
  std::vector<char> buf_;
};

// Bounds-checked decoder over an in-memory buffer; throws ParseError(record) on truncation.
class BinaryReader {
 public:
  explicit BinaryReader(std::span<const char> data) : data_(data) {}

  void bytes(void* out, std::size_t n);
  std::uint8_t u8();
  std::uint32_t u32();
  std::uint64_t u64();
  std::int64_t i64();
  double f64();
  void f64s(std::span<double> out) { bytes(out.data(), out.size() * sizeof(double)); }
  std::string string();

  bool at_end() const { return pos_ == data_.size(); }
  void set_record(std::size_t r) { record_ = r; }

 private:
  std::span<const char> data_;
  std::size_t pos_ = 0;
  std::size_t record_ = 0;
};

std::vector<char> read_file(const std::string& path);
void write_file(const std::string& path, std::span<const char> data);
void write_text_file(const std::string& path, std::string_view text);

}  // namespace vmg::io
