#include "vmg/binary_io.hpp"

#include <filesystem>
#include <fstream>
#include <iterator>

#include "vmg/errors.hpp"

namespace vmg::io {

void BinaryWriter::bytes(const void* data, std::size_t n) {
  const auto* p = static_cast<const char*>(data);
  buf_.insert(buf_.end(), p, p + n);
}

void BinaryWriter::string(std::string_view s) {
  u32(static_cast<std::uint32_t>(s.size()));
  bytes(s.data(), s.size());
}

void BinaryReader::bytes(void* out, std::size_t n) {
  if (n > data_.size() - pos_) throw ParseError("unexpected end of data", record_);
  std::memcpy(out, data_.data() + pos_, n);
  pos_ += n;
}

std::uint8_t BinaryReader::u8() {
  std::uint8_t v;
  bytes(&v, 1);
  return v;
}

std::uint32_t BinaryReader::u32() {
  std::uint32_t v;
  bytes(&v, 4);
  return v;
}

std::uint64_t BinaryReader::u64() {
  std::uint64_t v;
  bytes(&v, 8);
  return v;
}

std::int64_t BinaryReader::i64() {
  std::int64_t v;
  bytes(&v, 8);
  return v;
}

double BinaryReader::f64() {
  double v;
  bytes(&v, 8);
  return v;
}

std::string BinaryReader::string() {
  const auto n = u32();
  if (n > data_.size() - pos_) throw ParseError("string length exceeds data", record_);
  std::string s(data_.data() + pos_, n);
  pos_ += n;
  return s;
}

std::vector<char> read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void write_file(const std::string& path, std::span<const char> data) {
  const auto parent = std::filesystem::path(path).parent_path();
  if (!parent.empty()) std::filesystem::create_directories(parent);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write " + path);
  out.write(data.data(), static_cast<std::streamsize>(data.size()));
  if (!out) throw std::runtime_error("write failed: " + path);
}

void write_text_file(const std::string& path, std::string_view text) {
  write_file(path, std::span(text.data(), text.size()));
}

}  // namespace vmg::io
