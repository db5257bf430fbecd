#pragma once

#include <bit>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "nq/errors.hpp"

namespace nq::io {

// Little-endian byte sink.
class Writer {
 public:
  void u8(std::uint8_t v) { buf_.push_back(v); }
  void u16(std::uint16_t v) { put(v, 2); }
  void u32(std::uint32_t v) { put(v, 4); }
  void u64(std::uint64_t v) { put(v, 8); }
  void f32(float v) { u32(std::bit_cast<std::uint32_t>(v)); }
  void magic(std::string_view m) { buf_.insert(buf_.end(), m.begin(), m.end()); }
  void bytes(std::span<const std::uint8_t> b) { buf_.insert(buf_.end(), b.begin(), b.end()); }
  void str(std::string_view s) {
    u32(static_cast<std::uint32_t>(s.size()));
    buf_.insert(buf_.end(), s.begin(), s.end());
  }
  void f32s(std::span<const float> v) {
    for (float x : v) f32(x);
  }

  const std::vector<std::uint8_t>& buffer() const { return buf_; }
  void save(const std::filesystem::path& file) const;

 private:
  void put(std::uint64_t v, int n) {
    for (int i = 0; i < n; ++i) buf_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
  }
  std::vector<std::uint8_t> buf_;
};

// Little-endian byte source; throws FormatError on truncation.
class Reader {
 public:
  explicit Reader(std::vector<std::uint8_t> data) : data_(std::move(data)) {}
  static Reader from_file(const std::filesystem::path& file);

  std::uint8_t u8() { return static_cast<std::uint8_t>(get(1)); }
  std::uint16_t u16() { return static_cast<std::uint16_t>(get(2)); }
  std::uint32_t u32() { return static_cast<std::uint32_t>(get(4)); }
  std::uint64_t u64() { return get(8); }
  float f32() { return std::bit_cast<float>(u32()); }
  void expect_magic(std::string_view m);
  std::string str();
  std::span<const std::uint8_t> bytes(std::size_t n);
  void f32s(std::span<float> out) {
    for (auto& x : out) x = f32();
  }

  std::size_t remaining() const { return data_.size() - pos_; }
  bool done() const { return pos_ == data_.size(); }

 private:
  std::uint64_t get(int n);
  void need(std::size_t n) const {
    if (data_.size() - pos_ < n) throw FormatError("truncated binary file");
  }
  std::vector<std::uint8_t> data_;
  std::size_t pos_ = 0;
};

std::vector<std::uint8_t> read_file(const std::filesystem::path& file);

// 64-bit FNV-1a; used for manifests and determinism checks.
std::uint64_t fnv1a(std::span<const std::uint8_t> data);
std::uint64_t fnv1a_file(const std::filesystem::path& file);
std::string hex64(std::uint64_t v);

}  // namespace nq::io
