#include "nq/binary_io.hpp"

#include <cstdio>
#include <fstream>
#include <iterator>

namespace nq::io {

void Writer::save(const std::filesystem::path& file) const {
  std::ofstream out(file, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write " + file.string());
  out.write(reinterpret_cast<const char*>(buf_.data()), static_cast<std::streamsize>(buf_.size()));
  if (!out) throw std::runtime_error("write failed: " + file.string());
}

std::vector<std::uint8_t> read_file(const std::filesystem::path& file) {
  std::ifstream in(file, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + file.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

Reader Reader::from_file(const std::filesystem::path& file) { return Reader(read_file(file)); }

std::uint64_t Reader::get(int n) {
  need(static_cast<std::size_t>(n));
  std::uint64_t v = 0;
  for (int i = 0; i < n; ++i) v |= static_cast<std::uint64_t>(data_[pos_ + i]) << (8 * i);
  pos_ += static_cast<std::size_t>(n);
  return v;
}

void Reader::expect_magic(std::string_view m) {
  need(m.size());
  if (std::string_view(reinterpret_cast<const char*>(data_.data() + pos_), m.size()) != m) {
    throw FormatError("bad magic, expected " + std::string(m));
  }
  pos_ += m.size();
}

std::string Reader::str() {
  auto n = u32();
  need(n);
  std::string s(reinterpret_cast<const char*>(data_.data() + pos_), n);
  pos_ += n;
  return s;
}

std::span<const std::uint8_t> Reader::bytes(std::size_t n) {
  need(n);
  std::span<const std::uint8_t> s(data_.data() + pos_, n);
  pos_ += n;
  return s;
}

std::uint64_t fnv1a(std::span<const std::uint8_t> data) {
  std::uint64_t h = 0xcbf29ce484222325ull;
  for (auto b : data) {
    h ^= b;
    h *= 0x100000001b3ull;
  }
  return h;
}

std::uint64_t fnv1a_file(const std::filesystem::path& file) { return fnv1a(read_file(file)); }

std::string hex64(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

}  // namespace nq::io
