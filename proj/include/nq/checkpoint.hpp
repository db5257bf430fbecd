#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "nq/autodiff.hpp"

namespace nq {

struct TensorSection {
  std::string name;
  ad::Matrix<float> value;
};

// NQCK container: magic "NQCK", u32 version, u32 section count, then named
// sections. A section is either a tensor (u8 kind 0, u64 rows, u64 cols,
// rows*cols little-endian f32) or text (u8 kind 1, u32 length, bytes).
// Sections are written in insertion order, so identical content gives
// identical bytes.
class Checkpoint {
 public:
  static constexpr std::uint32_t kVersion = 1;

  void set_text(const std::string& name, std::string text);
  void add_tensor(const std::string& name, ad::Matrix<float> value);

  const std::string& text(const std::string& name) const;
  bool has_text(const std::string& name) const { return texts_.count(name) != 0; }
  const ad::Matrix<float>& tensor(const std::string& name) const;
  bool has_tensor(const std::string& name) const;
  const std::vector<TensorSection>& tensors() const { return tensors_; }

  std::vector<std::uint8_t> serialize() const;
  static Checkpoint deserialize(std::vector<std::uint8_t> bytes);
  void save(const std::filesystem::path& file) const;
  static Checkpoint load(const std::filesystem::path& file);

 private:
  std::map<std::string, std::string> texts_;
  std::vector<TensorSection> tensors_;
};

// Flat "key=value" lines, sorted by key.
std::string format_key_values(const std::map<std::string, std::string>& kv);
std::map<std::string, std::string> parse_key_values(const std::string& text);

}  // namespace nq
