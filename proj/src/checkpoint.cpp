#include "nq/checkpoint.hpp"

#include <sstream>

#include "nq/binary_io.hpp"

namespace nq {

namespace {
constexpr std::uint8_t kTensorSection = 0;
constexpr std::uint8_t kTextSection = 1;
}  // namespace

void Checkpoint::set_text(const std::string& name, std::string text) { texts_[name] = std::move(text); }

void Checkpoint::add_tensor(const std::string& name, ad::Matrix<float> value) {
  for (auto& t : tensors_) {
    if (t.name == name) {
      t.value = std::move(value);
      return;
    }
  }
  tensors_.push_back({name, std::move(value)});
}

const std::string& Checkpoint::text(const std::string& name) const {
  auto it = texts_.find(name);
  if (it == texts_.end()) throw FormatError("checkpoint: missing text section '" + name + "'");
  return it->second;
}

bool Checkpoint::has_tensor(const std::string& name) const {
  for (const auto& t : tensors_) {
    if (t.name == name) return true;
  }
  return false;
}

const ad::Matrix<float>& Checkpoint::tensor(const std::string& name) const {
  for (const auto& t : tensors_) {
    if (t.name == name) return t.value;
  }
  throw FormatError("checkpoint: missing tensor section '" + name + "'");
}

std::vector<std::uint8_t> Checkpoint::serialize() const {
  io::Writer w;
  w.magic("NQCK");
  w.u32(kVersion);
  w.u32(static_cast<std::uint32_t>(texts_.size() + tensors_.size()));
  for (const auto& [name, text] : texts_) {
    w.str(name);
    w.u8(kTextSection);
    w.str(text);
  }
  for (const auto& t : tensors_) {
    w.str(t.name);
    w.u8(kTensorSection);
    w.u64(static_cast<std::uint64_t>(t.value.rows()));
    w.u64(static_cast<std::uint64_t>(t.value.cols()));
    w.f32s({t.value.data(), static_cast<std::size_t>(t.value.size())});
  }
  return w.buffer();
}

Checkpoint Checkpoint::deserialize(std::vector<std::uint8_t> bytes) {
  io::Reader r(std::move(bytes));
  r.expect_magic("NQCK");
  if (auto v = r.u32(); v != kVersion) throw FormatError("unsupported NQCK version " + std::to_string(v));
  auto count = r.u32();
  Checkpoint ck;
  for (std::uint32_t s = 0; s < count; ++s) {
    auto name = r.str();
    auto kind = r.u8();
    if (kind == kTextSection) {
      ck.set_text(name, r.str());
    } else if (kind == kTensorSection) {
      auto rows = r.u64();
      auto cols = r.u64();
      if (rows * cols * 4 > r.remaining()) throw FormatError("truncated tensor section '" + name + "'");
      ad::Matrix<float> m(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
      r.f32s({m.data(), static_cast<std::size_t>(m.size())});
      ck.tensors_.push_back({name, std::move(m)});
    } else {
      throw FormatError("unknown NQCK section kind " + std::to_string(kind));
    }
  }
  if (!r.done()) throw FormatError("trailing bytes after NQCK sections");
  return ck;
}

void Checkpoint::save(const std::filesystem::path& file) const {
  io::Writer w;
  w.bytes(serialize());
  w.save(file);
}

Checkpoint Checkpoint::load(const std::filesystem::path& file) { return deserialize(io::read_file(file)); }

std::string format_key_values(const std::map<std::string, std::string>& kv) {
  std::string out;
  for (const auto& [k, v] : kv) out += k + "=" + v + "\n";
  return out;
}

std::map<std::string, std::string> parse_key_values(const std::string& text) {
  std::map<std::string, std::string> kv;
  std::istringstream in(text);
  std::string line;
  while (std::getline(in, line)) {
    auto eq = line.find('=');
    if (eq == std::string::npos) continue;
    kv[line.substr(0, eq)] = line.substr(eq + 1);
  }
  return kv;
}

}  // namespace nq
