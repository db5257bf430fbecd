#pragma once

#include <cstddef>
#include <iostream>
#include <stdexcept>
#include <string>
#include <vector>

namespace nq {

class ParseError : public std::runtime_error {
 public:
  ParseError(const std::string& file, std::size_t line, const std::string& what)
      : std::runtime_error(file + ":" + std::to_string(line) + ": " + what),
        line_(line) {}
  std::size_t line() const { return line_; }

 private:
  std::size_t line_;
};

class BoundsError : public std::out_of_range {
 public:
  using std::out_of_range::out_of_range;
};

class DimensionError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// No valid triplet (or label pair) can be drawn from the graph.
class DegenerateGraphError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class FormatError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ConfigError : public std::invalid_argument {
 public:
  ConfigError(const std::string& key, const std::string& what)
      : std::invalid_argument(key + ": " + what), key_(key) {}
  const std::string& key() const { return key_; }

 private:
  std::string key_;
};

// Collects warnings raised by loaders and protocols. Messages are echoed to
// stderr unless `quiet` is set.
struct Diagnostics {
  std::vector<std::string> warnings;
  bool quiet = false;

  void warn(const std::string& msg) {
    warnings.push_back(msg);
    if (!quiet) std::cerr << "warning: " << msg << '\n';
  }
};

inline void warn(Diagnostics* diag, const std::string& msg) {
  if (diag != nullptr) {
    diag->warn(msg);
  } else {
    std::cerr << "warning: " << msg << '\n';
  }
}

}  // namespace nq
