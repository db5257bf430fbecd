#include "nq/graph.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <sstream>
#include <string>
#include <string_view>

namespace nq {

SparseBinaryMatrix::SparseBinaryMatrix(std::size_t cols,
                                       std::vector<std::vector<std::uint32_t>> rows)
    : cols_(cols) {
  offsets_.reserve(rows.size() + 1);
  for (auto& r : rows) {
    std::sort(r.begin(), r.end());
    r.erase(std::unique(r.begin(), r.end()), r.end());
    for (auto c : r) {
      if (c >= cols_) {
        throw BoundsError("attribute index " + std::to_string(c) + " >= dimension " +
                          std::to_string(cols_));
      }
    }
    indices_.insert(indices_.end(), r.begin(), r.end());
    offsets_.push_back(indices_.size());
  }
}

SparseBinaryMatrix SparseBinaryMatrix::identity(std::size_t n) {
  std::vector<std::vector<std::uint32_t>> rows(n);
  for (std::size_t i = 0; i < n; ++i) rows[i] = {static_cast<std::uint32_t>(i)};
  return SparseBinaryMatrix(n, std::move(rows));
}

Graph::Graph(std::size_t num_nodes, std::span<const Edge> edges, Diagnostics* diag) {
  std::vector<Edge> directed;
  directed.reserve(edges.size() * 2);
  std::size_t self_loops = 0;
  for (auto [a, b] : edges) {
    if (a >= num_nodes || b >= num_nodes) {
      throw BoundsError("edge (" + std::to_string(a) + "," + std::to_string(b) +
                        ") outside node range " + std::to_string(num_nodes));
    }
    if (a == b) {
      ++self_loops;
      continue;
    }
    directed.emplace_back(a, b);
    directed.emplace_back(b, a);
  }
  if (self_loops > 0) {
    warn(diag, "dropped " + std::to_string(self_loops) + " self-loop(s)");
  }
  std::sort(directed.begin(), directed.end());
  directed.erase(std::unique(directed.begin(), directed.end()), directed.end());

  offsets_.assign(num_nodes + 1, 0);
  for (auto [a, b] : directed) ++offsets_[a + 1];
  for (std::size_t i = 0; i < num_nodes; ++i) offsets_[i + 1] += offsets_[i];
  neighbours_.resize(directed.size());
  for (std::size_t k = 0; k < directed.size(); ++k) neighbours_[k] = directed[k].second;
  labels_.resize(num_nodes);
}

bool Graph::has_edge(NodeId a, NodeId b) const {
  auto nb = neighbours(a);
  return std::binary_search(nb.begin(), nb.end(), b);
}

std::vector<Edge> Graph::edges() const {
  std::vector<Edge> out;
  out.reserve(num_edges());
  for (NodeId a = 0; a < num_nodes(); ++a) {
    for (NodeId b : neighbours(a)) {
      if (a < b) out.emplace_back(a, b);
    }
  }
  return out;
}

void Graph::set_attributes(SparseBinaryMatrix attrs) {
  if (attrs.rows() != num_nodes()) {
    throw DimensionError("attribute rows " + std::to_string(attrs.rows()) +
                         " != node count " + std::to_string(num_nodes()));
  }
  attributes_ = std::move(attrs);
}

SparseBinaryMatrix Graph::input_features() const {
  return attributes_ ? *attributes_ : SparseBinaryMatrix::identity(num_nodes());
}

void Graph::set_labels(std::size_t num_labels, std::vector<std::vector<LabelId>> labels) {
  if (labels.size() != num_nodes()) {
    throw DimensionError("label rows != node count");
  }
  for (auto& ls : labels) {
    std::sort(ls.begin(), ls.end());
    ls.erase(std::unique(ls.begin(), ls.end()), ls.end());
    for (auto l : ls) {
      if (l >= num_labels) {
        throw BoundsError("label id " + std::to_string(l) + " >= label count " +
                          std::to_string(num_labels));
      }
    }
  }
  num_labels_ = num_labels;
  labels_ = std::move(labels);
}

std::vector<int> Graph::primary_labels() const {
  std::vector<int> out(num_nodes(), -1);
  for (std::size_t i = 0; i < num_nodes(); ++i) {
    if (!labels_[i].empty()) out[i] = static_cast<int>(labels_[i].front());
  }
  return out;
}

Graph Graph::with_edges(std::span<const Edge> edges) const {
  Graph g(num_nodes(), edges);
  g.attributes_ = attributes_;
  g.num_labels_ = num_labels_;
  g.labels_ = labels_;
  return g;
}

namespace {

std::string_view strip_comment(std::string_view line) {
  auto pos = line.find('#');
  if (pos != std::string_view::npos) line = line.substr(0, pos);
  return line;
}

// Parses every unsigned integer token in `text`; separators are whitespace
// and commas.
std::vector<std::uint64_t> parse_ids(std::string_view text, const std::string& file,
                                     std::size_t lineno) {
  std::vector<std::uint64_t> out;
  std::size_t i = 0;
  while (i < text.size()) {
    char c = text[i];
    if (c == ' ' || c == '\t' || c == ',' || c == '\r') {
      ++i;
      continue;
    }
    std::uint64_t v = 0;
    auto [ptr, ec] = std::from_chars(text.data() + i, text.data() + text.size(), v);
    if (ec == std::errc::result_out_of_range) {
      throw BoundsError(file + ":" + std::to_string(lineno) + ": id overflow");
    }
    if (ec != std::errc() || ptr == text.data() + i) {
      throw ParseError(file, lineno, "expected non-negative integer near '" +
                                         std::string(text.substr(i, 16)) + "'");
    }
    if (ptr != text.data() + text.size() && *ptr != ' ' && *ptr != '\t' && *ptr != ',' &&
        *ptr != '\r') {
      throw ParseError(file, lineno, "malformed token");
    }
    out.push_back(v);
    i = static_cast<std::size_t>(ptr - text.data());
  }
  return out;
}

std::uint32_t checked_id(std::uint64_t v, const std::string& file, std::size_t lineno) {
  if (v > kMaxNodeId) {
    throw BoundsError(file + ":" + std::to_string(lineno) + ": id " + std::to_string(v) +
                      " exceeds " + std::to_string(kMaxNodeId));
  }
  return static_cast<std::uint32_t>(v);
}

// Reads "# key=value" from a header comment line, if present.
std::optional<std::uint64_t> header_value(std::string_view line, std::string_view key) {
  if (line.empty() || line.front() != '#') return std::nullopt;
  auto pos = line.find(key);
  if (pos == std::string_view::npos) return std::nullopt;
  pos += key.size();
  while (pos < line.size() && (line[pos] == ' ' || line[pos] == '=')) ++pos;
  std::uint64_t v = 0;
  auto [ptr, ec] = std::from_chars(line.data() + pos, line.data() + line.size(), v);
  if (ec != std::errc()) return std::nullopt;
  return v;
}

std::ifstream open_input(const std::filesystem::path& p) {
  std::ifstream in(p);
  if (!in) throw std::runtime_error("cannot open " + p.string());
  return in;
}

}  // namespace

Graph load_graph(const std::filesystem::path& edge_file,
                 const std::optional<std::filesystem::path>& attr_file,
                 const std::optional<std::filesystem::path>& label_file,
                 Diagnostics* diag) {
  const std::string ename = edge_file.string();
  auto in = open_input(edge_file);
  std::vector<Edge> edges;
  std::size_t num_nodes = 0;
  std::string line;
  for (std::size_t lineno = 1; std::getline(in, line); ++lineno) {
    auto ids = parse_ids(strip_comment(line), ename, lineno);
    if (ids.empty()) continue;
    if (ids.size() != 2) {
      throw ParseError(ename, lineno, "expected 2 node ids, got " + std::to_string(ids.size()));
    }
    NodeId a = checked_id(ids[0], ename, lineno);
    NodeId b = checked_id(ids[1], ename, lineno);
    num_nodes = std::max<std::size_t>(num_nodes, std::max(a, b) + 1ull);
    edges.emplace_back(a, b);
  }

  std::vector<std::vector<std::uint32_t>> attr_rows;
  std::optional<std::size_t> attr_dim;
  if (attr_file) {
    const std::string aname = attr_file->string();
    auto ain = open_input(*attr_file);
    std::uint64_t max_col = 0;
    bool any = false;
    for (std::size_t lineno = 1; std::getline(ain, line); ++lineno) {
      if (!line.empty() && line.front() == '#') {
        if (auto d = header_value(line, "dim")) attr_dim = *d;
        continue;
      }
      auto ids = parse_ids(line, aname, lineno);
      std::vector<std::uint32_t> row;
      row.reserve(ids.size());
      for (auto v : ids) {
        row.push_back(checked_id(v, aname, lineno));
        max_col = std::max(max_col, v);
        any = true;
      }
      attr_rows.push_back(std::move(row));
    }
    std::size_t inferred = any ? max_col + 1 : 0;
    if (attr_dim && *attr_dim < inferred) {
      throw BoundsError(aname + ": attribute index exceeds declared dim");
    }
    if (!attr_dim) attr_dim = inferred;
    num_nodes = std::max(num_nodes, attr_rows.size());
  }

  std::vector<std::pair<NodeId, std::vector<LabelId>>> label_lines;
  std::optional<std::size_t> num_classes;
  if (label_file) {
    const std::string lname = label_file->string();
    auto lin = open_input(*label_file);
    for (std::size_t lineno = 1; std::getline(lin, line); ++lineno) {
      if (!line.empty() && line.front() == '#') {
        if (auto c = header_value(line, "classes")) num_classes = *c;
        continue;
      }
      auto ids = parse_ids(strip_comment(line), lname, lineno);
      if (ids.empty()) continue;
      if (ids.size() < 2) throw ParseError(lname, lineno, "expected node id and label(s)");
      NodeId v = checked_id(ids[0], lname, lineno);
      std::vector<LabelId> ls;
      for (std::size_t k = 1; k < ids.size(); ++k) ls.push_back(checked_id(ids[k], lname, lineno));
      num_nodes = std::max<std::size_t>(num_nodes, v + 1ull);
      label_lines.emplace_back(v, std::move(ls));
    }
  }

  Graph g(num_nodes, edges, diag);
  if (attr_file) {
    attr_rows.resize(num_nodes);
    g.set_attributes(SparseBinaryMatrix(*attr_dim, std::move(attr_rows)));
  }
  if (label_file) {
    std::vector<std::vector<LabelId>> labels(num_nodes);
    std::size_t max_label = 0;
    for (auto& [v, ls] : label_lines) {
      for (auto l : ls) max_label = std::max<std::size_t>(max_label, l + 1ull);
      labels[v].insert(labels[v].end(), ls.begin(), ls.end());
    }
    std::size_t classes = num_classes.value_or(max_label);
    g.set_labels(classes, std::move(labels));
  }
  return g;
}

void write_edges(const std::filesystem::path& file, std::span<const Edge> edges) {
  std::ofstream out(file);
  if (!out) throw std::runtime_error("cannot write " + file.string());
  for (auto [a, b] : edges) out << a << ' ' << b << '\n';
}

void write_attributes(const std::filesystem::path& file, const SparseBinaryMatrix& attrs) {
  std::ofstream out(file);
  if (!out) throw std::runtime_error("cannot write " + file.string());
  out << "# dim=" << attrs.cols() << '\n';
  for (std::size_t i = 0; i < attrs.rows(); ++i) {
    bool first = true;
    for (auto c : attrs.row(i)) {
      if (!first) out << ' ';
      out << c;
      first = false;
    }
    out << '\n';
  }
}

void write_labels(const std::filesystem::path& file, const Graph& g) {
  std::ofstream out(file);
  if (!out) throw std::runtime_error("cannot write " + file.string());
  out << "# classes=" << g.num_labels() << '\n';
  for (NodeId v = 0; v < g.num_nodes(); ++v) {
    auto ls = g.labels(v);
    if (ls.empty()) continue;
    out << v << ' ';
    for (std::size_t k = 0; k < ls.size(); ++k) out << (k ? "," : "") << ls[k];
    out << '\n';
  }
}

}  // namespace nq
