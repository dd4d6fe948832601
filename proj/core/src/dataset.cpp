#include "ecdiff/dataset.hpp"

#include <algorithm>
#include <charconv>
#include <cstdio>
#include <fstream>
#include <map>
#include <random>
#include <sstream>

#include "ecdiff/errors.hpp"

namespace ecdiff {

namespace fs = std::filesystem;

Split parse_split(std::string_view token) {
  if (token == "train") return Split::kTrain;
  if (token == "val") return Split::kVal;
  if (token == "test") return Split::kTest;
  if (token == "unused") return Split::kUnused;
  throw ParameterError("unknown split tag: " + std::string(token));
}

std::string_view to_string(Split s) {
  switch (s) {
    case Split::kTrain: return "train";
    case Split::kVal: return "val";
    case Split::kTest: return "test";
    case Split::kUnused: return "unused";
  }
  return "?";
}

std::size_t Dataset::num_classes() const {
  int top = -1;
  for (int y : labels) top = std::max(top, y);
  return static_cast<std::size_t>(top + 1);
}

std::vector<std::size_t> Dataset::indices(Split s) const {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < split.size(); ++i) {
    const bool has_target = targets.has_value() || labels[i] >= 0;
    if (split[i] == s && has_target) out.push_back(i);
  }
  return out;
}

void Dataset::validate() const {
  const std::size_t n = features.rows();
  if (labels.size() != n || split.size() != n) {
    throw ContractError("dataset: " + std::to_string(n) + " feature rows, " +
                        std::to_string(labels.size()) + " labels, " +
                        std::to_string(split.size()) + " split tags");
  }
  if (graph && graph->num_nodes() != n) {
    throw ContractError("dataset: graph has " + std::to_string(graph->num_nodes()) +
                        " nodes for " + std::to_string(n) + " feature rows");
  }
  if (targets && targets->rows() != n) {
    throw ContractError("dataset: targets have " + std::to_string(targets->rows()) + " rows");
  }
  for (int y : labels)
    if (y < -1) throw ContractError("dataset: label " + std::to_string(y) + " is negative");
}

// ---------------------------------------------------------------------------
// Synthetic SBM

namespace {

void stratified_split(Dataset& data, std::mt19937_64& rng) {
  std::map<int, std::vector<std::size_t>> by_class;
  for (std::size_t i = 0; i < data.labels.size(); ++i) by_class[data.labels[i]].push_back(i);
  data.split.assign(data.labels.size(), Split::kTest);
  for (auto& [label, members] : by_class) {
    std::shuffle(members.begin(), members.end(), rng);
    const auto n = members.size();
    auto n_train = static_cast<std::size_t>(std::llround(0.1 * static_cast<double>(n)));
    auto n_val = n_train;
    n_train = std::max<std::size_t>(n_train, 1);
    if (n >= 3) n_val = std::max<std::size_t>(n_val, 1);
    n_train = std::min(n_train, n);
    n_val = std::min(n_val, n - n_train);
    for (std::size_t k = 0; k < n_train; ++k) data.split[members[k]] = Split::kTrain;
    for (std::size_t k = n_train; k < n_train + n_val; ++k) data.split[members[k]] = Split::kVal;
  }
}

}  // namespace

Dataset sbm_generate(const SbmParams& p) {
  if (!(0.0 <= p.p_out && p.p_out <= p.p_in && p.p_in <= 1.0)) {
    throw ParameterError("sbm_generate: need 0 <= p_out <= p_in <= 1");
  }
  if (p.blocks == 0 || p.per_block == 0 || p.feat_dim == 0) {
    throw ParameterError("sbm_generate: blocks, per_block and feat_dim must be positive");
  }
  const std::size_t n = p.blocks * p.per_block;
  std::mt19937_64 rng(p.seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::normal_distribution<double> noise(0.0, 1.0);

  Dataset data;
  data.labels.resize(n);
  for (std::size_t i = 0; i < n; ++i) data.labels[i] = static_cast<int>(i / p.per_block);

  std::vector<Graph::Edge> edges;
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      const double prob = data.labels[i] == data.labels[j] ? p.p_in : p.p_out;
      if (unit(rng) < prob) edges.emplace_back(i, j);
    }
  }
  data.graph = Graph(n, std::move(edges));

  data.features = Matrix(n, p.feat_dim);
  for (std::size_t i = 0; i < n; ++i) {
    auto row = data.features.row(i);
    for (double& v : row) v = noise(rng);
    row[static_cast<std::size_t>(data.labels[i]) % p.feat_dim] += p.feat_shift;
  }
  stratified_split(data, rng);
  return data;
}

// ---------------------------------------------------------------------------
// Text formats

namespace {

struct LineReader {
  explicit LineReader(const fs::path& path) : file(path.string()), in(path) {
    if (!in) throw FormatError(file, 0, "cannot open file");
  }
  // Next non-blank line; false at end of file.
  bool next(std::string& line) {
    while (std::getline(in, line)) {
      ++number;
      if (line.find_first_not_of(" \t\r") != std::string::npos) return true;
    }
    return false;
  }
  std::string file;
  std::ifstream in;
  std::size_t number = 0;
};

template <typename T>
bool parse_number(std::string_view tok, T& out) {
  if constexpr (std::is_floating_point_v<T>) {
    // from_chars for double is available in libstdc++ 11.
    auto [ptr, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), out);
    return ec == std::errc() && ptr == tok.data() + tok.size();
  } else {
    auto [ptr, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), out);
    return ec == std::errc() && ptr == tok.data() + tok.size();
  }
}

std::vector<std::string_view> split_ws(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t i = 0;
  while (i < line.size()) {
    while (i < line.size() && (line[i] == ' ' || line[i] == '\t' || line[i] == '\r')) ++i;
    std::size_t j = i;
    while (j < line.size() && line[j] != ' ' && line[j] != '\t' && line[j] != '\r') ++j;
    if (j > i) out.push_back(line.substr(i, j - i));
    i = j;
  }
  return out;
}

Matrix read_features(const fs::path& path) {
  LineReader r(path);
  std::string line;
  std::vector<double> data;
  std::size_t cols = 0;
  std::size_t rows = 0;
  while (r.next(line)) {
    auto toks = split_ws(line);
    if (rows == 0) cols = toks.size();
    if (toks.size() != cols) {
      throw FormatError(r.file, r.number,
                        "expected " + std::to_string(cols) + " values, found " +
                            std::to_string(toks.size()));
    }
    for (auto tok : toks) {
      double v = 0.0;
      if (!parse_number(tok, v)) {
        throw FormatError(r.file, r.number, "not a number: '" + std::string(tok) + "'");
      }
      data.push_back(v);
    }
    ++rows;
  }
  return Matrix(rows, cols, std::move(data));
}

std::vector<int> read_labels(const fs::path& path, std::size_t n) {
  LineReader r(path);
  std::string line;
  std::vector<int> labels;
  while (r.next(line)) {
    auto toks = split_ws(line);
    int y = 0;
    if (toks.size() != 1 || !parse_number(toks[0], y) || y < -1) {
      throw FormatError(r.file, r.number, "expected one integer label >= -1");
    }
    if (labels.size() == n) {
      throw FormatError(r.file, r.number, "more labels than the " + std::to_string(n) +
                                              " feature rows");
    }
    labels.push_back(y);
  }
  if (labels.size() != n) {
    throw FormatError(r.file, r.number, "found " + std::to_string(labels.size()) +
                                            " labels for " + std::to_string(n) + " feature rows");
  }
  return labels;
}

Graph read_edges(const fs::path& path, std::size_t n) {
  LineReader r(path);
  std::string line;
  std::vector<Graph::Edge> edges;
  while (r.next(line)) {
    auto toks = split_ws(line);
    std::size_t u = 0, v = 0;
    if (toks.size() != 2 || !parse_number(toks[0], u) || !parse_number(toks[1], v)) {
      throw FormatError(r.file, r.number, "expected 'u v' node pair");
    }
    if (u >= n || v >= n) {
      throw FormatError(r.file, r.number,
                        "edge (" + std::to_string(u) + "," + std::to_string(v) +
                            ") references a node outside [0," + std::to_string(n) + ")");
    }
    edges.emplace_back(u, v);
  }
  return Graph(n, std::move(edges));
}

std::vector<Split> read_split(const fs::path& path, std::size_t n) {
  LineReader r(path);
  std::string line;
  std::vector<Split> split;
  while (r.next(line)) {
    auto toks = split_ws(line);
    if (toks.size() != 1) throw FormatError(r.file, r.number, "expected one split tag");
    if (split.size() == n) {
      throw FormatError(r.file, r.number,
                        "more split tags than the " + std::to_string(n) + " feature rows");
    }
    try {
      split.push_back(parse_split(toks[0]));
    } catch (const ParameterError& e) {
      throw FormatError(r.file, r.number, e.what());
    }
  }
  if (split.size() != n) {
    throw FormatError(r.file, r.number, "found " + std::to_string(split.size()) +
                                            " split tags for " + std::to_string(n) +
                                            " feature rows");
  }
  return split;
}

std::string format_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

}  // namespace

Dataset load_dataset(const fs::path& features_path, const fs::path& labels_path,
                     const std::optional<fs::path>& edges_path,
                     const std::optional<fs::path>& split_path) {
  Dataset data;
  data.features = read_features(features_path);
  const std::size_t n = data.features.rows();
  data.labels = read_labels(labels_path, n);
  if (edges_path) data.graph = read_edges(*edges_path, n);
  data.split = split_path ? read_split(*split_path, n) : std::vector<Split>(n, Split::kTest);
  data.validate();
  return data;
}

void write_dataset(const Dataset& data, const fs::path& dir) {
  fs::create_directories(dir);
  {
    std::ofstream out(dir / "features.txt");
    for (std::size_t i = 0; i < data.features.rows(); ++i) {
      auto row = data.features.row(i);
      for (std::size_t j = 0; j < row.size(); ++j) out << (j ? " " : "") << format_double(row[j]);
      out << '\n';
    }
  }
  {
    std::ofstream out(dir / "labels.txt");
    for (int y : data.labels) out << y << '\n';
  }
  {
    std::ofstream out(dir / "split.txt");
    for (Split s : data.split) out << to_string(s) << '\n';
  }
  if (data.graph) {
    std::ofstream out(dir / "edges.txt");
    for (const auto& [u, v] : data.graph->edges()) out << u << ' ' << v << '\n';
  }
}

Dataset load_cora(const fs::path& content_path, const fs::path& cites_path) {
  LineReader r(content_path);
  std::string line;
  std::map<std::string, std::size_t, std::less<>> node_of;
  std::map<std::string, int, std::less<>> class_of;
  std::vector<double> data;
  std::vector<int> labels;
  std::size_t cols = 0;
  while (r.next(line)) {
    auto toks = split_ws(line);
    if (toks.size() < 3) throw FormatError(r.file, r.number, "expected 'id features... class'");
    const std::size_t width = toks.size() - 2;
    if (labels.empty()) cols = width;
    if (width != cols) {
      throw FormatError(r.file, r.number, "expected " + std::to_string(cols) +
                                              " features, found " + std::to_string(width));
    }
    const std::string id(toks.front());
    if (node_of.count(id)) throw FormatError(r.file, r.number, "duplicate paper id " + id);
    node_of.emplace(id, labels.size());
    for (std::size_t k = 1; k + 1 < toks.size(); ++k) {
      double v = 0.0;
      if (!parse_number(toks[k], v)) {
        throw FormatError(r.file, r.number, "not a number: '" + std::string(toks[k]) + "'");
      }
      data.push_back(v);
    }
    const std::string cls(toks.back());
    auto it = class_of.find(cls);
    if (it == class_of.end()) it = class_of.emplace(cls, static_cast<int>(class_of.size())).first;
    labels.push_back(it->second);
  }
  const std::size_t n = labels.size();

  LineReader c(cites_path);
  std::vector<Graph::Edge> edges;
  while (c.next(line)) {
    auto toks = split_ws(line);
    if (toks.size() != 2) throw FormatError(c.file, c.number, "expected 'cited citing'");
    auto a = node_of.find(toks[0]);
    auto b = node_of.find(toks[1]);
    if (a == node_of.end() || b == node_of.end()) {
      throw FormatError(c.file, c.number, "citation references an unknown paper id");
    }
    edges.emplace_back(a->second, b->second);
  }

  Dataset out;
  out.features = Matrix(n, cols, std::move(data));
  out.labels = std::move(labels);
  out.split.assign(n, Split::kTest);
  out.graph = Graph(n, std::move(edges));
  out.validate();
  return out;
}

void assign_per_class_split(Dataset& data, std::size_t per_class, std::size_t val,
                            std::size_t test, std::uint64_t seed) {
  const std::size_t n = data.num_nodes();
  std::mt19937_64 rng(seed);
  std::vector<std::size_t> order(n);
  for (std::size_t i = 0; i < n; ++i) order[i] = i;
  std::shuffle(order.begin(), order.end(), rng);

  data.split.assign(n, Split::kUnused);
  std::map<int, std::size_t> taken;
  std::vector<std::size_t> rest;
  for (std::size_t i : order) {
    const int y = data.labels[i];
    if (y >= 0 && taken[y] < per_class) {
      ++taken[y];
      data.split[i] = Split::kTrain;
    } else {
      rest.push_back(i);
    }
  }
  std::size_t k = 0;
  for (; k < rest.size() && k < val; ++k) data.split[rest[k]] = Split::kVal;
  for (std::size_t t = 0; k < rest.size() && t < test; ++k, ++t) data.split[rest[k]] = Split::kTest;
}

}  // namespace ecdiff
