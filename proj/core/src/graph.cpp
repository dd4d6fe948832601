#include "ecdiff/graph.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "ecdiff/errors.hpp"

namespace ecdiff {

Graph::Graph(std::size_t n, std::vector<Edge> edges) : n_(n) {
  for (auto& [u, v] : edges) {
    if (u >= n || v >= n) {
      throw ParameterError("edge (" + std::to_string(u) + "," + std::to_string(v) +
                           ") references a node outside [0," + std::to_string(n) + ")");
    }
    if (u > v) std::swap(u, v);
  }
  std::erase_if(edges, [](const Edge& e) { return e.first == e.second; });
  std::sort(edges.begin(), edges.end());
  edges.erase(std::unique(edges.begin(), edges.end()), edges.end());
  edges_ = std::move(edges);

  degrees_.assign(n, 0);
  adjacency_.assign(n, {});
  for (const auto& [u, v] : edges_) {
    ++degrees_[u];
    ++degrees_[v];
    adjacency_[u].push_back(v);
    adjacency_[v].push_back(u);
  }
  for (auto& nb : adjacency_) std::sort(nb.begin(), nb.end());
}

bool Graph::has_edge(std::size_t u, std::size_t v) const {
  if (u >= n_ || v >= n_) return false;
  const auto& nb = adjacency_[u];
  return std::binary_search(nb.begin(), nb.end(), v);
}

Matrix Graph::adjacency() const {
  Matrix a(n_, n_);
  for (const auto& [u, v] : edges_) {
    a(u, v) = 1.0;
    a(v, u) = 1.0;
  }
  return a;
}

bool Graph::connected() const {
  if (n_ <= 1) return true;
  std::vector<char> seen(n_, 0);
  std::vector<std::size_t> stack{0};
  seen[0] = 1;
  std::size_t count = 1;
  while (!stack.empty()) {
    const std::size_t u = stack.back();
    stack.pop_back();
    for (std::size_t v : adjacency_[u]) {
      if (!seen[v]) {
        seen[v] = 1;
        ++count;
        stack.push_back(v);
      }
    }
  }
  return count == n_;
}

Graph Graph::induced_subgraph(const std::vector<std::size_t>& nodes) const {
  std::vector<std::size_t> relabel(n_, static_cast<std::size_t>(-1));
  for (std::size_t i = 0; i < nodes.size(); ++i) relabel[nodes[i]] = i;
  std::vector<Edge> kept;
  for (const auto& [u, v] : edges_) {
    if (relabel[u] != static_cast<std::size_t>(-1) && relabel[v] != static_cast<std::size_t>(-1)) {
      kept.emplace_back(relabel[u], relabel[v]);
    }
  }
  return Graph(nodes.size(), std::move(kept));
}

AdjacencyMode parse_adjacency_mode(std::string_view name) {
  if (name == "sym") return AdjacencyMode::kSym;
  if (name == "row") return AdjacencyMode::kRow;
  if (name == "gin") return AdjacencyMode::kGin;
  if (name == "identity") return AdjacencyMode::kIdentity;
  if (name == "all_one") return AdjacencyMode::kAllOne;
  throw ParameterError("unknown adjacency mode: " + std::string(name));
}

std::string_view to_string(AdjacencyMode mode) {
  switch (mode) {
    case AdjacencyMode::kSym: return "sym";
    case AdjacencyMode::kRow: return "row";
    case AdjacencyMode::kGin: return "gin";
    case AdjacencyMode::kIdentity: return "identity";
    case AdjacencyMode::kAllOne: return "all_one";
  }
  return "?";
}

SparseMatrix normalized_adjacency_sparse(const Graph& g, AdjacencyMode mode) {
  const std::size_t n = g.num_nodes();
  const auto& deg = g.degrees();
  std::vector<SparseMatrix::Entry> entries;
  switch (mode) {
    case AdjacencyMode::kSym:
      for (const auto& [u, v] : g.edges()) {
        const double w = 1.0 / std::sqrt(static_cast<double>(deg[u]) * static_cast<double>(deg[v]));
        entries.push_back({u, v, w});
        entries.push_back({v, u, w});
      }
      break;
    case AdjacencyMode::kRow:
      for (const auto& [u, v] : g.edges()) {
        entries.push_back({u, v, 1.0 / static_cast<double>(deg[u])});
        entries.push_back({v, u, 1.0 / static_cast<double>(deg[v])});
      }
      break;
    case AdjacencyMode::kGin:
      for (const auto& [u, v] : g.edges()) {
        entries.push_back({u, v, 1.0});
        entries.push_back({v, u, 1.0});
      }
      for (std::size_t i = 0; i < n; ++i) entries.push_back({i, i, 1.0});
      break;
    case AdjacencyMode::kIdentity:
      for (std::size_t i = 0; i < n; ++i) entries.push_back({i, i, 1.0});
      break;
    case AdjacencyMode::kAllOne:
      throw ParameterError("all_one adjacency has no sparse form");
  }
  return SparseMatrix(n, n, std::move(entries));
}

Matrix normalized_adjacency(const Graph& g, AdjacencyMode mode) {
  if (mode == AdjacencyMode::kAllOne) {
    const std::size_t n = g.num_nodes();
    return Matrix(n, n, n ? 1.0 / static_cast<double>(n) : 0.0);
  }
  return normalized_adjacency_sparse(g, mode).to_dense();
}

Graph knn_graph(const Matrix& features, std::size_t k) {
  const std::size_t n = features.rows();
  if (k >= n) {
    throw ParameterError("knn_graph: k=" + std::to_string(k) + " must be below N=" +
                         std::to_string(n));
  }
  std::vector<Graph::Edge> edges;
  edges.reserve(n * k);
  std::vector<std::pair<double, std::size_t>> dist;
  dist.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    dist.clear();
    for (std::size_t j = 0; j < n; ++j) {
      if (j != i) dist.emplace_back(squared_distance(features.row(i), features.row(j)), j);
    }
    // (distance, index) ordering gives the lower-index tiebreak.
    std::partial_sort(dist.begin(), dist.begin() + static_cast<std::ptrdiff_t>(k), dist.end());
    for (std::size_t r = 0; r < k; ++r) edges.emplace_back(i, dist[r].second);
  }
  return Graph(n, std::move(edges));
}

Graph erdos_renyi(std::size_t n, double p, std::uint64_t seed) {
  if (!(p >= 0.0 && p <= 1.0)) throw ParameterError("erdos_renyi: p must lie in [0, 1]");
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::vector<Graph::Edge> edges;
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j)
      if (unit(rng) < p) edges.emplace_back(i, j);
  return Graph(n, std::move(edges));
}

}  // namespace ecdiff
