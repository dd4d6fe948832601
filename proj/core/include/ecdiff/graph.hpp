#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "ecdiff/matrix.hpp"
#include "ecdiff/sparse.hpp"

namespace ecdiff {

// Undirected simple graph. Edges are stored once as (u, v) with u < v,
// sorted and deduplicated; self-loops are dropped on construction.
class Graph {
 public:
  using Edge = std::pair<std::size_t, std::size_t>;

  Graph() = default;
  Graph(std::size_t n, std::vector<Edge> edges);

  std::size_t num_nodes() const noexcept { return n_; }
  std::size_t num_edges() const noexcept { return edges_.size(); }
  const std::vector<Edge>& edges() const noexcept { return edges_; }
  const std::vector<std::size_t>& degrees() const noexcept { return degrees_; }
  // Sorted neighbor list of node i.
  const std::vector<std::size_t>& neighbors(std::size_t i) const { return adjacency_[i]; }
  bool has_edge(std::size_t u, std::size_t v) const;

  Matrix adjacency() const;
  bool connected() const;

  // Subgraph induced by `nodes`, relabelled 0..nodes.size()-1 in the given
  // order. Edges leaving the set are dropped.
  Graph induced_subgraph(const std::vector<std::size_t>& nodes) const;

 private:
  std::size_t n_ = 0;
  std::vector<Edge> edges_;
  std::vector<std::size_t> degrees_;
  std::vector<std::vector<std::size_t>> adjacency_;
};

enum class AdjacencyMode { kSym, kRow, kGin, kIdentity, kAllOne };

AdjacencyMode parse_adjacency_mode(std::string_view name);
std::string_view to_string(AdjacencyMode mode);

// sym: D^-1/2 A D^-1/2; row: D^-1 A; gin: A + I; identity: I;
// all_one: ones / N. Isolated nodes get all-zero rows in sym/row modes.
Matrix normalized_adjacency(const Graph& g, AdjacencyMode mode);
// Same as above for the modes with sparse structure (sym, row, gin, identity).
SparseMatrix normalized_adjacency_sparse(const Graph& g, AdjacencyMode mode);

// Symmetrized k-nearest-neighbor graph by Euclidean distance; ties go to the
// smaller node index.
Graph knn_graph(const Matrix& features, std::size_t k);

// G(n, p) with each pair drawn independently from a seeded generator.
Graph erdos_renyi(std::size_t n, double p, std::uint64_t seed);

}  // namespace ecdiff
