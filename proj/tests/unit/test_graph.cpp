#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>

#include "ecdiff/dataset.hpp"
#include "ecdiff/errors.hpp"
#include "ecdiff/graph.hpp"
#include "ecdiff/spectral.hpp"
#include "oracles.hpp"

using namespace ecdiff;

namespace {

Graph path3() { return Graph(3, {{0, 1}, {1, 2}}); }
Graph triangle() { return Graph(3, {{0, 1}, {1, 2}, {0, 2}}); }

}  // namespace

TEST(Graph, DeduplicatesAndDropsSelfLoops) {
  const Graph g(4, {{1, 0}, {0, 1}, {2, 2}, {3, 1}});
  EXPECT_EQ(g.num_edges(), 2u);
  EXPECT_EQ(g.degrees(), (std::vector<std::size_t>{1, 2, 0, 1}));
  EXPECT_TRUE(g.has_edge(1, 3));
  EXPECT_FALSE(g.has_edge(2, 2));
}

TEST(Graph, OutOfRangeEdgeRejected) {
  EXPECT_THROW(Graph(2, {{0, 2}}), Error);
}

TEST(Graph, InducedSubgraphDropsOutsideEdges) {
  const Graph g(4, {{0, 1}, {1, 2}, {2, 3}});
  const Graph sub = g.induced_subgraph({2, 1, 3});
  EXPECT_EQ(sub.num_nodes(), 3u);
  EXPECT_EQ(sub.edges(), (std::vector<Graph::Edge>{{0, 1}, {0, 2}}));
}

TEST(NormalizedAdjacency, PathSym) {
  const Matrix s = normalized_adjacency(path3(), AdjacencyMode::kSym);
  EXPECT_NEAR(s(0, 1), 1.0 / std::sqrt(2.0), 1e-15);
  EXPECT_NEAR(s(1, 2), 1.0 / std::sqrt(2.0), 1e-15);
  EXPECT_EQ(s(0, 2), 0.0);
}

TEST(NormalizedAdjacency, TriangleSym) {
  const Matrix s = normalized_adjacency(triangle(), AdjacencyMode::kSym);
  for (std::size_t i = 0; i < 3; ++i)
    for (std::size_t j = 0; j < 3; ++j) EXPECT_DOUBLE_EQ(s(i, j), i == j ? 0.0 : 0.5);
}

TEST(NormalizedAdjacency, IdentityMode) {
  EXPECT_EQ(normalized_adjacency(path3(), AdjacencyMode::kIdentity), Matrix::identity(3));
}

TEST(NormalizedAdjacency, OtherModes) {
  const Graph g = path3();
  const Matrix row = normalized_adjacency(g, AdjacencyMode::kRow);
  EXPECT_DOUBLE_EQ(row(1, 0), 0.5);
  EXPECT_DOUBLE_EQ(row(0, 1), 1.0);
  const Matrix gin = normalized_adjacency(g, AdjacencyMode::kGin);
  EXPECT_EQ(gin, add(g.adjacency(), Matrix::identity(3)));
  EXPECT_EQ(normalized_adjacency(g, AdjacencyMode::kAllOne), Matrix(3, 3, 1.0 / 3.0));
}

TEST(NormalizedAdjacency, IsolatedNodeRowIsZero) {
  const Graph g(3, {{0, 1}});
  for (auto mode : {AdjacencyMode::kSym, AdjacencyMode::kRow}) {
    const Matrix s = normalized_adjacency(g, mode);
    for (std::size_t j = 0; j < 3; ++j) EXPECT_EQ(s(2, j), 0.0);
  }
}

TEST(NormalizedAdjacency, SparseMatchesDense) {
  const Graph g = erdos_renyi(12, 0.3, 5);
  for (auto mode : {AdjacencyMode::kSym, AdjacencyMode::kRow, AdjacencyMode::kGin,
                    AdjacencyMode::kIdentity}) {
    EXPECT_EQ(normalized_adjacency_sparse(g, mode).to_dense(), normalized_adjacency(g, mode));
  }
}

TEST(NormalizedAdjacency, SymIsSymmetricWithZeroSmallestSingularValue) {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const Graph g = erdos_renyi(16, 0.3, seed);
    if (!g.connected()) continue;
    const Matrix s = normalized_adjacency(g, AdjacencyMode::kSym);
    EXPECT_EQ(s, transpose(s));
    // Row sums of sym-normalized adjacency are not 1, but the Laplacian built
    // from exact row sums still annihilates the ones vector.
    EXPECT_LE(laplacian_spectral_bracket(s).lambda_min, 1e-7);
  }
}

TEST(Knn, LinePoints) {
  const Graph g = knn_graph(Matrix{{0}, {1}, {10}}, 1);
  EXPECT_EQ(g.edges(), (std::vector<Graph::Edge>{{0, 1}, {1, 2}}));
}

TEST(Knn, FullNeighborhoodIsComplete) {
  const Graph g = knn_graph(oracle::uniform(6, 2, 3), 5);
  EXPECT_EQ(g.num_edges(), 15u);
}

TEST(Knn, TiesGoToLowerIndex) {
  // Node 0 is equidistant from 1 and 2; k = 1 picks node 1.
  const Graph g = knn_graph(Matrix{{0}, {1}, {-1}, {5}}, 1);
  EXPECT_TRUE(g.has_edge(0, 1));
  EXPECT_TRUE(g.has_edge(0, 2));  // 2 picks 0
  EXPECT_TRUE(g.has_edge(1, 0));
  // 0 and 2 both pick their lowest-index twin, node 1 picks 0.
  const Graph dup = knn_graph(Matrix{{0}, {0}, {0}}, 1);
  EXPECT_EQ(dup.edges(), (std::vector<Graph::Edge>{{0, 1}, {0, 2}}));
}

TEST(Knn, KTooLargeRejected) {
  EXPECT_THROW(knn_graph(Matrix(3, 2), 3), ParameterError);
}

TEST(Knn, PermutationEquivariant) {
  const Matrix x = oracle::uniform(15, 3, 8);
  std::vector<std::size_t> perm(15);
  std::iota(perm.begin(), perm.end(), 0);
  std::mt19937_64 rng(2);
  std::shuffle(perm.begin(), perm.end(), rng);
  Matrix px(15, 3);
  for (std::size_t i = 0; i < 15; ++i)
    for (std::size_t c = 0; c < 3; ++c) px(i, c) = x(perm[i], c);
  const Graph g = knn_graph(x, 3);
  const Graph pg = knn_graph(px, 3);
  std::set<Graph::Edge> mapped;
  for (const auto& [u, v] : pg.edges()) {
    mapped.insert({std::min(perm[u], perm[v]), std::max(perm[u], perm[v])});
  }
  EXPECT_EQ(mapped, std::set<Graph::Edge>(g.edges().begin(), g.edges().end()));
}

TEST(Sbm, DeterministicBlocksAreCliques) {
  SbmParams p;
  p.blocks = 2;
  p.per_block = 3;
  p.p_in = 1.0;
  p.p_out = 0.0;
  const Dataset d = sbm_generate(p);
  EXPECT_EQ(d.graph->edges(),
            (std::vector<Graph::Edge>{{0, 1}, {0, 2}, {1, 2}, {3, 4}, {3, 5}, {4, 5}}));
  EXPECT_EQ(d.labels, (std::vector<int>{0, 0, 0, 1, 1, 1}));
}

TEST(Sbm, ZeroProbabilitiesGiveNoEdges) {
  SbmParams p;
  p.p_in = 0.0;
  p.p_out = 0.0;
  EXPECT_EQ(sbm_generate(p).graph->num_edges(), 0u);
}

TEST(Sbm, EdgeCountWithinFourSigma) {
  SbmParams p;
  p.blocks = 1;
  p.per_block = 1000;
  p.p_in = 0.5;
  p.p_out = 0.0;
  const double pairs = 1000.0 * 999.0 / 2.0;
  const double sigma = std::sqrt(pairs * 0.25);
  const double edges = static_cast<double>(sbm_generate(p).graph->num_edges());
  EXPECT_LE(std::abs(edges - 0.5 * pairs), 4.0 * sigma);
}

TEST(Sbm, InvalidProbabilitiesRejected) {
  SbmParams p;
  p.p_in = 0.1;
  p.p_out = 0.2;
  EXPECT_THROW(sbm_generate(p), ParameterError);
  p.p_in = 1.5;
  EXPECT_THROW(sbm_generate(p), ParameterError);
}

TEST(Sbm, DeterministicPerSeed) {
  SbmParams p;
  p.seed = 17;
  const Dataset a = sbm_generate(p);
  const Dataset b = sbm_generate(p);
  EXPECT_EQ(a.features, b.features);
  EXPECT_EQ(a.graph->edges(), b.graph->edges());
  EXPECT_EQ(a.split, b.split);
  p.seed = 18;
  EXPECT_NE(sbm_generate(p).features, a.features);
}

TEST(Sbm, StratifiedSplitAndShiftedMeans) {
  SbmParams p;
  p.feat_shift = 3.0;
  const Dataset d = sbm_generate(p);
  d.validate();
  EXPECT_EQ(d.indices(Split::kTrain).size(), 20u);
  EXPECT_EQ(d.indices(Split::kVal).size(), 20u);
  EXPECT_EQ(d.indices(Split::kTest).size(), 160u);
  for (int c = 0; c < 2; ++c) {
    std::size_t train_in_class = 0;
    double mean_axis = 0.0;
    for (std::size_t i = 0; i < d.num_nodes(); ++i) {
      if (d.labels[i] != c) continue;
      train_in_class += d.split[i] == Split::kTrain;
      mean_axis += d.features(i, static_cast<std::size_t>(c)) / 100.0;
    }
    EXPECT_EQ(train_in_class, 10u);
    EXPECT_NEAR(mean_axis, 3.0, 0.5);
  }
}

TEST(Loader, FeaturesAndLabelsOnly) {
  const auto dir = oracle::scratch_dir("loader_plain");
  oracle::write_text(dir / "f.txt", "1 2\n3 4\n5 6\n");
  oracle::write_text(dir / "l.txt", "0\n1\n-1\n");
  const Dataset d = load_dataset(dir / "f.txt", dir / "l.txt");
  EXPECT_EQ(d.num_nodes(), 3u);
  EXPECT_FALSE(d.graph.has_value());
  EXPECT_EQ(d.split, std::vector<Split>(3, Split::kTest));
  EXPECT_EQ(d.labels[2], -1);
  EXPECT_EQ(d.num_classes(), 2u);
}

TEST(Loader, EdgeOutOfRangeNamesFileAndLine) {
  const auto dir = oracle::scratch_dir("loader_edges");
  oracle::write_text(dir / "f.txt", "1\n2\n3\n");
  oracle::write_text(dir / "l.txt", "0\n0\n1\n");
  oracle::write_text(dir / "e.txt", "0 1\n1 5\n");
  try {
    load_dataset(dir / "f.txt", dir / "l.txt", dir / "e.txt");
    FAIL() << "expected FormatError";
  } catch (const FormatError& e) {
    EXPECT_EQ(e.line(), 2u);
    EXPECT_NE(e.file().find("e.txt"), std::string::npos);
  }
}

TEST(Loader, RowCountMismatch) {
  const auto dir = oracle::scratch_dir("loader_mismatch");
  oracle::write_text(dir / "f.txt", "1\n2\n3\n");
  oracle::write_text(dir / "l.txt", "0\n0\n");
  EXPECT_THROW(load_dataset(dir / "f.txt", dir / "l.txt"), FormatError);
  oracle::write_text(dir / "g.txt", "1 2\n3\n");
  oracle::write_text(dir / "l2.txt", "0\n0\n");
  try {
    load_dataset(dir / "g.txt", dir / "l2.txt");
    FAIL() << "expected FormatError";
  } catch (const FormatError& e) {
    EXPECT_EQ(e.line(), 2u);
  }
}

TEST(Loader, BadSplitToken) {
  const auto dir = oracle::scratch_dir("loader_split");
  oracle::write_text(dir / "f.txt", "1\n2\n");
  oracle::write_text(dir / "l.txt", "0\n1\n");
  oracle::write_text(dir / "s.txt", "train\nholdout\n");
  EXPECT_THROW(load_dataset(dir / "f.txt", dir / "l.txt", std::nullopt, dir / "s.txt"),
               FormatError);
}

TEST(Loader, RoundTripThroughWriter) {
  SbmParams p;
  p.per_block = 10;
  const Dataset d = sbm_generate(p);
  const auto dir = oracle::scratch_dir("loader_roundtrip");
  write_dataset(d, dir);
  const Dataset back = load_dataset(dir / "features.txt", dir / "labels.txt",
                                    dir / "edges.txt", dir / "split.txt");
  EXPECT_EQ(back.features, d.features);
  EXPECT_EQ(back.labels, d.labels);
  EXPECT_EQ(back.split, d.split);
  EXPECT_EQ(back.graph->edges(), d.graph->edges());
}

TEST(Cora, AdapterMapsIdsAndClasses) {
  const auto dir = oracle::scratch_dir("cora");
  oracle::write_text(dir / "cora.content",
                     "31336 0 1 0 Neural_Networks\n"
                     "1061127 1 0 0 Rule_Learning\n"
                     "1106406 0 0 1 Neural_Networks\n");
  oracle::write_text(dir / "cora.cites", "31336 1061127\n1106406 31336\n");
  const Dataset d = load_cora(dir / "cora.content", dir / "cora.cites");
  EXPECT_EQ(d.num_nodes(), 3u);
  EXPECT_EQ(d.num_features(), 3u);
  EXPECT_EQ(d.labels, (std::vector<int>{0, 1, 0}));
  EXPECT_EQ(d.graph->edges(), (std::vector<Graph::Edge>{{0, 1}, {0, 2}}));
  oracle::write_text(dir / "bad.cites", "31336 999\n");
  EXPECT_THROW(load_cora(dir / "cora.content", dir / "bad.cites"), FormatError);
}

TEST(Cora, PerClassSplit) {
  SbmParams p;
  p.blocks = 3;
  p.per_block = 40;
  Dataset d = sbm_generate(p);
  assign_per_class_split(d, 5, 20, 30, 4);
  EXPECT_EQ(d.indices(Split::kTrain).size(), 15u);
  EXPECT_EQ(d.indices(Split::kVal).size(), 20u);
  EXPECT_EQ(d.indices(Split::kTest).size(), 30u);
  EXPECT_EQ(d.indices(Split::kUnused).size(), 55u);
  for (int c = 0; c < 3; ++c) {
    std::size_t n = 0;
    for (auto i : d.indices(Split::kTrain)) n += d.labels[i] == c;
    EXPECT_EQ(n, 5u);
  }
}
