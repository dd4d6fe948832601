#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "ecdiff/graph.hpp"
#include "ecdiff/matrix.hpp"

namespace ecdiff {

// kUnused marks nodes held out of every fold (e.g. the Cora nodes left over
// after a 20-per-class/500/1000 draw).
enum class Split : std::uint8_t { kTrain, kVal, kTest, kUnused };

Split parse_split(std::string_view token);
std::string_view to_string(Split s);

// Node-level dataset. labels[i] == -1 marks an unlabeled node.
struct Dataset {
  Matrix features;
  std::vector<int> labels;
  std::vector<Split> split;
  std::optional<Graph> graph;
  // Regression targets (N x C); classification tasks leave this empty.
  std::optional<Matrix> targets;

  std::size_t num_nodes() const noexcept { return features.rows(); }
  std::size_t num_features() const noexcept { return features.cols(); }
  // 1 + largest label (0 when nothing is labeled).
  std::size_t num_classes() const;
  std::vector<std::size_t> indices(Split s) const;

  // Throws ContractError if the per-node arrays disagree with N or a label
  // is out of range.
  void validate() const;
};

struct SbmParams {
  std::size_t blocks = 2;
  std::size_t per_block = 100;
  double p_in = 0.2;
  double p_out = 0.02;
  std::size_t feat_dim = 8;
  double feat_shift = 0.5;
  std::uint64_t seed = 0;
};

// Stochastic-block-model graph with Gaussian features shifted per block and
// a stratified 10/10/80 train/val/test split.
Dataset sbm_generate(const SbmParams& params);

// Plain-text loaders. Missing edges -> no graph; missing split -> all test.
// Directed edge lists are symmetrized.
Dataset load_dataset(const std::filesystem::path& features_path,
                     const std::filesystem::path& labels_path,
                     const std::optional<std::filesystem::path>& edges_path = std::nullopt,
                     const std::optional<std::filesystem::path>& split_path = std::nullopt);

// Writes features.txt, labels.txt, split.txt and (when present) edges.txt.
void write_dataset(const Dataset& data, const std::filesystem::path& dir);

// Reads the Cora content/cites pair. Node order follows the content file,
// class indices follow first appearance. All nodes are tagged test until a
// split is assigned.
Dataset load_cora(const std::filesystem::path& content_path,
                  const std::filesystem::path& cites_path);

// Seeded semi-supervised split: `per_class` training nodes per class, then
// `val` and `test` nodes drawn from the remainder; the rest become kUnused.
void assign_per_class_split(Dataset& data, std::size_t per_class, std::size_t val,
                            std::size_t test, std::uint64_t seed);

}  // namespace ecdiff
