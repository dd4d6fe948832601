#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <string_view>

#include "ecdiff/graph.hpp"
#include "ecdiff/matrix.hpp"
#include "ecdiff/tape.hpp"

namespace ecdiff {

// kMlp propagates with the identity coupling (P = V), the MLP row of the
// coupling taxonomy; it carries only value projections.
enum class ModelVariant { kSimple, kAdvanced, kMlp };
enum class Activation { kNone, kRelu };

ModelVariant parse_model_variant(std::string_view name);
std::string_view to_string(ModelVariant v);
Activation parse_activation(std::string_view name);
std::string_view to_string(Activation a);

struct ModelConfig {
  ModelVariant variant = ModelVariant::kSimple;
  std::size_t input_dim = 1;
  std::size_t hidden_dim = 16;
  std::size_t output_dim = 2;
  std::size_t layers = 1;
  std::size_t heads = 1;
  double tau = 0.5;
  bool use_graph = false;
  // false: K = Q = V = Z, no per-layer projections.
  bool use_feature_transform = true;
  // Adds tau * Z^(0) inside every propagation blend.
  bool use_source = false;
  Activation activation = Activation::kNone;

  // Throws ParameterError for zero counts or tau outside (0, 1].
  // tau = 0 is accepted as the no-mixing limit.
  void validate() const;
  friend bool operator==(const ModelConfig&, const ModelConfig&) = default;
};

// Parameter names used by the registry.
std::string input_weight_name();
std::string input_bias_name();
std::string projection_name(std::size_t layer, std::size_t head, char which);  // 'K', 'Q', 'V'
std::string output_weight_name();
std::string output_bias_name();

// Glorot-uniform weights, zero biases, deterministic per seed.
ParameterStore init_model(const ModelConfig& cfg, std::uint64_t seed);

// Exact number of scalars init_model registers.
std::size_t count_params(const ModelConfig& cfg);

// Records the forward pass on `tape` (which must be bound to the parameter
// store) and returns the N x C logits node. g is required iff use_graph.
Var forward(Tape& tape, const ModelConfig& cfg, const Matrix& x, const Graph* g = nullptr);

// Eager logits without a tape.
Matrix predict(const ParameterStore& params, const ModelConfig& cfg, const Matrix& x,
               const Graph* g = nullptr);

// Eager forward that materializes every N x N attention matrix.
Matrix reference_forward(const ParameterStore& params, const ModelConfig& cfg, const Matrix& x,
                         const Graph* g = nullptr);

// Row-normalized attention R A of one advanced-variant head, materialized.
Matrix advanced_attention(const Matrix& q_normed, const Matrix& k_normed);

struct CheckpointMeta {
  std::size_t epoch = 0;
  std::uint64_t seed = 0;
  std::string metric;
  std::map<std::string, double> values;
};

struct Checkpoint {
  ModelConfig config;
  ParameterStore params;
  CheckpointMeta meta;
};

// Throws ContractError when a registry slot is missing or mis-shaped.
void validate_params(const ModelConfig& cfg, const ParameterStore& params);

void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path);
// Throws FormatError on malformed JSON and ContractError on shape mismatch.
Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace ecdiff
