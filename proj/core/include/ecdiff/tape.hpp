#pragma once

#include <cstddef>
#include <functional>
#include <limits>
#include <map>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "ecdiff/matrix.hpp"
#include "ecdiff/sparse.hpp"

namespace ecdiff {

// Named trainable matrices plus their accumulated gradients. Iteration order
// is registration order, which keeps checkpoints and optimizer state stable.
class ParameterStore {
 public:
  void add(const std::string& name, Matrix value);
  bool contains(const std::string& name) const;

  Matrix& value(const std::string& name);
  const Matrix& value(const std::string& name) const;
  Matrix& grad(const std::string& name);
  const Matrix& grad(const std::string& name) const;

  void zero_grad();
  std::size_t size() const noexcept { return slots_.size(); }
  std::size_t scalar_count() const;
  const std::vector<std::string>& names() const noexcept { return names_; }

  friend bool operator==(const ParameterStore& a, const ParameterStore& b);

 private:
  struct Slot {
    Matrix value;
    Matrix grad;
  };
  std::size_t index(const std::string& name) const;

  std::vector<std::string> names_;
  std::vector<Slot> slots_;
  std::map<std::string, std::size_t> lookup_;
};

using GradientTable = std::map<std::string, Matrix>;

// Handle to a node recorded on a Tape.
struct Var {
  static constexpr std::size_t kNone = std::numeric_limits<std::size_t>::max();
  std::size_t id = kNone;
  bool valid() const noexcept { return id != kNone; }
};

// Append-only record of primitive operations for reverse-mode
// differentiation. Each node stores its eager value; backward() walks the
// nodes in reverse and accumulates gradients into the bound ParameterStore.
// A tape belongs to one thread for its whole lifetime.
class Tape {
 public:
  explicit Tape(ParameterStore* params = nullptr) : params_(params) {}

  Var constant(Matrix value);
  // Leaf bound to a registry slot; its gradient flows back into the store.
  Var param(const std::string& name);

  const Matrix& value(Var v) const;
  const Matrix& grad(Var v) const;
  std::size_t size() const noexcept { return nodes_.size(); }

  Var matmul(Var a, Var b);
  Var add(Var a, Var b);
  Var sub(Var a, Var b);
  Var scale(Var a, double s);
  Var add_scalar(Var a, double s);
  Var hadamard(Var a, Var b);
  Var sigmoid(Var a);
  Var relu(Var a);
  Var reciprocal(Var a);
  Var row_l2_normalize(Var a, double eps = kNormEps);
  // Per-row standardization without affine parameters.
  Var layer_norm(Var a, double eps = kLayerNormEps);
  Var row_softmax(Var a);
  Var mean(std::span<const Var> terms);
  Var transpose(Var a);
  // diag(column) * m, with column an N x 1 node.
  Var diag_scale_rows(Var m, Var column);
  // N x d -> N x 1
  Var row_sum(Var a);
  // 1 x d -> n x d
  Var broadcast_row(Var row, std::size_t n);
  Var sum_all(Var a);
  Var sparse_matmul(std::shared_ptr<const SparseMatrix> a, Var x);

  // Mean over `rows` of -log softmax(logits_i)[labels_i], log-sum-exp
  // stabilized. Produces a 1 x 1 node.
  Var softmax_cross_entropy(Var logits, std::span<const int> labels,
                            std::span<const std::size_t> rows);
  // Mean over `rows` and columns of (pred - target)^2. Produces 1 x 1.
  Var mean_squared_error(Var pred, const Matrix& target, std::span<const std::size_t> rows);

  // Reverse accumulation from a 1 x 1 loss node. Parameter gradients are
  // added into the bound store and also returned.
  GradientTable backward(Var loss);

 private:
  using BackwardFn = std::function<void(Tape&, std::size_t self)>;
  struct Node {
    Matrix value;
    Matrix grad;
    BackwardFn backward;
    std::string param_name;
  };

  Var push(Matrix value, BackwardFn fn);
  const Node& node(Var v) const;
  void accumulate(std::size_t id, const Matrix& g);

  ParameterStore* params_;
  std::vector<Node> nodes_;
};

}  // namespace ecdiff
