#include "ecdiff/tape.hpp"

#include <algorithm>
#include <cmath>

#include "ecdiff/errors.hpp"

namespace ecdiff {

// ---------------------------------------------------------------------------
// ParameterStore

void ParameterStore::add(const std::string& name, Matrix value) {
  if (lookup_.count(name)) throw ParameterError("duplicate parameter name: " + name);
  lookup_.emplace(name, slots_.size());
  names_.push_back(name);
  Matrix grad(value.rows(), value.cols());
  slots_.push_back({std::move(value), std::move(grad)});
}

bool ParameterStore::contains(const std::string& name) const { return lookup_.count(name) > 0; }

std::size_t ParameterStore::index(const std::string& name) const {
  auto it = lookup_.find(name);
  if (it == lookup_.end()) throw ParameterError("unknown parameter: " + name);
  return it->second;
}

Matrix& ParameterStore::value(const std::string& name) { return slots_[index(name)].value; }
const Matrix& ParameterStore::value(const std::string& name) const {
  return slots_[index(name)].value;
}
Matrix& ParameterStore::grad(const std::string& name) { return slots_[index(name)].grad; }
const Matrix& ParameterStore::grad(const std::string& name) const {
  return slots_[index(name)].grad;
}

void ParameterStore::zero_grad() {
  for (auto& slot : slots_) slot.grad = Matrix(slot.value.rows(), slot.value.cols());
}

std::size_t ParameterStore::scalar_count() const {
  std::size_t n = 0;
  for (const auto& slot : slots_) n += slot.value.size();
  return n;
}

bool operator==(const ParameterStore& a, const ParameterStore& b) {
  if (a.names_ != b.names_) return false;
  for (std::size_t i = 0; i < a.slots_.size(); ++i)
    if (!(a.slots_[i].value == b.slots_[i].value)) return false;
  return true;
}

// ---------------------------------------------------------------------------
// Tape plumbing

Var Tape::push(Matrix value, BackwardFn fn) {
  nodes_.push_back({std::move(value), Matrix{}, std::move(fn), {}});
  return Var{nodes_.size() - 1};
}

const Tape::Node& Tape::node(Var v) const {
  if (!v.valid() || v.id >= nodes_.size()) throw ContractError("tape: invalid node handle");
  return nodes_[v.id];
}

const Matrix& Tape::value(Var v) const { return node(v).value; }
const Matrix& Tape::grad(Var v) const { return node(v).grad; }

void Tape::accumulate(std::size_t id, const Matrix& g) {
  Matrix& dst = nodes_[id].grad;
  if (dst.empty()) {
    dst = g;
    return;
  }
  auto d = dst.data();
  auto s = g.data();
  for (std::size_t i = 0; i < d.size(); ++i) d[i] += s[i];
}

Var Tape::constant(Matrix value) { return push(std::move(value), nullptr); }

Var Tape::param(const std::string& name) {
  if (params_ == nullptr) throw ContractError("tape: no parameter store bound");
  Var v = push(params_->value(name), nullptr);
  nodes_[v.id].param_name = name;
  return v;
}

// ---------------------------------------------------------------------------
// Primitives

Var Tape::matmul(Var a, Var b) {
  Matrix out = ecdiff::matmul(value(a), value(b));
  return push(std::move(out), [a, b](Tape& t, std::size_t self) {
    const Matrix& g = t.nodes_[self].grad;
    t.accumulate(a.id, ecdiff::matmul(g, ecdiff::transpose(t.nodes_[b.id].value)));
    t.accumulate(b.id, ecdiff::matmul(ecdiff::transpose(t.nodes_[a.id].value), g));
  });
}

Var Tape::add(Var a, Var b) {
  Matrix out = ecdiff::add(value(a), value(b));
  return push(std::move(out), [a, b](Tape& t, std::size_t self) {
    const Matrix g = t.nodes_[self].grad;
    t.accumulate(a.id, g);
    t.accumulate(b.id, g);
  });
}

Var Tape::sub(Var a, Var b) {
  Matrix out = ecdiff::sub(value(a), value(b));
  return push(std::move(out), [a, b](Tape& t, std::size_t self) {
    const Matrix g = t.nodes_[self].grad;
    t.accumulate(a.id, g);
    t.accumulate(b.id, ecdiff::scale(g, -1.0));
  });
}

Var Tape::scale(Var a, double s) {
  Matrix out = ecdiff::scale(value(a), s);
  return push(std::move(out), [a, s](Tape& t, std::size_t self) {
    t.accumulate(a.id, ecdiff::scale(t.nodes_[self].grad, s));
  });
}

Var Tape::add_scalar(Var a, double s) {
  Matrix out = value(a);
  for (double& v : out.data()) v += s;
  return push(std::move(out), [a](Tape& t, std::size_t self) {
    const Matrix g = t.nodes_[self].grad;
    t.accumulate(a.id, g);
  });
}

Var Tape::hadamard(Var a, Var b) {
  Matrix out = ecdiff::hadamard(value(a), value(b));
  return push(std::move(out), [a, b](Tape& t, std::size_t self) {
    const Matrix& g = t.nodes_[self].grad;
    t.accumulate(a.id, ecdiff::hadamard(g, t.nodes_[b.id].value));
    t.accumulate(b.id, ecdiff::hadamard(g, t.nodes_[a.id].value));
  });
}

Var Tape::sigmoid(Var a) {
  Matrix out = value(a);
  for (double& v : out.data()) {
    // Split by sign so exp never overflows.
    v = v >= 0.0 ? 1.0 / (1.0 + std::exp(-v)) : std::exp(v) / (1.0 + std::exp(v));
  }
  return push(std::move(out), [a](Tape& t, std::size_t self) {
    const Node& n = t.nodes_[self];
    Matrix g = n.grad;
    auto gd = g.data();
    auto y = n.value.data();
    for (std::size_t i = 0; i < gd.size(); ++i) gd[i] *= y[i] * (1.0 - y[i]);
    t.accumulate(a.id, g);
  });
}

Var Tape::relu(Var a) {
  Matrix out = value(a);
  for (double& v : out.data()) v = v > 0.0 ? v : 0.0;
  return push(std::move(out), [a](Tape& t, std::size_t self) {
    Matrix g = t.nodes_[self].grad;
    auto gd = g.data();
    auto x = t.nodes_[a.id].value.data();
    for (std::size_t i = 0; i < gd.size(); ++i)
      if (!(x[i] > 0.0)) gd[i] = 0.0;
    t.accumulate(a.id, g);
  });
}

Var Tape::reciprocal(Var a) {
  Matrix out = value(a);
  for (double& v : out.data()) {
    if (v == 0.0) throw DomainError("tape reciprocal: division by zero");
    v = 1.0 / v;
  }
  return push(std::move(out), [a](Tape& t, std::size_t self) {
    const Node& n = t.nodes_[self];
    Matrix g = n.grad;
    auto gd = g.data();
    auto y = n.value.data();
    for (std::size_t i = 0; i < gd.size(); ++i) gd[i] *= -y[i] * y[i];
    t.accumulate(a.id, g);
  });
}

Var Tape::row_l2_normalize(Var a, double eps) {
  const Matrix& x = value(a);
  Matrix out = ecdiff::row_l2_normalize(x, eps);
  std::vector<double> norms(x.rows());
  for (std::size_t i = 0; i < x.rows(); ++i) norms[i] = std::sqrt(dot(x.row(i), x.row(i)));
  return push(std::move(out), [a, eps, norms = std::move(norms)](Tape& t, std::size_t self) {
    const Node& n = t.nodes_[self];
    Matrix g(n.value.rows(), n.value.cols());
    for (std::size_t i = 0; i < g.rows(); ++i) {
      auto dy = n.grad.row(i);
      auto y = n.value.row(i);
      auto dx = g.row(i);
      if (norms[i] > eps) {
        const double proj = dot(y, dy);
        for (std::size_t j = 0; j < dx.size(); ++j) dx[j] = (dy[j] - y[j] * proj) / norms[i];
      } else {
        for (std::size_t j = 0; j < dx.size(); ++j) dx[j] = dy[j] / eps;
      }
    }
    t.accumulate(a.id, g);
  });
}

Var Tape::layer_norm(Var a, double eps) {
  const Matrix& x = value(a);
  Matrix out(x.rows(), x.cols());
  std::vector<double> inv_std(x.rows());
  const double d = static_cast<double>(x.cols());
  for (std::size_t i = 0; i < x.rows(); ++i) {
    auto r = x.row(i);
    double mean = 0.0;
    for (double v : r) mean += v;
    mean /= d;
    double var = 0.0;
    for (double v : r) var += (v - mean) * (v - mean);
    var /= d;
    inv_std[i] = 1.0 / std::sqrt(var + eps);
    auto o = out.row(i);
    for (std::size_t j = 0; j < r.size(); ++j) o[j] = (r[j] - mean) * inv_std[i];
  }
  return push(std::move(out), [a, inv_std = std::move(inv_std)](Tape& t, std::size_t self) {
    const Node& n = t.nodes_[self];
    Matrix g(n.value.rows(), n.value.cols());
    const double d = static_cast<double>(n.value.cols());
    for (std::size_t i = 0; i < g.rows(); ++i) {
      auto dy = n.grad.row(i);
      auto y = n.value.row(i);
      double mean_dy = 0.0;
      double mean_dy_y = 0.0;
      for (std::size_t j = 0; j < dy.size(); ++j) {
        mean_dy += dy[j];
        mean_dy_y += dy[j] * y[j];
      }
      mean_dy /= d;
      mean_dy_y /= d;
      auto dx = g.row(i);
      for (std::size_t j = 0; j < dx.size(); ++j)
        dx[j] = inv_std[i] * (dy[j] - mean_dy - y[j] * mean_dy_y);
    }
    t.accumulate(a.id, g);
  });
}

Var Tape::row_softmax(Var a) {
  const Matrix& x = value(a);
  Matrix out(x.rows(), x.cols());
  for (std::size_t i = 0; i < x.rows(); ++i) {
    auto r = x.row(i);
    const double m = *std::max_element(r.begin(), r.end());
    double z = 0.0;
    auto o = out.row(i);
    for (std::size_t j = 0; j < r.size(); ++j) {
      o[j] = std::exp(r[j] - m);
      z += o[j];
    }
    for (double& v : o) v /= z;
  }
  return push(std::move(out), [a](Tape& t, std::size_t self) {
    const Node& n = t.nodes_[self];
    Matrix g(n.value.rows(), n.value.cols());
    for (std::size_t i = 0; i < g.rows(); ++i) {
      auto dy = n.grad.row(i);
      auto y = n.value.row(i);
      const double proj = dot(dy, y);
      auto dx = g.row(i);
      for (std::size_t j = 0; j < dx.size(); ++j) dx[j] = y[j] * (dy[j] - proj);
    }
    t.accumulate(a.id, g);
  });
}

Var Tape::mean(std::span<const Var> terms) {
  if (terms.empty()) throw ContractError("tape mean: empty list");
  Matrix out = value(terms[0]);
  for (std::size_t k = 1; k < terms.size(); ++k) out = ecdiff::add(out, value(terms[k]));
  const double inv = 1.0 / static_cast<double>(terms.size());
  out = ecdiff::scale(out, inv);
  std::vector<Var> ids(terms.begin(), terms.end());
  return push(std::move(out), [ids = std::move(ids), inv](Tape& t, std::size_t self) {
    const Matrix g = ecdiff::scale(t.nodes_[self].grad, inv);
    for (Var v : ids) t.accumulate(v.id, g);
  });
}

Var Tape::transpose(Var a) {
  Matrix out = ecdiff::transpose(value(a));
  return push(std::move(out), [a](Tape& t, std::size_t self) {
    t.accumulate(a.id, ecdiff::transpose(t.nodes_[self].grad));
  });
}

Var Tape::diag_scale_rows(Var m, Var column) {
  const Matrix& x = value(m);
  const Matrix& c = value(column);
  if (c.cols() != 1 || c.rows() != x.rows()) {
    throw DimensionError("diag_scale_rows: scale " + c.shape_string() + " does not fit " +
                         x.shape_string());
  }
  Matrix out = x;
  for (std::size_t i = 0; i < out.rows(); ++i)
    for (double& v : out.row(i)) v *= c(i, 0);
  return push(std::move(out), [m, column](Tape& t, std::size_t self) {
    const Matrix& g = t.nodes_[self].grad;
    const Matrix& x = t.nodes_[m.id].value;
    const Matrix& c = t.nodes_[column.id].value;
    Matrix gx = g;
    Matrix gc(c.rows(), 1);
    for (std::size_t i = 0; i < g.rows(); ++i) {
      gc(i, 0) = dot(g.row(i), x.row(i));
      for (double& v : gx.row(i)) v *= c(i, 0);
    }
    t.accumulate(m.id, gx);
    t.accumulate(column.id, gc);
  });
}

Var Tape::row_sum(Var a) {
  Matrix out = Matrix::column(row_sums(value(a)));
  return push(std::move(out), [a](Tape& t, std::size_t self) {
    const Matrix& g = t.nodes_[self].grad;
    const Matrix& x = t.nodes_[a.id].value;
    Matrix gx(x.rows(), x.cols());
    for (std::size_t i = 0; i < gx.rows(); ++i)
      for (double& v : gx.row(i)) v = g(i, 0);
    t.accumulate(a.id, gx);
  });
}

Var Tape::broadcast_row(Var row, std::size_t n) {
  const Matrix& r = value(row);
  if (r.rows() != 1) throw DimensionError("broadcast_row: expected 1 x d, got " + r.shape_string());
  Matrix out(n, r.cols());
  for (std::size_t i = 0; i < n; ++i) std::copy(r.row(0).begin(), r.row(0).end(), out.row(i).begin());
  return push(std::move(out), [row](Tape& t, std::size_t self) {
    const Matrix& g = t.nodes_[self].grad;
    Matrix gr(1, g.cols());
    for (std::size_t i = 0; i < g.rows(); ++i)
      for (std::size_t j = 0; j < g.cols(); ++j) gr(0, j) += g(i, j);
    t.accumulate(row.id, gr);
  });
}

Var Tape::sum_all(Var a) {
  double acc = 0.0;
  for (double v : value(a).data()) acc += v;
  return push(Matrix(1, 1, acc), [a](Tape& t, std::size_t self) {
    const Matrix& x = t.nodes_[a.id].value;
    t.accumulate(a.id, Matrix(x.rows(), x.cols(), t.nodes_[self].grad(0, 0)));
  });
}

Var Tape::sparse_matmul(std::shared_ptr<const SparseMatrix> a, Var x) {
  if (!a) throw ContractError("sparse_matmul: null matrix");
  Matrix out = a->apply(value(x));
  return push(std::move(out), [a = std::move(a), x](Tape& t, std::size_t self) {
    t.accumulate(x.id, a->apply_transpose(t.nodes_[self].grad));
  });
}

Var Tape::softmax_cross_entropy(Var logits, std::span<const int> labels,
                                std::span<const std::size_t> rows) {
  if (rows.empty()) throw ContractError("cross entropy: mask selects no nodes");
  const Matrix& z = value(logits);
  if (labels.size() != z.rows()) {
    throw DimensionError("cross entropy: " + std::to_string(labels.size()) + " labels for " +
                         z.shape_string() + " logits");
  }
  Matrix probs(z.rows(), z.cols());
  double loss = 0.0;
  for (std::size_t r : rows) {
    const int y = labels[r];
    if (y < 0 || static_cast<std::size_t>(y) >= z.cols()) {
      throw ContractError("cross entropy: node " + std::to_string(r) + " has label " +
                          std::to_string(y) + " outside [0," + std::to_string(z.cols()) + ")");
    }
    auto row = z.row(r);
    const double m = *std::max_element(row.begin(), row.end());
    double sum = 0.0;
    for (double v : row) sum += std::exp(v - m);
    const double lse = m + std::log(sum);
    loss += lse - row[static_cast<std::size_t>(y)];
    auto p = probs.row(r);
    for (std::size_t j = 0; j < row.size(); ++j) p[j] = std::exp(row[j] - lse);
  }
  const double inv = 1.0 / static_cast<double>(rows.size());
  std::vector<std::size_t> kept(rows.begin(), rows.end());
  std::vector<int> labs(labels.begin(), labels.end());
  return push(Matrix(1, 1, loss * inv),
              [logits, probs = std::move(probs), kept = std::move(kept), labs = std::move(labs),
               inv](Tape& t, std::size_t self) {
                const double g = t.nodes_[self].grad(0, 0) * inv;
                Matrix gz(probs.rows(), probs.cols());
                for (std::size_t r : kept) {
                  auto dst = gz.row(r);
                  auto p = probs.row(r);
                  for (std::size_t j = 0; j < dst.size(); ++j) dst[j] += g * p[j];
                  dst[static_cast<std::size_t>(labs[r])] -= g;
                }
                t.accumulate(logits.id, gz);
              });
}

Var Tape::mean_squared_error(Var pred, const Matrix& target, std::span<const std::size_t> rows) {
  if (rows.empty()) throw ContractError("mse: mask selects no nodes");
  const Matrix& p = value(pred);
  require_same_shape(p, target, "mean_squared_error");
  double acc = 0.0;
  for (std::size_t r : rows) acc += squared_distance(p.row(r), target.row(r));
  const double inv = 1.0 / static_cast<double>(rows.size() * std::max<std::size_t>(p.cols(), 1));
  std::vector<std::size_t> kept(rows.begin(), rows.end());
  return push(Matrix(1, 1, acc * inv),
              [pred, target, kept = std::move(kept), inv](Tape& t, std::size_t self) {
                const double g = t.nodes_[self].grad(0, 0) * inv;
                const Matrix& p = t.nodes_[pred.id].value;
                Matrix gp(p.rows(), p.cols());
                for (std::size_t r : kept) {
                  auto dst = gp.row(r);
                  auto pr = p.row(r);
                  auto tr = target.row(r);
                  for (std::size_t j = 0; j < dst.size(); ++j) dst[j] += 2.0 * g * (pr[j] - tr[j]);
                }
                t.accumulate(pred.id, gp);
              });
}

// ---------------------------------------------------------------------------

GradientTable Tape::backward(Var loss) {
  const Matrix& l = node(loss).value;
  if (l.rows() != 1 || l.cols() != 1) {
    throw ContractError("tape backward: loss must be 1x1, got " + l.shape_string());
  }
  for (auto& n : nodes_) n.grad = Matrix{};
  nodes_[loss.id].grad = Matrix(1, 1, 1.0);
  for (std::size_t k = loss.id + 1; k-- > 0;) {
    Node& n = nodes_[k];
    if (n.grad.empty() || !n.backward) continue;
    n.backward(*this, k);
  }

  GradientTable table;
  for (const auto& n : nodes_) {
    if (n.param_name.empty()) continue;
    Matrix g = n.grad.empty() ? Matrix(n.value.rows(), n.value.cols()) : n.grad;
    if (params_) {
      Matrix& dst = params_->grad(n.param_name);
      dst = ecdiff::add(dst, g);
    }
    auto it = table.find(n.param_name);
    if (it == table.end()) {
      table.emplace(n.param_name, std::move(g));
    } else {
      it->second = ecdiff::add(it->second, g);
    }
  }
  return table;
}

}  // namespace ecdiff
