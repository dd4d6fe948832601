#include "ecdiff/diffusion.hpp"

#include <algorithm>
#include <cstdio>
#include <string>

#include "ecdiff/energy.hpp"
#include "ecdiff/errors.hpp"

namespace ecdiff {

void DiffusionConfig::validate() const {
  if (!(tau > 0.0 && tau <= 1.0)) {
    throw ParameterError("tau must lie in (0, 1], got " + std::to_string(tau));
  }
  if (steps == 0) throw ParameterError("steps must be at least 1");
  if (record_every == 0) throw ParameterError("record_every must be at least 1");
  if (!(beta >= 0.0)) throw ParameterError("beta must be non-negative");
}

namespace {

void check_step_shapes(const Matrix& z, const Matrix& s, const char* op) {
  if (s.rows() != s.cols() || s.rows() != z.rows()) {
    throw DimensionError(std::string(op) + ": coupling " + s.shape_string() +
                         " does not match embeddings " + z.shape_string());
  }
}

Matrix unit_rowsum_step(const Matrix& z, const Matrix& s, double tau) {
  check_step_shapes(z, s, "euler_step");
  return axpy(scale(z, 1.0 - tau), tau, matmul(s, z));
}

}  // namespace

Matrix euler_step(const Matrix& z, const Matrix& s, double tau) {
  check_step_shapes(z, s, "euler_step");
  const Matrix sz = matmul(s, z);
  const auto deg = row_sums(s);
  Matrix out(z.rows(), z.cols());
  for (std::size_t i = 0; i < z.rows(); ++i) {
    for (std::size_t c = 0; c < z.cols(); ++c) {
      out(i, c) = z(i, c) - tau * (deg[i] * z(i, c) - sz(i, c));
    }
  }
  return out;
}

Matrix euler_step_source(const Matrix& z, const Matrix& s, double tau, double beta,
                         const Matrix& h) {
  require_same_shape(z, h, "euler_step_source");
  return axpy(euler_step(z, s, tau), tau * beta, h);
}

Matrix graph_blended_step(const Matrix& z, const Matrix& s_attn, const Graph& g, double tau) {
  check_step_shapes(z, s_attn, "graph_blended_step");
  if (g.num_nodes() != z.rows()) {
    throw DimensionError("graph_blended_step: graph has " + std::to_string(g.num_nodes()) +
                         " nodes, embeddings " + z.shape_string());
  }
  return euler_step(z, add(s_attn, normalized_adjacency(g, AdjacencyMode::kSym)), 0.5 * tau);
}

Matrix linear_simple_propagate(const Matrix& z) {
  if (!rows_unit_norm(z, 1e-6)) {
    throw ContractError("linear_simple_propagate needs L2-normalized rows");
  }
  const std::size_t n = z.rows();
  const std::size_t d = z.cols();
  // sum_j z_j and sum_j z_j z_j^T
  std::vector<double> total(d, 0.0);
  Matrix outer(d, d);
  for (std::size_t j = 0; j < n; ++j) {
    auto zj = z.row(j);
    for (std::size_t a = 0; a < d; ++a) {
      total[a] += zj[a];
      for (std::size_t b = 0; b < d; ++b) outer(a, b) += zj[a] * zj[b];
    }
  }
  Matrix out(n, d);
  for (std::size_t i = 0; i < n; ++i) {
    auto zi = z.row(i);
    const double denom = static_cast<double>(n) + dot(zi, total);
    for (std::size_t a = 0; a < d; ++a) {
      out(i, a) = (total[a] + dot(outer.row(a), zi)) / denom;
    }
  }
  return out;
}

Trajectory run_trajectory(const Matrix& z0, const CouplingSpec& spec, const DiffusionConfig& cfg,
                          const Graph* g) {
  cfg.validate();
  spec.validate();
  if (cfg.graph_blend && !g) throw ParameterError("graph blending needs a graph");
  const bool attention = is_attention(spec.family);

  Trajectory traj;
  traj.config = cfg;
  traj.spec = spec;
  if (g) traj.graph = *g;

  Matrix z = attention ? row_l2_normalize(z0) : z0;
  if (cfg.beta > 0.0) {
    if (!traj.config.source) traj.config.source = z;
    require_same_shape(z, *traj.config.source, "run_trajectory source");
  }
  if (!attention) traj.static_coupling = build_coupling(spec, z, g);

  traj.snapshots.push_back({0, z});
  for (std::size_t k = 0; k < cfg.steps; ++k) {
    const Matrix s = attention ? build_coupling(spec, z, g) : *traj.static_coupling;
    const auto rs = row_sums(s);
    traj.min_row_sum.push_back(*std::min_element(rs.begin(), rs.end()));
    traj.max_row_sum.push_back(*std::max_element(rs.begin(), rs.end()));

    Matrix next;
    if (cfg.graph_blend) {
      next = graph_blended_step(z, s, *g, cfg.tau);
    } else if (cfg.unit_rowsum_form) {
      next = unit_rowsum_step(z, s, cfg.tau);
    } else {
      next = euler_step(z, s, cfg.tau);
    }
    if (cfg.beta > 0.0) next = axpy(next, cfg.tau * cfg.beta, *traj.config.source);
    if (attention) next = row_l2_normalize(next);
    z = std::move(next);

    const std::size_t step = k + 1;
    if (step % cfg.record_every == 0 || step == cfg.steps) traj.snapshots.push_back({step, z});
  }
  return traj;
}

void write_trajectory_csv(std::ostream& out, const Trajectory& traj, double lambda) {
  out << "step,energy,diversity,min_row_sum,max_row_sum\n";
  char buf[160];
  for (std::size_t idx = 0; idx < traj.snapshots.size(); ++idx) {
    const auto& snap = traj.snapshots[idx];
    const Matrix& prev = idx == 0 ? snap.z : traj.snapshots[idx - 1].z;
    const double e = trajectory_energy(traj, snap.z, prev, lambda);
    // Row sums describe the coupling applied at this step; the last
    // snapshot has none, so it repeats the previous step's values.
    const std::size_t k = std::min(snap.step, traj.min_row_sum.size() - 1);
    std::snprintf(buf, sizeof buf, "%zu,%.17g,%.17g,%.17g,%.17g\n", snap.step, e,
                  diversity(snap.z), traj.min_row_sum[k], traj.max_row_sum[k]);
    out << buf;
  }
}

}  // namespace ecdiff
