#pragma once

#include <cstddef>
#include <optional>
#include <ostream>
#include <vector>

#include "ecdiff/coupling.hpp"
#include "ecdiff/graph.hpp"
#include "ecdiff/matrix.hpp"

namespace ecdiff {

struct DiffusionConfig {
  double tau = 0.5;
  std::size_t steps = 1;
  // Source weight; the source term is applied when beta > 0.
  double beta = 0.0;
  // Source H. Defaults to Z^(0) when beta > 0 and this is empty.
  std::optional<Matrix> source;
  bool graph_blend = false;
  std::size_t record_every = 1;
  // Use (1 - tau) z_i + tau sum_j s_ij z_j, the unit-row-sum simplification,
  // instead of the exact 1 - tau sum_j s_ij conservation coefficient.
  bool unit_rowsum_form = false;

  // Throws ParameterError on tau outside (0, 1], steps or record_every 0,
  // or negative beta.
  void validate() const;
};

struct Snapshot {
  std::size_t step;
  Matrix z;
};

struct Trajectory {
  std::vector<Snapshot> snapshots;
  DiffusionConfig config;
  CouplingSpec spec;
  // The coupling reused by every step for static families.
  std::optional<Matrix> static_coupling;
  // Row-sum extremes of S^(k), one entry per step k = 0..K-1.
  std::vector<double> min_row_sum;
  std::vector<double> max_row_sum;
  // Observed graph used for static couplings and blending.
  std::optional<Graph> graph;
};

// Z' = Z - tau (diag(S 1) - S) Z
Matrix euler_step(const Matrix& z, const Matrix& s, double tau);
// euler_step + tau beta H
Matrix euler_step_source(const Matrix& z, const Matrix& s, double tau, double beta,
                         const Matrix& h);
// Euler step with weight tau/2 on the blended coupling S_attn + A~, where A~
// is the sym-normalized adjacency of g.
Matrix graph_blended_step(const Matrix& z, const Matrix& s_attn, const Graph& g, double tau);
// sum_j s_ij z_j for the simple attention family in O(N d^2), without
// forming S. Rows of z must be unit norm.
Matrix linear_simple_propagate(const Matrix& z);

// K steps of the dynamics selected by spec/cfg. Attention families rebuild
// S^(k) from the state, which is re-normalized after every step (and z0 is
// normalized on entry). Static families build S once.
Trajectory run_trajectory(const Matrix& z0, const CouplingSpec& spec, const DiffusionConfig& cfg,
                          const Graph* g = nullptr);

// Columns step, energy, diversity, min_row_sum, max_row_sum. The energy is
// the one audit_descent checks, evaluated as E(Z^(k), k-1) with lambda.
void write_trajectory_csv(std::ostream& out, const Trajectory& traj, double lambda);

}  // namespace ecdiff
