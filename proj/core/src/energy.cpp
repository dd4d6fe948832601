#include "ecdiff/energy.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "ecdiff/errors.hpp"

namespace ecdiff {

namespace {

void check_pair(const Matrix& z, const Matrix& z_prev, const char* op) {
  require_same_shape(z, z_prev, op);
}

void check_coupling(const Matrix& z, const Matrix& s, const char* op) {
  if (s.rows() != z.rows() || s.cols() != z.rows()) {
    throw DimensionError(std::string(op) + ": coupling " + s.shape_string() +
                         " does not match embeddings " + z.shape_string());
  }
}

// sum_ij s_ij ||z_i - z_j||^2 term by term. Every term is non-negative, so
// the sum keeps its relative accuracy as embeddings approach consensus.
double dirichlet_pairwise(const Matrix& z, const Matrix& s) {
  double total = 0.0;
  for (std::size_t i = 0; i < z.rows(); ++i) {
    for (std::size_t j = 0; j < z.rows(); ++j) {
      if (s(i, j) != 0.0) total += s(i, j) * squared_distance(z.row(i), z.row(j));
    }
  }
  return total;
}

double penalty_sum(const Matrix& z, const PenaltyFamily& penalty) {
  double total = 0.0;
  for (std::size_t i = 0; i < z.rows(); ++i) {
    for (std::size_t j = 0; j < z.rows(); ++j) {
      total += penalty_delta(penalty, squared_distance(z.row(i), z.row(j)));
    }
  }
  return total;
}

}  // namespace

double quadratic_energy(const Matrix& z, const Matrix& z_prev, const Matrix& s, double lambda) {
  check_pair(z, z_prev, "quadratic_energy");
  check_coupling(z, s, "quadratic_energy");
  return frobenius_sq(sub(z, z_prev)) + lambda * dirichlet_pairwise(z, s);
}

double dirichlet_trace(const Matrix& z, const Matrix& s) {
  check_coupling(z, s, "dirichlet_trace");
  const auto r = row_sums(s);
  const auto c = col_sums(s);
  const Matrix sz = matmul(s, z);
  double total = 0.0;
  for (std::size_t i = 0; i < z.rows(); ++i) {
    total += (r[i] + c[i]) * dot(z.row(i), z.row(i)) - 2.0 * dot(z.row(i), sz.row(i));
  }
  return total;
}

Matrix quadratic_energy_grad(const Matrix& z, const Matrix& z_prev, const Matrix& s,
                             double lambda) {
  check_pair(z, z_prev, "quadratic_energy_grad");
  check_coupling(z, s, "quadratic_energy_grad");
  const auto r = row_sums(s);
  const auto c = col_sums(s);
  const Matrix sym = add(matmul(s, z), matmul(transpose(s), z));
  Matrix g = scale(sub(z, z_prev), 2.0);
  for (std::size_t i = 0; i < z.rows(); ++i) {
    for (std::size_t a = 0; a < z.cols(); ++a) {
      g(i, a) += 2.0 * lambda * ((r[i] + c[i]) * z(i, a) - sym(i, a));
    }
  }
  return g;
}

double source_energy(const Matrix& z, const Matrix& z_prev, const Matrix& s, double lambda,
                     double eta, const Matrix& h) {
  check_pair(z, z_prev, "source_energy");
  require_same_shape(z, h, "source_energy");
  return quadratic_energy(z, axpy(z_prev, eta, h), s, lambda);
}

double regularized_energy(const Matrix& z, const Matrix& z_prev, const PenaltyFamily& penalty,
                          double lambda) {
  check_pair(z, z_prev, "regularized_energy");
  return frobenius_sq(sub(z, z_prev)) + lambda * penalty_sum(z, penalty);
}

double surrogate_energy(const Matrix& z, const Matrix& z_prev, const Matrix& omega,
                        const PenaltyFamily& penalty, double lambda) {
  check_pair(z, z_prev, "surrogate_energy");
  check_coupling(z, omega, "surrogate_energy");
  double total = 0.0;
  for (std::size_t i = 0; i < z.rows(); ++i) {
    for (std::size_t j = 0; j < z.rows(); ++j) {
      const double w = omega(i, j);
      total += w * squared_distance(z.row(i), z.row(j)) - penalty_conjugate(penalty, w);
    }
  }
  return frobenius_sq(sub(z, z_prev)) + lambda * total;
}

double graph_regularized_energy(const Matrix& z, const Matrix& z_prev,
                                const PenaltyFamily& penalty, const Graph& g, double lambda) {
  check_pair(z, z_prev, "graph_regularized_energy");
  if (g.num_nodes() != z.rows()) {
    throw DimensionError("graph_regularized_energy: graph has " +
                         std::to_string(g.num_nodes()) + " nodes, embeddings " +
                         z.shape_string());
  }
  const auto& deg = g.degrees();
  double edge_term = 0.0;
  for (const auto& [u, v] : g.edges()) {
    const double a = 1.0 / std::sqrt(static_cast<double>(deg[u]) * static_cast<double>(deg[v]));
    edge_term += 2.0 * a * squared_distance(z.row(u), z.row(v));
  }
  return frobenius_sq(sub(z, z_prev)) + 0.5 * lambda * penalty_sum(z, penalty) +
         0.5 * lambda * edge_term;
}

double diversity(const Matrix& z) {
  const std::size_t n = z.rows();
  if (n == 0) return 0.0;
  const auto totals = col_sums(z);
  double spread = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t a = 0; a < z.cols(); ++a) {
      const double dev = z(i, a) - totals[a] / static_cast<double>(n);
      spread += dev * dev;
    }
  }
  return static_cast<double>(n) * spread;
}

double trajectory_energy(const Trajectory& traj, const Matrix& z, const Matrix& z_prev,
                         double lambda) {
  const auto& cfg = traj.config;
  const Matrix anchor =
      cfg.beta > 0.0 ? axpy(z_prev, cfg.tau * cfg.beta, *cfg.source) : z_prev;
  if (is_attention(traj.spec.family)) {
    if (cfg.graph_blend) {
      return graph_regularized_energy(z, anchor, *traj.spec.penalty, *traj.graph, lambda);
    }
    return regularized_energy(z, anchor, *traj.spec.penalty, lambda);
  }
  if (cfg.graph_blend) {
    const Matrix blended =
        scale(add(*traj.static_coupling, normalized_adjacency(*traj.graph, AdjacencyMode::kSym)),
              0.5);
    return quadratic_energy(z, anchor, blended, lambda);
  }
  return quadratic_energy(z, anchor, *traj.static_coupling, lambda);
}

namespace {

void require_every_step(const Trajectory& traj, const char* who) {
  if (traj.config.record_every != 1 || traj.snapshots.size() != traj.config.steps + 1) {
    throw ContractError(std::string(who) + " needs a trajectory recorded at every step");
  }
}

std::vector<double> step_energies(const Trajectory& traj, double lambda) {
  std::vector<double> out;
  for (std::size_t k = 0; k + 1 < traj.snapshots.size(); ++k) {
    out.push_back(trajectory_energy(traj, traj.snapshots[k + 1].z, traj.snapshots[k].z, lambda));
  }
  return out;
}

}  // namespace

EnergyReport audit_descent(const Trajectory& traj, double lambda, double slack) {
  require_every_step(traj, "audit_descent");
  EnergyReport rep;
  rep.lambda = lambda;
  rep.tau = traj.config.tau;
  rep.energies = step_energies(traj, lambda);
  for (std::size_t k = 1; k < rep.energies.size(); ++k) {
    const double before = rep.energies[k - 1];
    const double after = rep.energies[k];
    const bool ok = after <= before + slack * std::max(1.0, std::abs(before));
    rep.descent.push_back(ok);
    if (!ok) rep.violations.push_back({k, after, before});
  }
  for (const auto& snap : traj.snapshots) rep.diversity.push_back(diversity(snap.z));
  return rep;
}

EnergyReport audit_bounds(const Trajectory& traj, const Matrix& s, double lambda, double tau) {
  require_every_step(traj, "audit_bounds");
  if (is_attention(traj.spec.family) || traj.config.beta > 0.0 || traj.config.graph_blend) {
    throw ContractError("audit_bounds needs a plain static-coupling trajectory");
  }
  EnergyReport rep;
  rep.lambda = lambda;
  rep.tau = tau;
  rep.bracket = laplacian_spectral_bracket(s);
  if (tau * rep.bracket.lambda_max > 1.0 + 1e-12) {
    throw ContractError("audit_bounds: tau = " + std::to_string(tau) + " exceeds 1/lambda_1 = " +
                        std::to_string(1.0 / rep.bracket.lambda_max));
  }
  for (std::size_t k = 0; k + 1 < traj.snapshots.size(); ++k) {
    rep.energies.push_back(
        quadratic_energy(traj.snapshots[k + 1].z, traj.snapshots[k].z, s, lambda));
  }
  const double lo = std::pow(1.0 - tau * rep.bracket.lambda_max, 2);
  const double hi = std::pow(1.0 - tau * rep.bracket.lambda_min, 2);
  rep.min_ratio = std::numeric_limits<double>::infinity();
  rep.max_ratio = -std::numeric_limits<double>::infinity();
  const double floor = rep.energies.empty() ? 0.0 : kEnergyResolution * rep.energies.front();
  for (std::size_t k = 1; k < rep.energies.size(); ++k) {
    const double before = rep.energies[k - 1];
    const double after = rep.energies[k];
    if (before <= floor) {
      ++rep.unresolved;
      continue;
    }
    const double margin = kBoundSlack * before;
    const bool ok = lo * before - margin <= after && after <= hi * before + margin;
    rep.descent.push_back(after <= before + margin);
    if (before > 0.0) {
      const double ratio = after / before;
      rep.ratios.push_back(ratio);
      rep.min_ratio = std::min(rep.min_ratio, ratio);
      rep.max_ratio = std::max(rep.max_ratio, ratio);
    }
    if (!ok) rep.violations.push_back({k, after, before});
  }
  if (rep.ratios.empty()) rep.min_ratio = rep.max_ratio = 1.0;
  for (const auto& snap : traj.snapshots) rep.diversity.push_back(diversity(snap.z));
  return rep;
}

}  // namespace ecdiff
