#pragma once

#include <cstddef>
#include <vector>

#include "ecdiff/coupling.hpp"
#include "ecdiff/diffusion.hpp"
#include "ecdiff/graph.hpp"
#include "ecdiff/matrix.hpp"
#include "ecdiff/spectral.hpp"

namespace ecdiff {

// ||Z - Z_prev||^2 + lambda sum_ij s_ij ||z_i - z_j||^2, pair sum taken term
// by term.
double quadratic_energy(const Matrix& z, const Matrix& z_prev, const Matrix& s, double lambda);
// The same pair sum through tr(Z^T (D_row + D_col - S - S^T) Z). Agrees with
// the pairwise form up to cancellation error, which dominates near consensus.
double dirichlet_trace(const Matrix& z, const Matrix& s);
// Gradient of quadratic_energy in Z: 2(Z - Z_prev) + 2 lambda (D_row + D_col - S - S^T) Z.
Matrix quadratic_energy_grad(const Matrix& z, const Matrix& z_prev, const Matrix& s,
                             double lambda);
// ||Z - (Z_prev + eta H)||^2 + lambda sum_ij s_ij ||z_i - z_j||^2
double source_energy(const Matrix& z, const Matrix& z_prev, const Matrix& s, double lambda,
                     double eta, const Matrix& h);
// ||Z - Z_prev||^2 + lambda sum_ij delta(||z_i - z_j||^2), i = j included.
double regularized_energy(const Matrix& z, const Matrix& z_prev, const PenaltyFamily& penalty,
                          double lambda);
// ||Z - Z_prev||^2 + lambda sum_ij [omega_ij ||z_i - z_j||^2 - conj(omega_ij)]
double surrogate_energy(const Matrix& z, const Matrix& z_prev, const Matrix& omega,
                        const PenaltyFamily& penalty, double lambda);
// ||Z - Z_prev||^2 + lambda/2 sum_ij delta(.) + lambda/2 sum_ij a~_ij ||z_i - z_j||^2
// with a~ the sym-normalized adjacency (both edge directions counted).
double graph_regularized_energy(const Matrix& z, const Matrix& z_prev,
                                const PenaltyFamily& penalty, const Graph& g, double lambda);
// sum_{i<j} ||z_i - z_j||^2
double diversity(const Matrix& z);

// The energy matching a trajectory's dynamics, E(z, k) with z_prev = Z^(k):
// quadratic for static couplings, regularized for attention, with the
// source shift eta = tau*beta and the graph-regularized form when blended.
double trajectory_energy(const Trajectory& traj, const Matrix& z, const Matrix& z_prev,
                         double lambda);

struct Violation {
  std::size_t step;
  double lhs;
  double rhs;
};

struct EnergyReport {
  double lambda = 0.0;
  double tau = 0.0;
  // E(Z^(k+1), k) for k = 0..K-1.
  std::vector<double> energies;
  // Descent audit: flag k-1 compares E(Z^(k+1), k) with E(Z^(k), k-1).
  std::vector<bool> descent;
  std::vector<Violation> violations;
  // Bound audit: E_{k+1} / E_k per step, with the bracket used.
  std::vector<double> ratios;
  double min_ratio = 0.0;
  double max_ratio = 0.0;
  SpectralBracket bracket;
  // Bound audit: steps skipped because E_k had already fallen below
  // kEnergyResolution * E_0.
  std::size_t unresolved = 0;
  // Diversity of every snapshot.
  std::vector<double> diversity;

  bool ok() const noexcept { return violations.empty(); }
};

inline constexpr double kDescentSlack = 1e-9;
inline constexpr double kBoundSlack = 1e-8;
// Below this fraction of the first energy the iterates' own rounding error
// dominates the step ratios.
inline constexpr double kEnergyResolution = 1e-12;

// Checks E(Z^(k+1), k) <= E(Z^(k), k-1) + slack * max(1, E(Z^(k), k-1)) for
// k = 1..K-1. Requires record_every = 1.
EnergyReport audit_descent(const Trajectory& traj, double lambda,
                           double slack = kDescentSlack);

// Checks (1 - tau l1)^2 E_k <= E_{k+1} <= (1 - tau l2)^2 E_k (relative slack
// kBoundSlack) on the quadratic energy of a static trajectory, where
// E_k = E(Z^(k+1), k). Requires tau <= 1/l1. Steps whose E_k is below
// resolution are counted in `unresolved` instead of checked.
EnergyReport audit_bounds(const Trajectory& traj, const Matrix& s, double lambda, double tau);

}  // namespace ecdiff
