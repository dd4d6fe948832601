#pragma once

#include <cstddef>
#include <vector>

#include "ecdiff/matrix.hpp"

namespace ecdiff {

// Largest and smallest singular values of the Laplacian of a coupling.
struct SpectralBracket {
  double lambda_max = 0.0;
  double lambda_min = 0.0;
};

// Instances up to this size are solved with a dense Jacobi eigensolve;
// larger ones fall back to power iteration.
inline constexpr std::size_t kDenseSpectralLimit = 64;

// Delta = diag(row sums of s) - s.
Matrix coupling_laplacian(const Matrix& s);

// Eigenvalues of a symmetric matrix, ascending, by cyclic Jacobi rotations.
std::vector<double> symmetric_eigenvalues(const Matrix& a, double tol = 1e-14,
                                          int max_sweeps = 100);

// Largest eigenvalue of a symmetric PSD matrix by power iteration, stopped
// at relative change `tol` or `max_iter` iterations.
double power_iteration_max(const Matrix& a, double tol = 1e-9, int max_iter = 10000);

// Singular-value bracket of Delta = D~ - S. For symmetric S the singular
// values equal |eigenvalues| of Delta; otherwise they are square roots of
// the eigenvalues of Delta^T Delta.
SpectralBracket laplacian_spectral_bracket(const Matrix& s);

}  // namespace ecdiff
