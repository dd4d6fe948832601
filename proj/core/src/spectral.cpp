#include "ecdiff/spectral.hpp"

#include <algorithm>
#include <cmath>

#include "ecdiff/errors.hpp"

namespace ecdiff {

namespace {

bool exactly_symmetric(const Matrix& m) {
  for (std::size_t i = 0; i < m.rows(); ++i)
    for (std::size_t j = i + 1; j < m.cols(); ++j)
      if (m(i, j) != m(j, i)) return false;
  return true;
}

double off_diagonal_norm_sq(const Matrix& a) {
  double acc = 0.0;
  for (std::size_t i = 0; i < a.rows(); ++i)
    for (std::size_t j = 0; j < a.cols(); ++j)
      if (i != j) acc += a(i, j) * a(i, j);
  return acc;
}

}  // namespace

Matrix coupling_laplacian(const Matrix& s) {
  if (s.rows() != s.cols()) {
    throw DimensionError("coupling_laplacian: coupling must be square, got " + s.shape_string());
  }
  Matrix delta = scale(s, -1.0);
  const auto deg = row_sums(s);
  for (std::size_t i = 0; i < s.rows(); ++i) delta(i, i) += deg[i];
  return delta;
}

std::vector<double> symmetric_eigenvalues(const Matrix& input, double tol, int max_sweeps) {
  if (input.rows() != input.cols()) {
    throw DimensionError("symmetric_eigenvalues: matrix must be square, got " +
                         input.shape_string());
  }
  Matrix a = input;
  const std::size_t n = a.rows();
  const double scale_ref = std::max(frobenius_sq(a), 1e-300);
  for (int sweep = 0; sweep < max_sweeps; ++sweep) {
    if (off_diagonal_norm_sq(a) <= tol * tol * scale_ref) break;
    for (std::size_t p = 0; p + 1 < n; ++p) {
      for (std::size_t q = p + 1; q < n; ++q) {
        const double apq = a(p, q);
        if (apq == 0.0) continue;
        const double theta = (a(q, q) - a(p, p)) / (2.0 * apq);
        const double t = (theta >= 0.0 ? 1.0 : -1.0) /
                         (std::abs(theta) + std::sqrt(theta * theta + 1.0));
        const double c = 1.0 / std::sqrt(t * t + 1.0);
        const double s = t * c;
        for (std::size_t k = 0; k < n; ++k) {
          const double akp = a(k, p);
          const double akq = a(k, q);
          a(k, p) = c * akp - s * akq;
          a(k, q) = s * akp + c * akq;
        }
        for (std::size_t k = 0; k < n; ++k) {
          const double apk = a(p, k);
          const double aqk = a(q, k);
          a(p, k) = c * apk - s * aqk;
          a(q, k) = s * apk + c * aqk;
        }
      }
    }
  }
  std::vector<double> eig(n);
  for (std::size_t i = 0; i < n; ++i) eig[i] = a(i, i);
  std::sort(eig.begin(), eig.end());
  return eig;
}

double power_iteration_max(const Matrix& a, double tol, int max_iter) {
  const std::size_t n = a.rows();
  if (n == 0) return 0.0;
  // Deterministic, non-degenerate start vector.
  Matrix v(n, 1);
  for (std::size_t i = 0; i < n; ++i) v(i, 0) = 1.0 + 0.01 * static_cast<double>(i % 7);
  v = scale(v, 1.0 / std::sqrt(frobenius_sq(v)));
  double estimate = 0.0;
  for (int it = 0; it < max_iter; ++it) {
    Matrix w = matmul(a, v);
    const double norm = std::sqrt(frobenius_sq(w));
    if (norm == 0.0) return 0.0;
    const double next = dot(v.data(), w.data());
    v = scale(w, 1.0 / norm);
    if (it > 0 && std::abs(next - estimate) <= tol * std::max(std::abs(next), 1e-300)) {
      return next;
    }
    estimate = next;
  }
  return estimate;
}

SpectralBracket laplacian_spectral_bracket(const Matrix& s) {
  if (s.rows() != s.cols()) {
    throw DimensionError("laplacian_spectral_bracket: coupling must be square, got " +
                         s.shape_string());
  }
  const Matrix delta = coupling_laplacian(s);
  const std::size_t n = s.rows();
  if (n == 0) return {};
  const bool symmetric = exactly_symmetric(delta);

  SpectralBracket out;
  if (n <= kDenseSpectralLimit) {
    if (symmetric) {
      auto eig = symmetric_eigenvalues(delta);
      double lo = std::abs(eig.front());
      double hi = lo;
      for (double e : eig) {
        lo = std::min(lo, std::abs(e));
        hi = std::max(hi, std::abs(e));
      }
      out.lambda_max = hi;
      out.lambda_min = lo;
    } else {
      auto eig = symmetric_eigenvalues(matmul(transpose(delta), delta));
      out.lambda_min = std::sqrt(std::max(eig.front(), 0.0));
      out.lambda_max = std::sqrt(std::max(eig.back(), 0.0));
    }
  } else {
    const Matrix gram = matmul(transpose(delta), delta);
    const double top = power_iteration_max(gram);
    out.lambda_max = std::sqrt(std::max(top, 0.0));
    // Smallest eigenvalue of the Gram matrix via the spectrum-flipping shift
    // c*I - gram; accuracy is limited to ~sqrt(tol) * lambda_max.
    Matrix shifted = scale(gram, -1.0);
    const double c = top * (1.0 + 1e-6);
    for (std::size_t i = 0; i < n; ++i) shifted(i, i) += c;
    const double flipped = power_iteration_max(shifted);
    out.lambda_min = std::sqrt(std::max(c - flipped, 0.0));
  }
  out.lambda_min = std::min(out.lambda_min, out.lambda_max);
  return out;
}

}  // namespace ecdiff
