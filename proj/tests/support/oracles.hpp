#pragma once

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>
#include <string>

#include <Eigen/Dense>

#include "ecdiff/coupling.hpp"
#include "ecdiff/graph.hpp"
#include "ecdiff/matrix.hpp"

namespace oracle {

using ecdiff::Matrix;

inline Eigen::MatrixXd to_eigen(const Matrix& m) {
  Eigen::MatrixXd e(m.rows(), m.cols());
  for (std::size_t i = 0; i < m.rows(); ++i)
    for (std::size_t j = 0; j < m.cols(); ++j) e(i, j) = m(i, j);
  return e;
}

inline Matrix from_eigen(const Eigen::MatrixXd& e) {
  Matrix m(e.rows(), e.cols());
  for (Eigen::Index i = 0; i < e.rows(); ++i)
    for (Eigen::Index j = 0; j < e.cols(); ++j) m(i, j) = e(i, j);
  return m;
}

inline double max_abs(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b) {
  return (a - b).cwiseAbs().maxCoeff();
}

inline Matrix uniform(std::size_t rows, std::size_t cols, std::uint64_t seed, double lo = -1.0,
                      double hi = 1.0) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> dist(lo, hi);
  Matrix m(rows, cols);
  for (auto& v : m.data()) v = dist(rng);
  return m;
}

inline Matrix unit_rows(std::size_t rows, std::size_t cols, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> dist;
  Eigen::MatrixXd e(rows, cols);
  for (Eigen::Index i = 0; i < e.rows(); ++i) {
    for (Eigen::Index j = 0; j < e.cols(); ++j) e(i, j) = dist(rng);
    e.row(i).normalize();
  }
  return from_eigen(e);
}

inline Matrix naive_matmul(const Matrix& a, const Matrix& b) {
  Matrix c(a.rows(), b.cols());
  for (std::size_t i = 0; i < a.rows(); ++i)
    for (std::size_t j = 0; j < b.cols(); ++j) {
      double s = 0.0;
      for (std::size_t k = 0; k < a.cols(); ++k) s += a(i, k) * b(k, j);
      c(i, j) = s;
    }
  return c;
}

// Symmetric non-negative coupling with zero diagonal.
inline Matrix random_symmetric_coupling(std::size_t n, std::uint64_t seed) {
  Matrix s = uniform(n, n, seed, 0.0, 1.0);
  for (std::size_t i = 0; i < n; ++i) {
    s(i, i) = 0.0;
    for (std::size_t j = 0; j < i; ++j) s(i, j) = s(j, i);
  }
  return s;
}

inline Eigen::MatrixXd laplacian(const Matrix& s) {
  const Eigen::MatrixXd e = to_eigen(s);
  Eigen::MatrixXd d = Eigen::MatrixXd::Zero(e.rows(), e.cols());
  d.diagonal() = e.rowwise().sum();
  return d - e;
}

// Per-pair attention coupling: omega_ij = f(||z_i - z_j||^2), row-normalized.
inline Matrix attention_loop(const Matrix& z, const ecdiff::PenaltyFamily& p) {
  const std::size_t n = z.rows();
  Matrix s(n, n);
  for (std::size_t i = 0; i < n; ++i) {
    double total = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
      double d2 = 0.0;
      for (std::size_t a = 0; a < z.cols(); ++a) d2 += (z(i, a) - z(j, a)) * (z(i, a) - z(j, a));
      s(i, j) = ecdiff::penalty_f(p, std::min(d2, 4.0));
      total += s(i, j);
    }
    for (std::size_t j = 0; j < n; ++j) s(i, j) /= total;
  }
  return s;
}

// ||Z - Zp||^2 + lambda sum_ij s_ij ||z_i - z_j||^2 by double loop.
inline double quadratic_energy_loop(const Matrix& z, const Matrix& zp, const Matrix& s,
                                    double lambda) {
  double fit = 0.0;
  for (std::size_t k = 0; k < z.size(); ++k) {
    const double d = z.data()[k] - zp.data()[k];
    fit += d * d;
  }
  double pen = 0.0;
  for (std::size_t i = 0; i < z.rows(); ++i)
    for (std::size_t j = 0; j < z.rows(); ++j) {
      double d2 = 0.0;
      for (std::size_t a = 0; a < z.cols(); ++a) d2 += (z(i, a) - z(j, a)) * (z(i, a) - z(j, a));
      pen += s(i, j) * d2;
    }
  return fit + lambda * pen;
}

inline double pair_diversity(const Matrix& z) {
  double total = 0.0;
  for (std::size_t i = 0; i < z.rows(); ++i)
    for (std::size_t j = i + 1; j < z.rows(); ++j)
      for (std::size_t a = 0; a < z.cols(); ++a) total += (z(i, a) - z(j, a)) * (z(i, a) - z(j, a));
  return total;
}

inline std::filesystem::path scratch_dir(const std::string& name) {
  auto dir = std::filesystem::temp_directory_path() / ("ecdiff_test_" + name);
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

inline void write_text(const std::filesystem::path& p, const std::string& content) {
  std::ofstream(p) << content;
}

inline std::string read_text(const std::filesystem::path& p) {
  std::ifstream in(p);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace oracle
