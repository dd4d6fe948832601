#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "ecdiff/graph.hpp"
#include "ecdiff/matrix.hpp"
#include "ecdiff/model.hpp"

namespace ecdiff {

// Outcome of one invariant suite. Gated checks land in `violations`;
// results that are only reported go to `notes`.
struct SuiteResult {
  std::string suite;
  std::size_t seeds = 0;
  // NaN when the suite sweeps several values.
  double lambda = 0.0;
  double tau = 0.0;
  std::vector<std::string> violations;
  double min_ratio = 0.0;
  double max_ratio = 0.0;
  double diversity_initial = 0.0;
  double diversity_final = 0.0;
  std::map<std::string, double> metrics;
  std::vector<std::string> notes;
  double seconds = 0.0;

  bool passed() const noexcept { return violations.empty(); }
};

// thm1, prop1, thm2, oversmooth, linear_equiv, gradcheck
const std::vector<std::string>& suite_names();
std::size_t default_seeds(std::string_view suite);

// Runs one suite, or every suite for "all". seeds = 0 picks the documented
// default. Seeds are spread over `jobs` threads and merged in seed order.
std::vector<SuiteResult> run_audit(std::string_view suite, std::size_t seeds = 0,
                                   std::size_t jobs = 1);

std::string to_json(const SuiteResult& r);

// Seeded helpers shared with tests.
Matrix random_normal(std::size_t rows, std::size_t cols, std::uint64_t seed);
// First connected draw of G(n, p) over a seed-derived sequence.
Graph connected_erdos_renyi(std::size_t n, double p, std::uint64_t seed);

struct GradCheck {
  // Per parameter: ||g_tape - g_fd||_F / max(||g_tape||_F, ||g_fd||_F, 1e-12).
  std::map<std::string, double> rel_error;
  double max_rel_error = 0.0;
};

// Cross-entropy loss of `cfg` on random inputs (N nodes, random labels,
// an ER graph when use_graph), tape gradients against central differences.
GradCheck check_model_gradients(const ModelConfig& cfg, std::size_t n, std::uint64_t seed,
                                double h = 1e-5);

}  // namespace ecdiff
