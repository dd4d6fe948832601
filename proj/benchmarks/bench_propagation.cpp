#include <benchmark/benchmark.h>

#include "ecdiff/audit_suites.hpp"
#include "ecdiff/coupling.hpp"
#include "ecdiff/diffusion.hpp"
#include "ecdiff/model.hpp"

using namespace ecdiff;

namespace {

Matrix unit_features(std::size_t n, std::size_t d) {
  return row_l2_normalize(random_normal(n, d, n * 7 + d));
}

// Linear-time propagation with the simple penalty.
void BM_LinearSimple(benchmark::State& state) {
  const Matrix z = unit_features(state.range(0), 16);
  for (auto _ : state) benchmark::DoNotOptimize(linear_simple_propagate(z));
  state.SetComplexityN(state.range(0));
}

// The same product through an explicit N x N coupling.
void BM_DenseSimple(benchmark::State& state) {
  const Matrix z = unit_features(state.range(0), 16);
  const CouplingSpec spec{CouplingFamily::kAttention, PenaltyFamily{PenaltyKind::kSimple}, {}};
  for (auto _ : state) benchmark::DoNotOptimize(matmul(build_coupling(spec, z), z));
  state.SetComplexityN(state.range(0));
}

void BM_GcnEulerStep(benchmark::State& state) {
  const std::size_t n = state.range(0);
  const Graph g = connected_erdos_renyi(n, 8.0 / n, 1);
  const Matrix s = normalized_adjacency(g, AdjacencyMode::kSym);
  const Matrix z = unit_features(n, 16);
  for (auto _ : state) benchmark::DoNotOptimize(euler_step(z, s, 0.5));
}

void BM_ModelForward(benchmark::State& state) {
  ModelConfig cfg;
  cfg.input_dim = 8;
  cfg.output_dim = 2;
  cfg.layers = 2;
  cfg.variant = state.range(1) ? ModelVariant::kAdvanced : ModelVariant::kSimple;
  const auto ps = init_model(cfg, 0);
  const Matrix x = random_normal(state.range(0), 8, 3);
  for (auto _ : state) benchmark::DoNotOptimize(predict(ps, cfg, x));
}

}  // namespace

BENCHMARK(BM_LinearSimple)->RangeMultiplier(2)->Range(64, 2048)->Complexity();
BENCHMARK(BM_DenseSimple)->RangeMultiplier(2)->Range(64, 1024)->Complexity();
BENCHMARK(BM_GcnEulerStep)->Arg(128)->Arg(512);
BENCHMARK(BM_ModelForward)->Args({200, 0})->Args({200, 1});
BENCHMARK_MAIN();
