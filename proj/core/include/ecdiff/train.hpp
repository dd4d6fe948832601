#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <ostream>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "ecdiff/dataset.hpp"
#include "ecdiff/matrix.hpp"
#include "ecdiff/model.hpp"
#include "ecdiff/tape.hpp"

namespace ecdiff {

enum class LossKind { kCrossEntropy, kMse };
enum class MetricKind { kAccuracy, kRocAuc, kMse };

MetricKind parse_metric(std::string_view name);
std::string_view to_string(MetricKind m);
// Accuracy and ROC-AUC grow with quality, MSE shrinks.
bool higher_is_better(MetricKind m);

struct TrainConfig {
  double lr = 0.01;
  double weight_decay = 5e-4;
  std::size_t epochs = 200;
  // 0 = full batch
  std::size_t batch_size = 0;
  std::size_t patience = 50;
  std::uint64_t seed = 0;
  MetricKind metric = MetricKind::kAccuracy;

  void validate() const;
};

// Mean loss over the nodes in `mask`. Cross entropy reads `labels`, MSE
// reads `targets`.
Var loss(Tape& tape, LossKind kind, Var logits, std::span<const int> labels,
         const Matrix* targets, std::span<const std::size_t> mask);

struct AdamState {
  std::map<std::string, Matrix> m;
  std::map<std::string, Matrix> v;
  std::size_t t = 0;
};

inline constexpr double kAdamBeta1 = 0.9;
inline constexpr double kAdamBeta2 = 0.999;
inline constexpr double kAdamEps = 1e-8;

// Decoupled weight decay, then a bias-corrected Adam update from the
// gradients accumulated in `params`.
void adam_step(ParameterStore& params, AdamState& state, double lr, double weight_decay);

// Shuffled contiguous chunks, seeded by (seed, epoch). batch_size 0 or >= n
// yields one batch holding 0..n-1 in order.
std::vector<std::vector<std::size_t>> minibatch_partition(std::size_t n, std::size_t batch_size,
                                                          std::uint64_t seed, std::size_t epoch);

// Metric over the rows in `mask`. rocauc scores binary labels with the
// class-1 logit margin (or the single column when C = 1).
double metric(MetricKind kind, const Matrix& predictions, std::span<const int> labels,
              const Matrix* targets, std::span<const std::size_t> mask);

// Mann-Whitney ROC-AUC with tie midranks. Throws DomainError when only one
// class is present.
double roc_auc(std::span<const double> scores, std::span<const int> labels);

struct EpochRecord {
  std::size_t epoch;
  double train_loss;
  double val_metric;
  double test_metric;
};

struct TrainResult {
  Checkpoint best;
  std::vector<EpochRecord> history;
  std::size_t best_epoch = 0;
  double best_val = 0.0;
  double test_at_best = 0.0;
};

// Adam training with best-validation checkpointing (ties keep the earlier
// epoch) and early stopping after `patience` epochs without improvement.
TrainResult train_loop(const Dataset& data, const ModelConfig& model_cfg,
                       const TrainConfig& train_cfg);

// Columns epoch, train_loss, val_metric, test_metric.
void write_history_csv(std::ostream& out, const std::vector<EpochRecord>& history);

}  // namespace ecdiff
