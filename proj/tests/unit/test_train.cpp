#include <gtest/gtest.h>

#include <cmath>
#include <set>
#include <sstream>

#include "ecdiff/errors.hpp"
#include "ecdiff/train.hpp"
#include "oracles.hpp"

using namespace ecdiff;

namespace {

double scalar_loss(LossKind kind, const Matrix& logits, const std::vector<int>& labels,
                   const Matrix* targets, const std::vector<std::size_t>& mask) {
  Tape t;
  return t.value(loss(t, kind, t.constant(logits), labels, targets, mask))(0, 0);
}

// Two Gaussian blobs far apart on the first axis, no graph.
Dataset separable(std::size_t n, std::uint64_t seed) {
  Dataset d;
  d.features = oracle::uniform(n, 3, seed, -0.5, 0.5);
  for (std::size_t i = 0; i < n; ++i) {
    const int label = static_cast<int>(i % 2);
    d.labels.push_back(label);
    d.features(i, 0) += label ? 3.0 : -3.0;
    d.split.push_back(i % 5 == 0 ? Split::kVal : (i % 5 == 1 ? Split::kTest : Split::kTrain));
  }
  return d;
}

ModelConfig mlp_config() {
  ModelConfig cfg;
  cfg.variant = ModelVariant::kMlp;
  cfg.input_dim = 3;
  cfg.hidden_dim = 8;
  cfg.output_dim = 2;
  return cfg;
}

}  // namespace

TEST(Loss, ConfidentCorrectIsZero) {
  Matrix logits(3, 4);
  const std::vector<int> labels{1, 3, 0};
  for (std::size_t i = 0; i < 3; ++i) logits(i, labels[i]) = 1e6;
  EXPECT_NEAR(scalar_loss(LossKind::kCrossEntropy, logits, labels, nullptr, {0, 1, 2}), 0.0,
              1e-12);
}

TEST(Loss, UniformLogitsGiveLogC) {
  EXPECT_NEAR(scalar_loss(LossKind::kCrossEntropy, Matrix(4, 5, 0.3), {0, 1, 2, 3}, nullptr,
                          {0, 2, 3}),
              std::log(5.0), 1e-14);
}

TEST(Loss, MseOfIdenticalIsZero) {
  const Matrix p = oracle::uniform(4, 2, 1);
  EXPECT_EQ(scalar_loss(LossKind::kMse, p, {}, &p, {0, 1, 3}), 0.0);
  const Matrix target{{1, 3}};
  EXPECT_NEAR(scalar_loss(LossKind::kMse, Matrix(1, 2), {}, &target, {0}), 5.0, 1e-15);
}

TEST(Loss, EmptyMaskRejected) {
  EXPECT_THROW(scalar_loss(LossKind::kCrossEntropy, Matrix(2, 2), {0, 1}, nullptr, {}),
               ContractError);
}

TEST(Adam, ZeroGradientZeroDecayIsNoop) {
  ParameterStore ps;
  ps.add("w", oracle::uniform(2, 3, 2));
  const Matrix before = ps.value("w");
  AdamState st;
  adam_step(ps, st, 0.1, 0.0);
  EXPECT_EQ(ps.value("w"), before);
  EXPECT_EQ(st.t, 1u);
}

TEST(Adam, FirstStepIsLrTimesSign) {
  ParameterStore ps;
  ps.add("w", Matrix{{1.0, -2.0, 0.5}});
  ps.grad("w") = Matrix{{0.3, -4.0, 1e-3}};
  AdamState st;
  adam_step(ps, st, 0.01, 0.0);
  const Matrix& w = ps.value("w");
  EXPECT_NEAR(w(0, 0), 1.0 - 0.01, 1e-9);
  EXPECT_NEAR(w(0, 1), -2.0 + 0.01, 1e-9);
  EXPECT_NEAR(w(0, 2), 0.5 - 0.01, 1e-7);
}

TEST(Adam, SecondStepFollowsRecurrence) {
  ParameterStore ps;
  ps.add("w", Matrix{{0.0}});
  AdamState st;
  ps.grad("w") = Matrix{{1.0}};
  adam_step(ps, st, 0.1, 0.0);
  ps.grad("w") = Matrix{{-2.0}};
  adam_step(ps, st, 0.1, 0.0);
  const double w1 = -0.1 / (1.0 + 1e-8);
  const double m = 0.9 * 0.1 + 0.1 * -2.0;
  const double v = 0.999 * 0.001 + 0.001 * 4.0;
  const double mhat = m / (1 - 0.81);
  const double vhat = v / (1 - 0.999 * 0.999);
  EXPECT_NEAR(ps.value("w")(0, 0), w1 - 0.1 * mhat / (std::sqrt(vhat) + 1e-8), 1e-12);
}

TEST(Adam, PureDecayShrinks) {
  ParameterStore ps;
  ps.add("w", Matrix{{2.0, -4.0}});
  AdamState st;
  adam_step(ps, st, 0.1, 0.5);
  EXPECT_NEAR(ps.value("w")(0, 0), 2.0 * 0.95, 1e-15);
  EXPECT_NEAR(ps.value("w")(0, 1), -4.0 * 0.95, 1e-15);
}

TEST(Partition, SizesAndCoverage) {
  const auto b = minibatch_partition(5, 2, 1, 0);
  ASSERT_EQ(b.size(), 3u);
  EXPECT_EQ(b[0].size(), 2u);
  EXPECT_EQ(b[1].size(), 2u);
  EXPECT_EQ(b[2].size(), 1u);
  std::set<std::size_t> all;
  for (const auto& batch : b) all.insert(batch.begin(), batch.end());
  EXPECT_EQ(all, (std::set<std::size_t>{0, 1, 2, 3, 4}));
}

TEST(Partition, FullBatch) {
  EXPECT_EQ(minibatch_partition(4, 0, 3, 7),
            (std::vector<std::vector<std::size_t>>{{0, 1, 2, 3}}));
}

TEST(Partition, DeterministicAndEpochDependent) {
  EXPECT_EQ(minibatch_partition(50, 7, 3, 2), minibatch_partition(50, 7, 3, 2));
  EXPECT_NE(minibatch_partition(50, 7, 3, 2), minibatch_partition(50, 7, 3, 3));
}

TEST(Partition, DisjointAndExhaustive) {
  for (std::size_t n = 1; n <= 30; ++n) {
    for (std::size_t b = 1; b <= n; ++b) {
      std::vector<int> seen(n, 0);
      for (const auto& batch : minibatch_partition(n, b, n * 31 + b, 0)) {
        EXPECT_LE(batch.size(), b);
        for (auto i : batch) ++seen[i];
      }
      for (int s : seen) EXPECT_EQ(s, 1);
    }
  }
}

TEST(Metric, RocAucHandExample) {
  const std::vector<double> scores{0.1, 0.4, 0.35, 0.8};
  const std::vector<int> labels{0, 0, 1, 1};
  EXPECT_DOUBLE_EQ(roc_auc(scores, labels), 0.75);
}

TEST(Metric, RocAucSeparatedAndTied) {
  EXPECT_EQ(roc_auc(std::vector<double>{0.1, 0.2, 0.9}, std::vector<int>{0, 0, 1}), 1.0);
  EXPECT_EQ(roc_auc(std::vector<double>{0.5, 0.5}, std::vector<int>{0, 1}), 0.5);
  EXPECT_THROW(roc_auc(std::vector<double>{0.1, 0.2}, std::vector<int>{1, 1}), DomainError);
}

TEST(Metric, AccuracyAndMse) {
  const Matrix logits{{2, 1}, {0, 3}, {5, 1}};
  const std::vector<int> labels{0, 1, 1};
  EXPECT_DOUBLE_EQ(metric(MetricKind::kAccuracy, logits, labels, nullptr,
                          std::vector<std::size_t>{0, 1}),
                   1.0);
  EXPECT_NEAR(metric(MetricKind::kAccuracy, logits, labels, nullptr,
                     std::vector<std::size_t>{0, 1, 2}),
              2.0 / 3.0, 1e-15);
  const Matrix target{{2, 1}, {1, 3}, {5, 1}};
  EXPECT_NEAR(metric(MetricKind::kMse, logits, {}, &target, std::vector<std::size_t>{0, 1, 2}),
              1.0 / 6.0, 1e-15);
  // Scores are logit margins -1, 3, -4: one of two pos/neg pairs ordered.
  EXPECT_NEAR(metric(MetricKind::kRocAuc, logits, labels, nullptr,
                     std::vector<std::size_t>{0, 1, 2}),
              0.5, 1e-15);
}

TEST(Metric, Names) {
  EXPECT_EQ(parse_metric("rocauc"), MetricKind::kRocAuc);
  EXPECT_FALSE(higher_is_better(MetricKind::kMse));
  EXPECT_THROW(parse_metric("f1"), ParameterError);
}

TEST(TrainLoop, ZeroLearningRateFreezesParameters) {
  const Dataset d = separable(40, 1);
  TrainConfig tc;
  tc.lr = 0.0;
  tc.weight_decay = 0.0;
  tc.epochs = 5;
  const auto r = train_loop(d, mlp_config(), tc);
  ASSERT_EQ(r.history.size(), 5u);
  for (const auto& e : r.history) EXPECT_EQ(e.val_metric, r.history.front().val_metric);
  EXPECT_TRUE(r.best.params == init_model(mlp_config(), tc.seed));
}

TEST(TrainLoop, SeparableReachesFullTrainAccuracy) {
  const Dataset d = separable(60, 2);
  TrainConfig tc;
  tc.epochs = 200;
  tc.patience = 200;
  const auto r = train_loop(d, mlp_config(), tc);
  const Matrix logits = predict(r.best.params, r.best.config, d.features);
  EXPECT_EQ(metric(MetricKind::kAccuracy, logits, d.labels, nullptr, d.indices(Split::kTrain)),
            1.0);
}

TEST(TrainLoop, EarlyLossNonIncreasing) {
  const Dataset d = separable(60, 3);
  TrainConfig tc;
  tc.lr = 1e-3;
  tc.epochs = 10;
  const auto r = train_loop(d, mlp_config(), tc);
  for (std::size_t k = 1; k < r.history.size(); ++k) {
    EXPECT_LE(r.history[k].train_loss, r.history[k - 1].train_loss);
  }
}

TEST(TrainLoop, DeterministicPerSeed) {
  SbmParams p;
  p.per_block = 30;
  const Dataset d = sbm_generate(p);
  ModelConfig cfg;
  cfg.input_dim = 8;
  cfg.use_graph = true;
  TrainConfig tc;
  tc.epochs = 15;
  tc.batch_size = 25;
  const auto a = train_loop(d, cfg, tc);
  const auto b = train_loop(d, cfg, tc);
  std::ostringstream ca, cb;
  write_history_csv(ca, a.history);
  write_history_csv(cb, b.history);
  EXPECT_EQ(ca.str(), cb.str());
  EXPECT_EQ(ca.str().substr(0, ca.str().find('\n')), "epoch,train_loss,val_metric,test_metric");
}

TEST(TrainLoop, BestEpochAndEarlyStop) {
  const Dataset d = separable(40, 4);
  TrainConfig tc;
  tc.epochs = 300;
  tc.patience = 5;
  const auto r = train_loop(d, mlp_config(), tc);
  EXPECT_LE(r.history.size(), r.best_epoch + 1 + tc.patience);
  double best = -1.0;
  std::size_t first = 0;
  for (const auto& e : r.history) {
    if (e.val_metric > best) {
      best = e.val_metric;
      first = e.epoch;
    }
  }
  EXPECT_EQ(r.best_epoch, first);
  EXPECT_EQ(r.best_val, best);
}

TEST(TrainLoop, EmptySplitRejected) {
  Dataset d = separable(20, 5);
  for (auto& s : d.split)
    if (s == Split::kVal) s = Split::kTrain;
  EXPECT_THROW(train_loop(d, mlp_config(), TrainConfig{}), ContractError);
}
