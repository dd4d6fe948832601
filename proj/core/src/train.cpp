#include "ecdiff/train.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <random>

#include "ecdiff/errors.hpp"

namespace ecdiff {

MetricKind parse_metric(std::string_view name) {
  if (name == "accuracy") return MetricKind::kAccuracy;
  if (name == "rocauc") return MetricKind::kRocAuc;
  if (name == "mse") return MetricKind::kMse;
  throw ParameterError("unknown metric: " + std::string(name));
}

std::string_view to_string(MetricKind m) {
  switch (m) {
    case MetricKind::kAccuracy: return "accuracy";
    case MetricKind::kRocAuc: return "rocauc";
    case MetricKind::kMse: return "mse";
  }
  return "?";
}

bool higher_is_better(MetricKind m) { return m != MetricKind::kMse; }

void TrainConfig::validate() const {
  if (!(lr >= 0.0)) throw ParameterError("lr must be non-negative");
  if (!(weight_decay >= 0.0)) throw ParameterError("weight_decay must be non-negative");
  if (epochs == 0) throw ParameterError("epochs must be at least 1");
}

Var loss(Tape& tape, LossKind kind, Var logits, std::span<const int> labels,
         const Matrix* targets, std::span<const std::size_t> mask) {
  if (mask.empty()) throw ContractError("loss: mask selects no nodes");
  if (kind == LossKind::kCrossEntropy) return tape.softmax_cross_entropy(logits, labels, mask);
  if (!targets) throw ContractError("mse loss needs regression targets");
  return tape.mean_squared_error(logits, *targets, mask);
}

void adam_step(ParameterStore& params, AdamState& state, double lr, double weight_decay) {
  ++state.t;
  const double t = static_cast<double>(state.t);
  const double c1 = 1.0 - std::pow(kAdamBeta1, t);
  const double c2 = 1.0 - std::pow(kAdamBeta2, t);
  for (const auto& name : params.names()) {
    Matrix& w = params.value(name);
    const Matrix& g = params.grad(name);
    require_same_shape(w, g, "adam_step");
    auto [mit, m_new] = state.m.try_emplace(name, w.rows(), w.cols());
    auto [vit, v_new] = state.v.try_emplace(name, w.rows(), w.cols());
    Matrix& m = mit->second;
    Matrix& v = vit->second;
    require_same_shape(w, m, "adam_step moments");
    auto wd = w.data();
    auto gd = g.data();
    auto md = m.data();
    auto vd = v.data();
    for (std::size_t i = 0; i < wd.size(); ++i) {
      wd[i] -= lr * weight_decay * wd[i];
      md[i] = kAdamBeta1 * md[i] + (1.0 - kAdamBeta1) * gd[i];
      vd[i] = kAdamBeta2 * vd[i] + (1.0 - kAdamBeta2) * gd[i] * gd[i];
      wd[i] -= lr * (md[i] / c1) / (std::sqrt(vd[i] / c2) + kAdamEps);
    }
  }
}

std::vector<std::vector<std::size_t>> minibatch_partition(std::size_t n, std::size_t batch_size,
                                                          std::uint64_t seed, std::size_t epoch) {
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  if (batch_size == 0 || batch_size >= n) return {order};
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(epoch), static_cast<std::uint32_t>(epoch >> 32)};
  std::mt19937_64 rng(seq);
  std::shuffle(order.begin(), order.end(), rng);
  std::vector<std::vector<std::size_t>> batches;
  for (std::size_t start = 0; start < n; start += batch_size) {
    const std::size_t end = std::min(n, start + batch_size);
    batches.emplace_back(order.begin() + static_cast<std::ptrdiff_t>(start),
                         order.begin() + static_cast<std::ptrdiff_t>(end));
  }
  return batches;
}

double roc_auc(std::span<const double> scores, std::span<const int> labels) {
  if (scores.size() != labels.size()) {
    throw DimensionError("roc_auc: " + std::to_string(scores.size()) + " scores for " +
                         std::to_string(labels.size()) + " labels");
  }
  std::vector<std::size_t> idx(scores.size());
  std::iota(idx.begin(), idx.end(), 0);
  std::sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });
  std::vector<double> rank(scores.size());
  for (std::size_t i = 0; i < idx.size();) {
    std::size_t j = i;
    while (j + 1 < idx.size() && scores[idx[j + 1]] == scores[idx[i]]) ++j;
    const double mid = 0.5 * static_cast<double>(i + j) + 1.0;
    for (std::size_t k = i; k <= j; ++k) rank[idx[k]] = mid;
    i = j + 1;
  }
  double pos = 0.0, neg = 0.0, rank_sum = 0.0;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] == 1) {
      pos += 1.0;
      rank_sum += rank[i];
    } else if (labels[i] == 0) {
      neg += 1.0;
    } else {
      throw DomainError("roc_auc needs binary labels, got " + std::to_string(labels[i]));
    }
  }
  if (pos == 0.0 || neg == 0.0) throw DomainError("roc_auc is undefined with one class present");
  return (rank_sum - pos * (pos + 1.0) / 2.0) / (pos * neg);
}

double metric(MetricKind kind, const Matrix& predictions, std::span<const int> labels,
              const Matrix* targets, std::span<const std::size_t> mask) {
  if (mask.empty()) throw ContractError("metric: mask selects no nodes");
  switch (kind) {
    case MetricKind::kAccuracy: {
      std::size_t hits = 0;
      for (std::size_t i : mask) {
        auto r = predictions.row(i);
        const auto best = static_cast<int>(std::max_element(r.begin(), r.end()) - r.begin());
        if (best == labels[i]) ++hits;
      }
      return static_cast<double>(hits) / static_cast<double>(mask.size());
    }
    case MetricKind::kRocAuc: {
      std::vector<double> scores;
      std::vector<int> ys;
      for (std::size_t i : mask) {
        scores.push_back(predictions.cols() == 1 ? predictions(i, 0)
                                                 : predictions(i, 1) - predictions(i, 0));
        ys.push_back(labels[i]);
      }
      return roc_auc(scores, ys);
    }
    case MetricKind::kMse: {
      if (!targets) throw ContractError("mse metric needs regression targets");
      require_same_shape(predictions, *targets, "mse metric");
      double total = 0.0;
      for (std::size_t i : mask) {
        for (std::size_t c = 0; c < predictions.cols(); ++c) {
          const double e = predictions(i, c) - (*targets)(i, c);
          total += e * e;
        }
      }
      return total / static_cast<double>(mask.size() * predictions.cols());
    }
  }
  return 0.0;
}

namespace {

Matrix take_rows(const Matrix& m, const std::vector<std::size_t>& rows) {
  Matrix out(rows.size(), m.cols());
  for (std::size_t r = 0; r < rows.size(); ++r) {
    auto src = m.row(rows[r]);
    std::copy(src.begin(), src.end(), out.row(r).begin());
  }
  return out;
}

}  // namespace

TrainResult train_loop(const Dataset& data, const ModelConfig& model_cfg,
                       const TrainConfig& cfg) {
  data.validate();
  cfg.validate();
  model_cfg.validate();
  const auto train_idx = data.indices(Split::kTrain);
  const auto val_idx = data.indices(Split::kVal);
  const auto test_idx = data.indices(Split::kTest);
  if (train_idx.empty() || val_idx.empty()) {
    throw ContractError("training needs non-empty train and val splits");
  }
  if (model_cfg.use_graph && !data.graph) throw ContractError("graph channel needs a graph");
  const bool regression = cfg.metric == MetricKind::kMse;
  const LossKind kind = regression ? LossKind::kMse : LossKind::kCrossEntropy;
  const Matrix* targets = data.targets ? &*data.targets : nullptr;
  const Graph* graph = model_cfg.use_graph ? &*data.graph : nullptr;

  std::vector<char> is_train(data.num_nodes(), 0);
  for (std::size_t i : train_idx) is_train[i] = 1;

  TrainResult res;
  res.best.config = model_cfg;
  res.best.meta.seed = cfg.seed;
  res.best.meta.metric = std::string(to_string(cfg.metric));
  ParameterStore params = init_model(model_cfg, cfg.seed);
  AdamState adam;
  bool have_best = false;
  std::size_t since_best = 0;

  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    const auto batches = minibatch_partition(data.num_nodes(), cfg.batch_size, cfg.seed, epoch);
    double loss_total = 0.0;
    std::size_t loss_count = 0;
    for (const auto& batch : batches) {
      std::vector<std::size_t> mask;
      for (std::size_t r = 0; r < batch.size(); ++r)
        if (is_train[batch[r]]) mask.push_back(r);
      if (mask.empty()) continue;

      const bool full = batches.size() == 1;
      const Matrix x = full ? data.features : take_rows(data.features, batch);
      std::vector<int> labels;
      std::optional<Matrix> sub_targets;
      std::optional<Graph> sub_graph;
      if (full) {
        labels = data.labels;
      } else {
        for (std::size_t i : batch) labels.push_back(data.labels[i]);
        if (targets) sub_targets = take_rows(*targets, batch);
        if (graph) sub_graph = graph->induced_subgraph(batch);
      }
      const Matrix* t = full ? targets : (sub_targets ? &*sub_targets : nullptr);
      const Graph* gb = full ? graph : (sub_graph ? &*sub_graph : nullptr);

      params.zero_grad();
      Tape tape(&params);
      const Var logits = forward(tape, model_cfg, x, gb);
      const Var l = loss(tape, kind, logits, labels, t, mask);
      tape.backward(l);
      adam_step(params, adam, cfg.lr, cfg.weight_decay);
      loss_total += tape.value(l)(0, 0);
      ++loss_count;
    }

    const Matrix pred = predict(params, model_cfg, data.features, graph);
    const double val = metric(cfg.metric, pred, data.labels, targets, val_idx);
    const double test =
        test_idx.empty() ? 0.0 : metric(cfg.metric, pred, data.labels, targets, test_idx);
    const double train_loss = loss_count ? loss_total / static_cast<double>(loss_count) : 0.0;
    res.history.push_back({epoch, train_loss, val, test});

    const bool better =
        !have_best || (higher_is_better(cfg.metric) ? val > res.best_val : val < res.best_val);
    if (better) {
      have_best = true;
      since_best = 0;
      res.best_epoch = epoch;
      res.best_val = val;
      res.test_at_best = test;
      res.best.params = params;
      res.best.meta.epoch = epoch;
      res.best.meta.values = {{"train_loss", train_loss}, {"val_metric", val}, {"test_metric", test}};
    } else if (++since_best >= cfg.patience) {
      break;
    }
  }
  return res;
}

void write_history_csv(std::ostream& out, const std::vector<EpochRecord>& history) {
  out << "epoch,train_loss,val_metric,test_metric\n";
  char buf[128];
  for (const auto& r : history) {
    std::snprintf(buf, sizeof buf, "%zu,%.17g,%.17g,%.17g\n", r.epoch, r.train_loss,
                  r.val_metric, r.test_metric);
    out << buf;
  }
}

}  // namespace ecdiff
