#include "commands.hpp"

#include <algorithm>
#include <atomic>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <sstream>
#include <thread>

#include "ecdiff/audit_suites.hpp"
#include "ecdiff/coupling.hpp"
#include "ecdiff/diffusion.hpp"
#include "ecdiff/energy.hpp"
#include "ecdiff/errors.hpp"
#include "ecdiff/io.hpp"
#include "ecdiff/model.hpp"
#include "ecdiff/spectral.hpp"
#include "ecdiff/train.hpp"
#include "manifest.hpp"

namespace ecdiff::cli {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%g", v);
  return buf;
}

void write_text(RunManifest& manifest, const fs::path& path, const std::string& content) {
  write_file_atomic(path, content);
  manifest.add_output(path);
}

Dataset load_data(const DataOpts& d, std::uint64_t seed, RunManifest& manifest) {
  const int sources = !d.data.empty() + !d.synth.empty() + !d.cora.empty();
  if (sources != 1) throw UsageError("give exactly one of --data, --synth, --cora");
  if (!d.data.empty()) {
    const fs::path dir(d.data);
    auto optional_file = [&](const char* name) -> std::optional<fs::path> {
      if (fs::exists(dir / name)) return dir / name;
      return std::nullopt;
    };
    const auto edges = optional_file("edges.txt");
    const auto split = optional_file("split.txt");
    Dataset data = load_dataset(dir / "features.txt", dir / "labels.txt", edges, split);
    manifest.add_input(dir / "features.txt");
    manifest.add_input(dir / "labels.txt");
    if (edges) manifest.add_input(*edges);
    if (split) manifest.add_input(*split);
    return data;
  }
  if (!d.cora.empty()) {
    const fs::path dir(d.cora);
    Dataset data = load_cora(dir / "cora.content", dir / "cora.cites");
    manifest.add_input(dir / "cora.content");
    manifest.add_input(dir / "cora.cites");
    assign_per_class_split(data, d.cora_train, d.cora_val, d.cora_test, seed);
    return data;
  }
  if (d.synth != "sbm") throw UsageError("unknown --synth generator '" + d.synth + "' (known: sbm)");
  SbmParams p = d.sbm;
  p.seed = seed;
  return sbm_generate(p);
}

ModelConfig model_config(const ModelOpts& m, const Dataset& data, bool regression) {
  ModelConfig cfg;
  cfg.variant = parse_model_variant(m.variant);
  cfg.input_dim = data.num_features();
  cfg.hidden_dim = m.hidden;
  cfg.output_dim = regression ? data.targets->cols() : std::max<std::size_t>(data.num_classes(), 1);
  cfg.layers = m.layers;
  cfg.heads = m.heads;
  cfg.tau = m.tau;
  cfg.use_graph = m.use_graph;
  cfg.use_feature_transform = !m.no_feature_transform;
  cfg.use_source = m.use_source;
  cfg.activation = parse_activation(m.activation);
  return cfg;
}

// Runs fn(i) for i in [0, n) on up to `jobs` threads; results keep index order.
template <typename T, typename Fn>
std::vector<T> parallel_map(std::size_t n, std::size_t jobs, Fn fn) {
  std::vector<T> out(n);
  std::vector<std::exception_ptr> errors(n);
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < n; i = next++) {
      try {
        out[i] = fn(i);
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  };
  jobs = std::clamp<std::size_t>(jobs, 1, std::max<std::size_t>(n, 1));
  std::vector<std::thread> pool;
  for (std::size_t j = 1; j < jobs; ++j) pool.emplace_back(worker);
  worker();
  for (auto& t : pool) t.join();
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
  return out;
}

}  // namespace

int run_synth(const SynthOpts& o, const json& config) {
  RunManifest manifest("synth", config, o.common.seed);
  SbmParams p = o.sbm;
  p.seed = o.common.seed;
  const Dataset data = sbm_generate(p);
  const fs::path out(o.common.out);
  write_dataset(data, out);
  for (const char* name : {"features.txt", "labels.txt", "split.txt", "edges.txt"}) {
    manifest.add_output(out / name);
  }
  manifest.write(out);
  std::cout << "wrote " << data.num_nodes() << " nodes, " << data.graph->num_edges()
            << " edges to " << out.string() << "\n";
  return kExitOk;
}

int run_diffuse(const DiffuseOpts& o, const json& config) {
  RunManifest manifest("diffuse", config, o.common.seed);
  const fs::path out(o.common.out);

  Matrix z0;
  std::optional<Graph> graph;
  if (!o.data.empty()) {
    const fs::path dir(o.data);
    const auto edges = fs::exists(dir / "edges.txt") ? std::optional(dir / "edges.txt") : std::nullopt;
    Dataset data = load_dataset(dir / "features.txt", dir / "labels.txt", edges);
    manifest.add_input(dir / "features.txt");
    if (edges) manifest.add_input(*edges);
    z0 = data.features;
    graph = data.graph;
  } else {
    graph = connected_erdos_renyi(o.nodes, o.edge_prob, o.common.seed);
    z0 = random_normal(o.nodes, o.dim, o.common.seed);
  }
  if (o.center) {
    const auto means = col_sums(z0);
    for (std::size_t i = 0; i < z0.rows(); ++i)
      for (std::size_t c = 0; c < z0.cols(); ++c) z0(i, c) -= means[c] / static_cast<double>(z0.rows());
  }

  CouplingSpec spec;
  spec.family = parse_coupling_family(o.coupling);
  if (is_attention(spec.family)) {
    spec.penalty = PenaltyFamily{parse_penalty_kind(o.penalty), static_cast<double>(z0.cols())};
  }
  if (spec.family == CouplingFamily::kGatMasked) {
    if (!graph) throw UsageError("gat_masked needs a graph (edges.txt)");
    spec.graph_mask = graph;
  }
  const Graph* g = graph ? &*graph : nullptr;

  double inv_lambda1 = 1.0;
  if (o.tau_relative) {
    if (is_attention(spec.family)) throw UsageError("--tau-relative applies to static couplings");
    inv_lambda1 = 1.0 / laplacian_spectral_bracket(build_coupling(spec, z0, g)).lambda_max;
  }

  std::vector<bool> sources;
  if (o.source_grid) {
    sources = {false, true};
  } else {
    sources = {o.use_source};
  }

  std::ostringstream summary;
  summary << "coupling,tau,steps,source,diversity_initial,diversity_final,diversity_ratio,"
             "descent_violations\n";
  for (double tau_arg : o.taus) {
    for (std::size_t k : o.steps) {
      for (bool source : sources) {
        DiffusionConfig cfg;
        cfg.tau = o.tau_relative ? tau_arg * inv_lambda1 : tau_arg;
        cfg.steps = k;
        cfg.beta = source ? o.beta : 0.0;
        cfg.graph_blend = o.graph_blend;
        cfg.unit_rowsum_form = o.unit_rowsum_form;
        const Trajectory traj = run_trajectory(z0, spec, cfg, g);
        const auto rep = audit_descent(traj, cfg.tau);

        std::ostringstream csv;
        write_trajectory_csv(csv, traj, cfg.tau);
        const std::string stem = "traj_" + o.coupling + "_tau" + num(cfg.tau) + "_K" +
                                 std::to_string(k) + (source ? "_source" : "_plain");
        write_text(manifest, out / (stem + ".csv"), csv.str());

        const double d0 = rep.diversity.front();
        const double d1 = rep.diversity.back();
        char row[256];
        std::snprintf(row, sizeof row, "%s,%.17g,%zu,%d,%.17g,%.17g,%.17g,%zu\n", o.coupling.c_str(),
                      cfg.tau, k, source ? 1 : 0, d0, d1, d0 > 0.0 ? d1 / d0 : 0.0,
                      rep.violations.size());
        summary << row;
        std::cout << stem << ": diversity ratio " << (d0 > 0.0 ? d1 / d0 : 0.0)
                  << ", descent violations " << rep.violations.size() << "\n";
      }
    }
  }
  write_text(manifest, out / "summary.csv", summary.str());
  manifest.write(out);
  return kExitOk;
}

int run_audit_cmd(const AuditOpts& o, const json& config) {
  const auto& names = suite_names();
  if (o.suite != "all" && std::find(names.begin(), names.end(), o.suite) == names.end()) {
    std::string known = "all";
    for (const auto& n : names) known += ", " + n;
    throw UsageError("unknown suite '" + o.suite + "'; choose one of: " + known);
  }
  RunManifest manifest("audit", config, o.common.seed);
  const fs::path out(o.common.out);
  bool ok = true;
  for (const auto& r : run_audit(o.suite, o.seeds, o.common.jobs)) {
    write_text(manifest, out / ("audit_" + r.suite + ".json"), to_json(r) + "\n");
    ok = ok && r.passed();
    std::printf("%-13s %s  seeds=%zu violations=%zu (%.2fs)\n", r.suite.c_str(),
                r.passed() ? "PASS" : "FAIL", r.seeds, r.violations.size(), r.seconds);
    for (const auto& [k, v] : r.metrics) std::printf("    %s = %.6g\n", k.c_str(), v);
  }
  manifest.write(out);
  return ok ? kExitOk : kExitViolation;
}

int run_train(const TrainCmdOpts& o, const json& config) {
  RunManifest manifest("train", config, o.common.seed);
  const fs::path out(o.common.out);
  TrainConfig tc;
  tc.lr = o.train.lr;
  tc.weight_decay = o.train.weight_decay;
  tc.epochs = o.train.epochs;
  tc.patience = o.train.patience;
  tc.batch_size = o.train.batch_size;
  tc.metric = parse_metric(o.train.metric);
  if (o.train.seeds == 0) throw UsageError("--seeds must be at least 1");

  struct SeedRun {
    std::uint64_t seed = 0;
    TrainResult result;
  };
  // Datasets are loaded up front so manifest digests stay single-threaded.
  std::vector<Dataset> datasets;
  for (std::size_t i = 0; i < o.train.seeds; ++i) {
    datasets.push_back(load_data(o.data, o.common.seed + i, manifest));
  }
  const auto runs = parallel_map<SeedRun>(o.train.seeds, o.common.jobs, [&](std::size_t i) {
    TrainConfig cfg = tc;
    cfg.seed = o.common.seed + i;
    const Dataset& data = datasets[i];
    const ModelConfig mc = model_config(o.model, data, tc.metric == MetricKind::kMse);
    return SeedRun{cfg.seed, train_loop(data, mc, cfg)};
  });

  json per_seed = json::array();
  double total = 0.0;
  for (const auto& run : runs) {
    const fs::path dir = o.train.seeds == 1 ? out : out / ("seed_" + std::to_string(run.seed));
    save_checkpoint(run.result.best, dir / "checkpoint.json");
    manifest.add_output(dir / "checkpoint.json");
    std::ostringstream csv;
    write_history_csv(csv, run.result.history);
    write_text(manifest, dir / "metrics.csv", csv.str());
    per_seed.push_back({{"seed", run.seed},
                        {"best_epoch", run.result.best_epoch},
                        {"val_metric", run.result.best_val},
                        {"test_metric", run.result.test_at_best}});
    total += run.result.test_at_best;
  }
  const json summary = {{"metric", o.train.metric},
                        {"mean_test_metric", total / static_cast<double>(runs.size())},
                        {"runs", per_seed}};
  write_text(manifest, out / "summary.json", summary.dump(2) + "\n");
  manifest.write(out);
  std::cout << summary.dump(2) << "\n";
  return kExitOk;
}

int run_eval(const EvalOpts& o, const json& config) {
  RunManifest manifest("eval", config, o.common.seed);
  const Checkpoint ckpt = load_checkpoint(o.checkpoint);
  manifest.add_input(o.checkpoint);
  const Dataset data = load_data(o.data, o.common.seed, manifest);
  if (ckpt.config.input_dim != data.num_features()) {
    throw DimensionError("checkpoint expects " + std::to_string(ckpt.config.input_dim) +
                         " input features, dataset has " + std::to_string(data.num_features()));
  }
  const Graph* g = ckpt.config.use_graph ? (data.graph ? &*data.graph : nullptr) : nullptr;
  const Matrix pred = predict(ckpt.params, ckpt.config, data.features, g);
  const auto kind = parse_metric(o.metric);
  const auto idx = data.indices(parse_split(o.split));
  const double value =
      metric(kind, pred, data.labels, data.targets ? &*data.targets : nullptr, idx);
  const json result = {{"metric", o.metric}, {"split", o.split}, {"nodes", idx.size()}, {"value", value}};
  std::cout << result.dump() << "\n";
  manifest.write(fs::path(o.common.out));
  return kExitOk;
}

int run_landscape(const LandscapeOpts& o, const json& config) {
  RunManifest manifest("landscape", config, o.common.seed);
  const fs::path out(o.common.out);
  for (const auto& name : o.penalties) {
    const PenaltyFamily p{parse_penalty_kind(name), o.dim};
    std::ostringstream csv;
    write_landscape_csv(csv, p);
    write_text(manifest, out / ("landscape_" + name + ".csv"), csv.str());
  }
  manifest.write(out);
  return kExitOk;
}

}  // namespace ecdiff::cli
