#include "ecdiff/audit_suites.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <exception>
#include <limits>
#include <random>
#include <thread>

#include <nlohmann/json.hpp>

#include "ecdiff/coupling.hpp"
#include "ecdiff/diffusion.hpp"
#include "ecdiff/energy.hpp"
#include "ecdiff/errors.hpp"
#include "ecdiff/spectral.hpp"

namespace ecdiff {

Matrix random_normal(std::size_t rows, std::size_t cols, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> dist(0.0, 1.0);
  Matrix m(rows, cols);
  for (double& v : m.data()) v = dist(rng);
  return m;
}

Graph connected_erdos_renyi(std::size_t n, double p, std::uint64_t seed) {
  for (std::uint64_t attempt = 0; attempt < 10000; ++attempt) {
    Graph g = erdos_renyi(n, p, seed * 10007 + attempt);
    if (g.connected()) return g;
  }
  throw ParameterError("connected_erdos_renyi: no connected draw for n=" + std::to_string(n));
}

GradCheck check_model_gradients(const ModelConfig& cfg, std::size_t n, std::uint64_t seed,
                                double h) {
  const Matrix x = random_normal(n, cfg.input_dim, seed);
  std::mt19937_64 rng(seed + 1);
  std::vector<int> labels(n);
  for (int& y : labels) y = static_cast<int>(rng() % cfg.output_dim);
  std::vector<std::size_t> rows(n);
  for (std::size_t i = 0; i < n; ++i) rows[i] = i;
  std::optional<Graph> g;
  if (cfg.use_graph) g = connected_erdos_renyi(n, 0.3, seed + 2);
  const Graph* gp = g ? &*g : nullptr;

  ParameterStore params = init_model(cfg, seed + 3);
  // Non-zero biases so their gradients are exercised away from the init.
  for (const auto& name : params.names()) {
    Matrix& w = params.value(name);
    if (w.rows() == 1) w = scale(random_normal(1, w.cols(), seed + 4), 0.1);
  }
  auto loss_at = [&](ParameterStore& store) {
    Tape tape(&store);
    const Var logits = forward(tape, cfg, x, gp);
    return tape.value(tape.softmax_cross_entropy(logits, labels, rows))(0, 0);
  };

  params.zero_grad();
  {
    Tape tape(&params);
    const Var logits = forward(tape, cfg, x, gp);
    tape.backward(tape.softmax_cross_entropy(logits, labels, rows));
  }
  GradCheck out;
  for (const auto& name : params.names()) {
    ParameterStore probe = params;
    const Matrix fd = finite_diff_grad(
        [&](const Matrix& w) {
          probe.value(name) = w;
          return loss_at(probe);
        },
        params.value(name), h);
    const Matrix& tape_grad = params.grad(name);
    const double denom = std::max({std::sqrt(frobenius_sq(tape_grad)), std::sqrt(frobenius_sq(fd)), 1e-12});
    const double rel = std::sqrt(frobenius_sq(sub(tape_grad, fd))) / denom;
    out.rel_error[name] = rel;
    out.max_rel_error = std::max(out.max_rel_error, rel);
  }
  return out;
}

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

// What one seed contributes to a suite.
struct SeedOutcome {
  std::vector<std::string> violations;
  std::vector<std::string> notes;
  double min_ratio = std::numeric_limits<double>::infinity();
  double max_ratio = -std::numeric_limits<double>::infinity();
  double diversity_initial = 0.0;
  double diversity_final = 0.0;
  std::map<std::string, double> maxima;
  std::map<std::string, double> minima;
};

std::string fmt(const char* pattern, auto... args) {
  char buf[256];
  std::snprintf(buf, sizeof buf, pattern, args...);
  return buf;
}

void note_max(SeedOutcome& o, const std::string& key, double v) {
  auto [it, fresh] = o.maxima.try_emplace(key, v);
  if (!fresh) it->second = std::max(it->second, v);
}

void note_min(SeedOutcome& o, const std::string& key, double v) {
  auto [it, fresh] = o.minima.try_emplace(key, v);
  if (!fresh) it->second = std::min(it->second, v);
}

struct StaticCase {
  const char* name;
  CouplingFamily family;
};

constexpr StaticCase kStaticCases[] = {
    {"gcn_sym", CouplingFamily::kGcnSym},
    {"gin", CouplingFamily::kGin},
    {"all_one", CouplingFamily::kAllOne},
};

// ER(16, 0.3) instance with d = 4 features and tau = 0.9 / lambda_1.
struct StaticInstance {
  Graph g;
  Matrix z0;
  Matrix s;
  double tau;
};

StaticInstance static_instance(CouplingFamily family, std::uint64_t seed) {
  StaticInstance inst{connected_erdos_renyi(16, 0.3, seed), random_normal(16, 4, seed), {}, 0.0};
  inst.s = build_coupling({family, std::nullopt, std::nullopt}, inst.z0, &inst.g);
  inst.tau = std::min(1.0, 0.9 / laplacian_spectral_bracket(inst.s).lambda_max);
  return inst;
}

SeedOutcome seed_thm1(std::uint64_t seed) {
  SeedOutcome o;
  for (const auto& c : kStaticCases) {
    const auto inst = static_instance(c.family, seed);
    DiffusionConfig cfg;
    cfg.tau = inst.tau;
    cfg.steps = 20;
    const auto traj = run_trajectory(inst.z0, {c.family, std::nullopt, std::nullopt}, cfg, &inst.g);
    const auto rep = audit_descent(traj, inst.tau);
    for (const auto& v : rep.violations) {
      o.violations.push_back(fmt("seed %llu %s step %zu: %.17g > %.17g",
                                 static_cast<unsigned long long>(seed), c.name, v.step, v.lhs,
                                 v.rhs));
    }
    if (c.family == CouplingFamily::kGcnSym) {
      o.diversity_initial = rep.diversity.front();
      o.diversity_final = rep.diversity.back();
    }
  }
  return o;
}

SeedOutcome seed_prop1(std::uint64_t seed) {
  SeedOutcome o;
  for (const auto& c : kStaticCases) {
    const auto inst = static_instance(c.family, seed);
    DiffusionConfig cfg;
    cfg.tau = inst.tau;
    cfg.steps = 20;
    const auto traj = run_trajectory(inst.z0, {c.family, std::nullopt, std::nullopt}, cfg, &inst.g);
    const auto rep = audit_bounds(traj, inst.s, inst.tau, inst.tau);
    const auto tag = static_cast<unsigned long long>(seed);
    for (const auto& v : rep.violations) {
      o.violations.push_back(fmt("seed %llu %s step %zu: E_{k+1}=%.17g outside bracket of E_k=%.17g",
                                 tag, c.name, v.step, v.lhs, v.rhs));
    }
    // Connected instances: lambda_2 vanishes and the upper bound is plain monotonicity.
    if (rep.bracket.lambda_min > 1e-7) {
      o.violations.push_back(fmt("seed %llu %s: lambda_2 = %.3g on a connected graph", tag, c.name,
                                 rep.bracket.lambda_min));
    }
    for (std::size_t k = 0; k < rep.descent.size(); ++k) {
      if (!rep.descent[k]) {
        o.violations.push_back(fmt("seed %llu %s step %zu: energy increased", tag, c.name, k + 1));
      }
    }
    o.min_ratio = std::min(o.min_ratio, rep.min_ratio);
    o.max_ratio = std::max(o.max_ratio, rep.max_ratio);
    note_max(o, "max_lambda_2", rep.bracket.lambda_min);
    note_max(o, std::string(c.name) + "_unresolved_steps", static_cast<double>(rep.unresolved));
    if (c.family == CouplingFamily::kGcnSym) {
      o.diversity_initial = rep.diversity.front();
      o.diversity_final = rep.diversity.back();
    }
  }
  return o;
}

SeedOutcome seed_thm2(std::uint64_t seed) {
  SeedOutcome o;
  const Matrix z0 = random_normal(20, 8, seed);
  for (PenaltyKind kind : {PenaltyKind::kSimple, PenaltyKind::kAdvanced}) {
    for (double tau : {0.1, 0.25, 0.5, 0.75, 1.0}) {
      DiffusionConfig cfg;
      cfg.tau = tau;
      cfg.steps = 10;
      const CouplingSpec spec{CouplingFamily::kAttention, PenaltyFamily{kind, 8.0}, std::nullopt};
      const auto traj = run_trajectory(z0, spec, cfg);
      const auto rep = audit_descent(traj, tau, 1e-8);
      const std::string key = fmt("%s_tau_%.2f", std::string(to_string(kind)).c_str(), tau);
      note_max(o, key + "_violations", static_cast<double>(rep.violations.size()));
      for (const auto& v : rep.violations) {
        const std::string line =
            fmt("seed %llu %s tau=%.2f step %zu: %.17g > %.17g",
                static_cast<unsigned long long>(seed), std::string(to_string(kind)).c_str(), tau,
                v.step, v.lhs, v.rhs);
        (tau <= 0.5 ? o.violations : o.notes).push_back(line);
      }
    }
  }
  return o;
}

SeedOutcome seed_oversmooth(std::uint64_t seed) {
  SeedOutcome o;
  const Graph g = connected_erdos_renyi(16, 0.3, seed);
  const Matrix z0 = random_normal(16, 4, seed);
  const auto tag = static_cast<unsigned long long>(seed);

  struct Case {
    const char* name;
    CouplingSpec spec;
    double tau;
  };
  const Matrix s = build_coupling({CouplingFamily::kGcnSym, std::nullopt, std::nullopt}, z0, &g);
  const std::vector<Case> cases = {
      {"gcn_sym", {CouplingFamily::kGcnSym, std::nullopt, std::nullopt},
       0.9 / laplacian_spectral_bracket(s).lambda_max},
      {"attention_simple",
       {CouplingFamily::kAttention, PenaltyFamily{PenaltyKind::kSimple, 4.0}, std::nullopt},
       0.5},
  };
  for (const auto& c : cases) {
    for (bool source : {false, true}) {
      DiffusionConfig cfg;
      cfg.tau = std::min(1.0, c.tau);
      cfg.steps = 500;
      cfg.beta = source ? 1.0 : 0.0;
      const auto traj = run_trajectory(z0, c.spec, cfg, &g);
      const double d0 = diversity(traj.snapshots.front().z);
      const double d1 = diversity(traj.snapshots.back().z);
      const double ratio = d1 / d0;
      const std::string key = std::string(c.name) + (source ? "_source" : "_plain");
      if (source) {
        note_min(o, key + "_min_ratio", ratio);
        if (ratio < 0.01) {
          o.violations.push_back(
              fmt("seed %llu %s with source: diversity ratio %.3g < 0.01", tag, c.name, ratio));
        }
      } else {
        note_max(o, key + "_max_ratio", ratio);
        if (ratio > 1e-6) {
          o.violations.push_back(
              fmt("seed %llu %s without source: diversity ratio %.3g > 1e-6", tag, c.name, ratio));
        }
        if (c.spec.family == CouplingFamily::kGcnSym) {
          o.diversity_initial = d0;
          o.diversity_final = d1;
        }
      }
    }
  }
  return o;
}

SeedOutcome seed_linear_equiv(std::uint64_t seed) {
  SeedOutcome o;
  const auto tag = static_cast<unsigned long long>(seed);
  const Matrix z = row_l2_normalize(random_normal(64, 8, seed));
  const CouplingSpec spec{CouplingFamily::kAttention, PenaltyFamily{PenaltyKind::kSimple, 8.0},
                          std::nullopt};
  const Matrix dense = matmul(build_coupling(spec, z), z);
  const double diff = max_abs_diff(linear_simple_propagate(z), dense);
  note_max(o, "max_abs_diff", diff);
  if (diff > 1e-10) o.violations.push_back(fmt("seed %llu: propagation diff %.3g > 1e-10", tag, diff));

  const Graph g = connected_erdos_renyi(64, 0.1, seed);
  for (bool graph : {false, true}) {
    ModelConfig cfg;
    cfg.variant = ModelVariant::kSimple;
    cfg.input_dim = 5;
    cfg.hidden_dim = 8;
    cfg.output_dim = 3;
    cfg.layers = 2;
    cfg.heads = 2;
    cfg.use_graph = graph;
    const ParameterStore params = init_model(cfg, seed);
    const Matrix x = random_normal(64, 5, seed + 1);
    const double mdiff = max_abs_diff(predict(params, cfg, x, &g), reference_forward(params, cfg, x, &g));
    note_max(o, "model_max_abs_diff", mdiff);
    if (mdiff > 1e-9) {
      o.violations.push_back(fmt("seed %llu graph=%d: model forward diff %.3g > 1e-9", tag, graph, mdiff));
    }
  }
  return o;
}

SeedOutcome seed_gradcheck(std::uint64_t seed) {
  SeedOutcome o;
  for (ModelVariant variant : {ModelVariant::kSimple, ModelVariant::kAdvanced}) {
    for (bool graph : {false, true}) {
      for (bool source : {false, true}) {
        ModelConfig cfg;
        cfg.variant = variant;
        cfg.input_dim = 5;
        cfg.hidden_dim = 8;
        cfg.output_dim = 3;
        cfg.layers = 2;
        cfg.heads = 2;
        cfg.use_graph = graph;
        cfg.use_source = source;
        const auto gc = check_model_gradients(cfg, 20, seed);
        note_max(o, "max_rel_error", gc.max_rel_error);
        for (const auto& [name, rel] : gc.rel_error) {
          if (rel > 1e-5) {
            o.violations.push_back(fmt("seed %llu %s graph=%d source=%d %s: rel error %.3g",
                                       static_cast<unsigned long long>(seed),
                                       std::string(to_string(variant)).c_str(), graph, source,
                                       name.c_str(), rel));
          }
        }
      }
    }
  }
  return o;
}

using SeedFn = SeedOutcome (*)(std::uint64_t);

struct SuiteDef {
  std::string name;
  SeedFn fn;
  std::size_t seeds;
  double lambda;
  double tau;
};

const std::vector<SuiteDef>& suites() {
  static const std::vector<SuiteDef> defs = {
      {"thm1", seed_thm1, 100, kNaN, kNaN},
      {"prop1", seed_prop1, 100, kNaN, kNaN},
      {"thm2", seed_thm2, 100, kNaN, kNaN},
      {"oversmooth", seed_oversmooth, 10, kNaN, kNaN},
      {"linear_equiv", seed_linear_equiv, 50, kNaN, kNaN},
      {"gradcheck", seed_gradcheck, 2, kNaN, kNaN},
  };
  return defs;
}

SuiteResult run_one(const SuiteDef& def, std::size_t seeds, std::size_t jobs) {
  const auto start = std::chrono::steady_clock::now();
  if (seeds == 0) seeds = def.seeds;
  jobs = std::clamp<std::size_t>(jobs, 1, seeds);
  std::vector<SeedOutcome> outcomes(seeds);
  std::vector<std::exception_ptr> errors(seeds);
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < seeds; i = next++) {
      try {
        outcomes[i] = def.fn(i);
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  };
  if (jobs == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (std::size_t j = 0; j < jobs; ++j) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);

  SuiteResult r;
  r.suite = def.name;
  r.seeds = seeds;
  r.lambda = def.lambda;
  r.tau = def.tau;
  r.min_ratio = std::numeric_limits<double>::infinity();
  r.max_ratio = -std::numeric_limits<double>::infinity();
  std::map<std::string, double> maxima, minima;
  for (const auto& o : outcomes) {
    r.violations.insert(r.violations.end(), o.violations.begin(), o.violations.end());
    r.notes.insert(r.notes.end(), o.notes.begin(), o.notes.end());
    r.min_ratio = std::min(r.min_ratio, o.min_ratio);
    r.max_ratio = std::max(r.max_ratio, o.max_ratio);
    r.diversity_initial += o.diversity_initial / static_cast<double>(seeds);
    r.diversity_final += o.diversity_final / static_cast<double>(seeds);
    for (const auto& [k, v] : o.maxima) {
      auto [it, fresh] = maxima.try_emplace(k, v);
      if (!fresh) it->second = std::max(it->second, v);
    }
    for (const auto& [k, v] : o.minima) {
      auto [it, fresh] = minima.try_emplace(k, v);
      if (!fresh) it->second = std::min(it->second, v);
    }
  }
  if (!std::isfinite(r.min_ratio)) r.min_ratio = kNaN;
  if (!std::isfinite(r.max_ratio)) r.max_ratio = kNaN;
  r.metrics.insert(maxima.begin(), maxima.end());
  r.metrics.insert(minima.begin(), minima.end());
  r.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return r;
}

}  // namespace

const std::vector<std::string>& suite_names() {
  static const std::vector<std::string> names = [] {
    std::vector<std::string> out;
    for (const auto& d : suites()) out.push_back(d.name);
    return out;
  }();
  return names;
}

std::size_t default_seeds(std::string_view suite) {
  for (const auto& d : suites())
    if (d.name == suite) return d.seeds;
  throw ParameterError("unknown audit suite: " + std::string(suite));
}

std::vector<SuiteResult> run_audit(std::string_view suite, std::size_t seeds, std::size_t jobs) {
  std::vector<SuiteResult> out;
  for (const auto& d : suites()) {
    if (suite == "all" || suite == d.name) out.push_back(run_one(d, seeds, jobs));
  }
  if (out.empty()) throw ParameterError("unknown audit suite: " + std::string(suite));
  return out;
}

std::string to_json(const SuiteResult& r) {
  auto num = [](double v) { return std::isfinite(v) ? nlohmann::json(v) : nlohmann::json(nullptr); };
  nlohmann::json j = {
      {"suite", r.suite},
      {"seeds", r.seeds},
      {"lambda", std::isnan(r.lambda) ? nlohmann::json("tau") : num(r.lambda)},
      {"tau", std::isnan(r.tau) ? nlohmann::json("per instance") : num(r.tau)},
      {"violations", r.violations},
      {"min_ratio", num(r.min_ratio)},
      {"max_ratio", num(r.max_ratio)},
      {"diversity_initial", num(r.diversity_initial)},
      {"diversity_final", num(r.diversity_final)},
      {"passed", r.passed()},
      {"seconds", r.seconds},
  };
  nlohmann::json metrics = nlohmann::json::object();
  for (const auto& [k, v] : r.metrics) metrics[k] = num(v);
  j["metrics"] = metrics;
  j["notes"] = r.notes;
  return j.dump(2);
}

}  // namespace ecdiff
