#include <algorithm>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "commands.hpp"
#include "ecdiff/audit_suites.hpp"
#include "ecdiff/errors.hpp"

using nlohmann::json;
using namespace ecdiff::cli;

namespace {

void add_common(CLI::App* sub, CommonOpts& c) {
  sub->add_option("--seed", c.seed, "random seed")->capture_default_str();
  sub->add_option("--out", c.out, "output directory")->capture_default_str();
  sub->add_option("--jobs", c.jobs, "worker threads")->capture_default_str()->check(CLI::PositiveNumber);
  sub->add_option("--config", "JSON file with flag values; explicit flags win");
}

void add_sbm(CLI::App* sub, ecdiff::SbmParams& p) {
  sub->add_option("--blocks", p.blocks, "SBM blocks")->capture_default_str();
  sub->add_option("--per-block", p.per_block, "SBM nodes per block")->capture_default_str();
  sub->add_option("--p-in", p.p_in, "SBM within-block edge probability")->capture_default_str();
  sub->add_option("--p-out", p.p_out, "SBM cross-block edge probability")->capture_default_str();
  sub->add_option("--feat-dim", p.feat_dim, "SBM feature dimension")->capture_default_str();
  sub->add_option("--feat-shift", p.feat_shift, "SBM class mean shift")->capture_default_str();
}

void add_data(CLI::App* sub, DataOpts& d) {
  sub->add_option("--data", d.data, "dataset directory (features.txt, labels.txt, ...)");
  sub->add_option("--synth", d.synth, "generate data instead: sbm");
  sub->add_option("--cora", d.cora, "directory with cora.content and cora.cites");
  sub->add_option("--cora-train", d.cora_train, "training nodes per class")->capture_default_str();
  sub->add_option("--cora-val", d.cora_val, "validation nodes")->capture_default_str();
  sub->add_option("--cora-test", d.cora_test, "test nodes")->capture_default_str();
  add_sbm(sub, d.sbm);
}

void add_model(CLI::App* sub, ModelOpts& m) {
  sub->add_option("--variant", m.variant, "simple | advanced | mlp")
      ->capture_default_str()
      ->check(CLI::IsMember({"simple", "advanced", "mlp"}));
  sub->add_option("--layers", m.layers, "propagation layers")->capture_default_str();
  sub->add_option("--hidden", m.hidden, "hidden width")->capture_default_str();
  sub->add_option("--heads", m.heads, "attention heads")->capture_default_str();
  sub->add_option("--tau", m.tau, "step size in [0, 1]")->capture_default_str();
  sub->add_flag("--use-graph", m.use_graph, "add the graph channel");
  sub->add_flag("--use-source", m.use_source, "add the source term");
  sub->add_flag("--no-feature-transform", m.no_feature_transform, "identity K/Q/V projections");
  sub->add_option("--activation", m.activation, "none | relu")
      ->capture_default_str()
      ->check(CLI::IsMember({"none", "relu"}));
}

const std::vector<std::string> kCouplings{"identity", "all_one", "gcn_sym", "gin", "gat_masked",
                                          "attention"};
const std::vector<std::string> kPenalties{"simple", "advanced", "softmax", "quadratic", "kernel"};
const std::vector<std::string> kMetrics{"accuracy", "rocauc", "mse"};

bool is_flag(const CLI::Option* opt) { return opt->get_expected_max() == 0; }

json option_value(const CLI::Option* opt) {
  if (is_flag(opt)) return opt->count() > 0 && opt->as<bool>();
  std::vector<std::string> values;
  if (opt->count() > 0) {
    values = opt->reduced_results();
  } else if (!opt->get_default_str().empty()) {
    values = CLI::detail::split(opt->get_default_str(), ',');
    for (auto& v : values) {
      v.erase(std::remove_if(v.begin(), v.end(), [](char ch) { return ch == '[' || ch == ']'; }),
              v.end());
      CLI::detail::trim(v);
    }
  }
  auto scalar = [](const std::string& s) -> json {
    char* end = nullptr;
    const long long i = std::strtoll(s.c_str(), &end, 10);
    if (!s.empty() && end == s.c_str() + s.size()) return i;
    const double d = std::strtod(s.c_str(), &end);
    if (!s.empty() && end == s.c_str() + s.size()) return d;
    return s;
  };
  if (opt->get_expected_max() > 1) {
    json arr = json::array();
    for (const auto& v : values) arr.push_back(scalar(v));
    return arr;
  }
  if (values.empty()) return "";
  return scalar(values.front());
}

json resolved_config(const CLI::App* sub) {
  json cfg = json::object();
  for (const CLI::Option* opt : sub->get_options()) {
    const std::string& name = opt->get_single_name();
    if (name == "help" || name == "config") continue;
    cfg[name] = option_value(opt);
  }
  return cfg;
}

std::string json_scalar_text(const json& v) {
  if (v.is_string()) return v.get<std::string>();
  if (v.is_number_integer()) return std::to_string(v.get<long long>());
  if (v.is_number_unsigned()) return std::to_string(v.get<unsigned long long>());
  if (v.is_number_float()) {
    const double d = v.get<double>();
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", d);
    return buf;
  }
  throw ecdiff::FormatError("config", 0, "unsupported value " + v.dump());
}

bool given_on_command_line(const std::vector<std::string>& args, const std::string& key) {
  const std::string flag = "--" + key;
  return std::any_of(args.begin(), args.end(), [&](const std::string& a) {
    return a == flag || a.rfind(flag + "=", 0) == 0;
  });
}

// Expands --config FILE into explicit --key=value arguments placed after the
// subcommand name. A manifest is accepted in place of a flat object.
std::vector<std::string> merge_config(std::vector<std::string> args,
                                      const std::vector<std::string>& subcommands) {
  auto it = std::find(args.begin(), args.end(), "--config");
  std::string path;
  if (it != args.end()) {
    if (it + 1 == args.end()) throw CLI::ArgumentMismatch("--config needs a file");
    path = *(it + 1);
    args.erase(it, it + 2);
  } else {
    auto eq = std::find_if(args.begin(), args.end(),
                           [](const std::string& a) { return a.rfind("--config=", 0) == 0; });
    if (eq == args.end()) return args;
    path = eq->substr(9);
    args.erase(eq);
  }
  std::ifstream in(path);
  if (!in) throw ecdiff::Error("cannot open config file '" + path + "'");
  json doc;
  try {
    doc = json::parse(in);
  } catch (const json::parse_error& e) {
    throw ecdiff::FormatError(path, 0, e.what());
  }
  if (doc.contains("config") && doc["config"].is_object()) doc = doc["config"];
  if (!doc.is_object()) throw ecdiff::FormatError(path, 0, "expected a JSON object");

  auto sub = std::find_if(args.begin() + 1, args.end(), [&](const std::string& a) {
    return std::find(subcommands.begin(), subcommands.end(), a) != subcommands.end();
  });
  if (sub == args.end()) throw CLI::CallForHelp();
  std::vector<std::string> extra;
  for (const auto& [key, value] : doc.items()) {
    if (given_on_command_line(args, key)) continue;
    if (value.is_boolean()) {
      if (value.get<bool>()) extra.push_back("--" + key);
    } else if (value.is_array()) {
      std::string joined;
      for (const auto& v : value) joined += (joined.empty() ? "" : ",") + json_scalar_text(v);
      if (!joined.empty()) extra.push_back("--" + key + "=" + joined);
    } else if (value.is_null() || (value.is_string() && value.get<std::string>().empty())) {
      continue;
    } else {
      extra.push_back("--" + key + "=" + json_scalar_text(value));
    }
  }
  args.insert(sub + 1, extra.begin(), extra.end());
  return args;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"ecdiff: energy-constrained diffusion toolkit"};
  app.require_subcommand(1);

  SynthOpts synth;
  auto* synth_cmd = app.add_subcommand("synth", "generate a stochastic block model dataset");
  add_common(synth_cmd, synth.common);
  add_sbm(synth_cmd, synth.sbm);

  DiffuseOpts diffuse;
  auto* diffuse_cmd = app.add_subcommand("diffuse", "run diffusion trajectories and energy audits");
  add_common(diffuse_cmd, diffuse.common);
  diffuse_cmd->add_option("--data", diffuse.data, "dataset directory; otherwise a random graph");
  diffuse_cmd->add_option("--nodes", diffuse.nodes, "random graph nodes")->capture_default_str();
  diffuse_cmd->add_option("--dim", diffuse.dim, "random feature dimension")->capture_default_str();
  diffuse_cmd->add_option("--edge-prob", diffuse.edge_prob, "random graph edge probability")
      ->capture_default_str();
  diffuse_cmd->add_option("--coupling", diffuse.coupling, "coupling family")
      ->capture_default_str()
      ->check(CLI::IsMember(kCouplings));
  diffuse_cmd->add_option("--penalty", diffuse.penalty, "penalty for attention couplings")
      ->capture_default_str()
      ->check(CLI::IsMember(kPenalties));
  diffuse_cmd->add_option("--tau", diffuse.taus, "step sizes")->capture_default_str()->delimiter(',');
  diffuse_cmd->add_flag("--tau-relative", diffuse.tau_relative,
                        "read --tau as multiples of 1/lambda_1");
  diffuse_cmd->add_option("--steps,--layers", diffuse.steps, "step counts")
      ->capture_default_str()
      ->delimiter(',');
  diffuse_cmd->add_option("--beta", diffuse.beta, "source weight")->capture_default_str();
  diffuse_cmd->add_flag("--use-source", diffuse.use_source, "add the source term");
  diffuse_cmd->add_flag("--source-grid", diffuse.source_grid, "run with and without the source");
  diffuse_cmd->add_flag("--graph-blend", diffuse.graph_blend, "average with the graph coupling");
  diffuse_cmd->add_flag("--unit-rowsum-form", diffuse.unit_rowsum_form, "use (1 - tau) Z + tau S Z");
  diffuse_cmd->add_flag("--center", diffuse.center, "column-center the initial embeddings");

  AuditOpts audit;
  auto* audit_cmd = app.add_subcommand("audit", "run the property audit suites");
  add_common(audit_cmd, audit.common);
  audit_cmd->add_option("--suite", audit.suite, "suite name or all")->capture_default_str();
  audit_cmd->add_option("--seeds", audit.seeds, "seeds per suite (0 = suite default)")
      ->capture_default_str();

  TrainCmdOpts train;
  auto* train_cmd = app.add_subcommand("train", "train a diffusion model");
  add_common(train_cmd, train.common);
  add_data(train_cmd, train.data);
  add_model(train_cmd, train.model);
  train_cmd->add_option("--lr", train.train.lr, "learning rate")->capture_default_str();
  train_cmd->add_option("--weight-decay", train.train.weight_decay, "decoupled weight decay")
      ->capture_default_str();
  train_cmd->add_option("--epochs", train.train.epochs, "maximum epochs")->capture_default_str();
  train_cmd->add_option("--patience", train.train.patience, "early stopping patience")
      ->capture_default_str();
  train_cmd->add_option("--batch-size", train.train.batch_size, "nodes per batch (0 = full)")
      ->capture_default_str();
  train_cmd->add_option("--metric", train.train.metric, "accuracy | rocauc | mse")
      ->capture_default_str()
      ->check(CLI::IsMember(kMetrics));
  train_cmd->add_option("--seeds", train.train.seeds, "consecutive seeds to run")
      ->capture_default_str();

  EvalOpts eval;
  auto* eval_cmd = app.add_subcommand("eval", "evaluate a checkpoint");
  add_common(eval_cmd, eval.common);
  add_data(eval_cmd, eval.data);
  eval_cmd->add_option("--checkpoint", eval.checkpoint, "checkpoint.json")->required();
  eval_cmd->add_option("--split", eval.split, "train | val | test")
      ->capture_default_str()
      ->check(CLI::IsMember({"train", "val", "test"}));
  eval_cmd->add_option("--metric", eval.metric, "accuracy | rocauc | mse")
      ->capture_default_str()
      ->check(CLI::IsMember(kMetrics));

  LandscapeOpts landscape;
  auto* landscape_cmd = app.add_subcommand("landscape", "tabulate penalty functions");
  add_common(landscape_cmd, landscape.common);
  landscape_cmd->add_option("--penalty", landscape.penalties, "penalty families")
      ->capture_default_str()
      ->delimiter(',')
      ->check(CLI::IsMember(kPenalties));
  landscape_cmd->add_option("--dim", landscape.dim, "embedding dimension for softmax")
      ->capture_default_str();

  try {
    std::vector<std::string> args(argv, argv + argc);
    args = merge_config(std::move(args), {"synth", "diffuse", "audit", "train", "eval", "landscape"});
    args.erase(args.begin());
    std::reverse(args.begin(), args.end());
    app.parse(args);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitUsage;
  } catch (const ecdiff::Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitError;
  }

  try {
    if (synth_cmd->parsed()) return run_synth(synth, resolved_config(synth_cmd));
    if (diffuse_cmd->parsed()) return run_diffuse(diffuse, resolved_config(diffuse_cmd));
    if (audit_cmd->parsed()) return run_audit_cmd(audit, resolved_config(audit_cmd));
    if (train_cmd->parsed()) return run_train(train, resolved_config(train_cmd));
    if (eval_cmd->parsed()) return run_eval(eval, resolved_config(eval_cmd));
    if (landscape_cmd->parsed()) return run_landscape(landscape, resolved_config(landscape_cmd));
  } catch (const UsageError& e) {
    std::cerr << "usage error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitError;
  }
  return kExitUsage;
}
