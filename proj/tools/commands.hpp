#pragma once

#include <cstddef>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "ecdiff/dataset.hpp"

namespace ecdiff::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitError = 1;
inline constexpr int kExitUsage = 2;
inline constexpr int kExitViolation = 3;

// Bad flag combination detected after parsing; maps to exit code 2.
class UsageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct CommonOpts {
  std::uint64_t seed = 0;
  std::string out = "out";
  std::size_t jobs = 1;
};

struct DataOpts {
  std::string data;
  std::string synth;
  std::string cora;
  SbmParams sbm;
  std::size_t cora_train = 20;
  std::size_t cora_val = 500;
  std::size_t cora_test = 1000;
};

struct ModelOpts {
  std::string variant = "simple";
  std::size_t layers = 2;
  std::size_t hidden = 16;
  std::size_t heads = 1;
  double tau = 0.5;
  bool use_graph = false;
  bool use_source = false;
  bool no_feature_transform = false;
  std::string activation = "none";
};

struct TrainOpts {
  double lr = 0.01;
  double weight_decay = 5e-4;
  std::size_t epochs = 200;
  std::size_t patience = 50;
  std::size_t batch_size = 0;
  std::string metric = "accuracy";
  std::size_t seeds = 1;
};

struct SynthOpts {
  CommonOpts common;
  SbmParams sbm;
};

struct DiffuseOpts {
  CommonOpts common;
  std::string data;
  std::size_t nodes = 16;
  std::size_t dim = 4;
  double edge_prob = 0.3;
  std::string coupling = "gcn_sym";
  std::string penalty = "simple";
  std::vector<double> taus{0.5};
  bool tau_relative = false;
  std::vector<std::size_t> steps{20};
  double beta = 1.0;
  bool use_source = false;
  bool source_grid = false;
  bool graph_blend = false;
  bool unit_rowsum_form = false;
  bool center = false;
};

struct AuditOpts {
  CommonOpts common;
  std::string suite = "all";
  std::size_t seeds = 0;
};

struct TrainCmdOpts {
  CommonOpts common;
  DataOpts data;
  ModelOpts model;
  TrainOpts train;
};

struct EvalOpts {
  CommonOpts common;
  DataOpts data;
  std::string checkpoint;
  std::string split = "test";
  std::string metric = "accuracy";
};

struct LandscapeOpts {
  CommonOpts common;
  std::vector<std::string> penalties{"simple", "advanced", "softmax", "quadratic", "kernel"};
  double dim = 8.0;
};

// Each command returns its exit code. `config` is the resolved flag set
// recorded in the run manifest.
int run_synth(const SynthOpts& o, const nlohmann::json& config);
int run_diffuse(const DiffuseOpts& o, const nlohmann::json& config);
int run_audit_cmd(const AuditOpts& o, const nlohmann::json& config);
int run_train(const TrainCmdOpts& o, const nlohmann::json& config);
int run_eval(const EvalOpts& o, const nlohmann::json& config);
int run_landscape(const LandscapeOpts& o, const nlohmann::json& config);

}  // namespace ecdiff::cli
