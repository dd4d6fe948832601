#include "ecdiff/model.hpp"

#include <cmath>
#include <fstream>
#include <memory>
#include <random>
#include <vector>

#include <nlohmann/json.hpp>

#include "ecdiff/errors.hpp"
#include "ecdiff/io.hpp"

namespace ecdiff {

using nlohmann::json;

ModelVariant parse_model_variant(std::string_view name) {
  if (name == "simple") return ModelVariant::kSimple;
  if (name == "advanced") return ModelVariant::kAdvanced;
  if (name == "mlp") return ModelVariant::kMlp;
  throw ParameterError("unknown model variant: " + std::string(name));
}

std::string_view to_string(ModelVariant v) {
  switch (v) {
    case ModelVariant::kSimple: return "simple";
    case ModelVariant::kAdvanced: return "advanced";
    case ModelVariant::kMlp: return "mlp";
  }
  return "?";
}

Activation parse_activation(std::string_view name) {
  if (name == "none") return Activation::kNone;
  if (name == "relu") return Activation::kRelu;
  throw ParameterError("unknown activation: " + std::string(name));
}

std::string_view to_string(Activation a) { return a == Activation::kRelu ? "relu" : "none"; }

void ModelConfig::validate() const {
  if (input_dim == 0 || hidden_dim == 0 || output_dim == 0) {
    throw ParameterError("model dimensions must be positive");
  }
  if (layers == 0) throw ParameterError("model needs at least one propagation layer");
  if (heads == 0) throw ParameterError("model needs at least one head");
  if (!(tau >= 0.0 && tau <= 1.0)) {
    throw ParameterError("tau must lie in [0, 1], got " + std::to_string(tau));
  }
}

std::string input_weight_name() { return "input.W"; }
std::string input_bias_name() { return "input.b"; }
std::string output_weight_name() { return "output.W"; }
std::string output_bias_name() { return "output.b"; }

std::string projection_name(std::size_t layer, std::size_t head, char which) {
  return "layer" + std::to_string(layer) + ".head" + std::to_string(head) + ".W" + which;
}

namespace {

std::string projections(const ModelConfig& cfg) {
  if (!cfg.use_feature_transform) return "";
  return cfg.variant == ModelVariant::kMlp ? "V" : "KQV";
}

struct Shape {
  std::string name;
  std::size_t rows;
  std::size_t cols;
};

std::vector<Shape> param_shapes(const ModelConfig& cfg) {
  std::vector<Shape> out;
  out.push_back({input_weight_name(), cfg.hidden_dim, cfg.input_dim});
  out.push_back({input_bias_name(), 1, cfg.hidden_dim});
  for (std::size_t k = 0; k < cfg.layers; ++k)
    for (std::size_t h = 0; h < cfg.heads; ++h)
      for (char c : projections(cfg)) out.push_back({projection_name(k, h, c), cfg.hidden_dim, cfg.hidden_dim});
  out.push_back({output_weight_name(), cfg.hidden_dim, cfg.output_dim});
  out.push_back({output_bias_name(), 1, cfg.output_dim});
  return out;
}

}  // namespace

ParameterStore init_model(const ModelConfig& cfg, std::uint64_t seed) {
  cfg.validate();
  std::mt19937_64 rng(seed);
  ParameterStore store;
  for (const auto& s : param_shapes(cfg)) {
    Matrix m(s.rows, s.cols);
    if (s.rows != 1) {  // biases stay zero
      const double bound = std::sqrt(6.0 / static_cast<double>(s.rows + s.cols));
      std::uniform_real_distribution<double> dist(-bound, bound);
      for (double& v : m.data()) v = dist(rng);
    }
    store.add(s.name, std::move(m));
  }
  return store;
}

std::size_t count_params(const ModelConfig& cfg) {
  cfg.validate();
  const std::size_t d = cfg.hidden_dim;
  return cfg.input_dim * d + d + cfg.layers * cfg.heads * projections(cfg).size() * d * d +
         d * cfg.output_dim + cfg.output_dim;
}

void validate_params(const ModelConfig& cfg, const ParameterStore& params) {
  const auto shapes = param_shapes(cfg);
  if (params.size() != shapes.size()) {
    throw ContractError("parameter registry has " + std::to_string(params.size()) +
                        " slots, config needs " + std::to_string(shapes.size()));
  }
  for (const auto& s : shapes) {
    if (!params.contains(s.name)) throw ContractError("missing parameter " + s.name);
    const Matrix& m = params.value(s.name);
    if (m.rows() != s.rows || m.cols() != s.cols) {
      throw ContractError("parameter " + s.name + " has shape " + m.shape_string() +
                          ", config needs " + std::to_string(s.rows) + "x" +
                          std::to_string(s.cols));
    }
  }
}

namespace {

void check_inputs(const ModelConfig& cfg, const Matrix& x, const Graph* g) {
  cfg.validate();
  if (x.cols() != cfg.input_dim) {
    throw DimensionError("model expects " + std::to_string(cfg.input_dim) +
                         " input features, got " + x.shape_string());
  }
  if (cfg.use_graph && !g) throw ContractError("model with graph channel needs a graph");
  if (g && g->num_nodes() != x.rows()) {
    throw DimensionError("graph has " + std::to_string(g->num_nodes()) + " nodes, features " +
                         x.shape_string());
  }
}

}  // namespace

Var forward(Tape& tape, const ModelConfig& cfg, const Matrix& x, const Graph* g) {
  check_inputs(cfg, x, g);
  const std::size_t n = x.rows();
  const bool transform = cfg.use_feature_transform;

  std::shared_ptr<const SparseMatrix> adj;
  if (cfg.use_graph) {
    adj = std::make_shared<SparseMatrix>(normalized_adjacency_sparse(*g, AdjacencyMode::kSym));
  }
  const Var ones_row = tape.constant(Matrix(1, n, 1.0));

  Var z = tape.matmul(tape.constant(x), tape.transpose(tape.param(input_weight_name())));
  z = tape.add(z, tape.broadcast_row(tape.param(input_bias_name()), n));
  z = tape.relu(tape.layer_norm(z));
  const Var z0 = z;

  for (std::size_t k = 0; k < cfg.layers; ++k) {
    std::vector<Var> heads;
    for (std::size_t h = 0; h < cfg.heads; ++h) {
      auto project = [&](char which) {
        return transform
                   ? tape.matmul(z, tape.transpose(tape.param(projection_name(k, h, which))))
                   : z;
      };
      const Var v = project('V');
      Var p;
      if (cfg.variant == ModelVariant::kMlp) {
        p = v;
      } else {
        const Var q = tape.row_l2_normalize(project('Q'));
        const Var kk = tape.row_l2_normalize(project('K'));
        if (cfg.variant == ModelVariant::kSimple) {
          // R = diag^-1(N + Q~ (K~^T 1)),  P = R [1 (1^T V) + Q~ (K~^T V)]
          const Var k_sum = tape.matmul(ones_row, kk);
          const Var v_sum = tape.matmul(ones_row, v);
          const Var num = tape.add(tape.broadcast_row(v_sum, n),
                                   tape.matmul(q, tape.matmul(tape.transpose(kk), v)));
          const Var den =
              tape.add_scalar(tape.matmul(q, tape.transpose(k_sum)), static_cast<double>(n));
          p = tape.diag_scale_rows(num, tape.reciprocal(den));
        } else {
          const Var a = tape.sigmoid(tape.matmul(q, tape.transpose(kk)));
          p = tape.diag_scale_rows(tape.matmul(a, v), tape.reciprocal(tape.row_sum(a)));
        }
      }
      if (adj) p = tape.add(p, tape.sparse_matmul(adj, v));
      heads.push_back(p);
    }
    const Var p_bar = heads.size() == 1 ? heads.front() : tape.mean(heads);
    Var blend = tape.add(tape.scale(p_bar, cfg.tau), tape.scale(z, 1.0 - cfg.tau));
    if (cfg.use_source) blend = tape.add(blend, tape.scale(z0, cfg.tau));
    z = tape.layer_norm(blend);
    if (cfg.activation == Activation::kRelu) z = tape.relu(z);
  }

  Var out = tape.matmul(z, tape.param(output_weight_name()));
  return tape.add(out, tape.broadcast_row(tape.param(output_bias_name()), n));
}

Matrix predict(const ParameterStore& params, const ModelConfig& cfg, const Matrix& x,
               const Graph* g) {
  ParameterStore copy = params;
  Tape tape(&copy);
  return tape.value(forward(tape, cfg, x, g));
}

namespace {

Matrix layer_norm_rows(const Matrix& m) {
  Matrix out(m.rows(), m.cols());
  const double d = static_cast<double>(m.cols());
  for (std::size_t i = 0; i < m.rows(); ++i) {
    auto r = m.row(i);
    double mean = 0.0;
    for (double v : r) mean += v;
    mean /= d;
    double var = 0.0;
    for (double v : r) var += (v - mean) * (v - mean);
    var /= d;
    const double inv = 1.0 / std::sqrt(var + kLayerNormEps);
    for (std::size_t j = 0; j < r.size(); ++j) out(i, j) = (r[j] - mean) * inv;
  }
  return out;
}

Matrix relu(Matrix m) {
  for (double& v : m.data()) v = v > 0.0 ? v : 0.0;
  return m;
}

Matrix add_row(Matrix m, const Matrix& row) {
  for (std::size_t i = 0; i < m.rows(); ++i)
    for (std::size_t j = 0; j < m.cols(); ++j) m(i, j) += row(0, j);
  return m;
}

Matrix row_normalized(Matrix a) {
  for (std::size_t i = 0; i < a.rows(); ++i) {
    double total = 0.0;
    for (double v : a.row(i)) total += v;
    for (double& v : a.row(i)) v /= total;
  }
  return a;
}

}  // namespace

Matrix advanced_attention(const Matrix& q_normed, const Matrix& k_normed) {
  Matrix a = matmul(q_normed, transpose(k_normed));
  for (double& v : a.data()) v = 1.0 / (1.0 + std::exp(-v));
  return row_normalized(std::move(a));
}

Matrix reference_forward(const ParameterStore& params, const ModelConfig& cfg, const Matrix& x,
                         const Graph* g) {
  check_inputs(cfg, x, g);
  validate_params(cfg, params);
  const std::size_t n = x.rows();
  Matrix adj;
  if (cfg.use_graph) adj = normalized_adjacency(*g, AdjacencyMode::kSym);

  Matrix z = add_row(matmul(x, transpose(params.value(input_weight_name()))),
                     params.value(input_bias_name()));
  z = relu(layer_norm_rows(z));
  const Matrix z0 = z;
  for (std::size_t k = 0; k < cfg.layers; ++k) {
    Matrix p_bar(n, cfg.hidden_dim);
    for (std::size_t h = 0; h < cfg.heads; ++h) {
      auto project = [&](char which) {
        return cfg.use_feature_transform
                   ? matmul(z, transpose(params.value(projection_name(k, h, which))))
                   : z;
      };
      const Matrix v = project('V');
      Matrix p;
      if (cfg.variant == ModelVariant::kMlp) {
        p = v;
      } else {
        const Matrix q = row_l2_normalize(project('Q'));
        const Matrix kk = row_l2_normalize(project('K'));
        if (cfg.variant == ModelVariant::kSimple) {
          Matrix a = matmul(q, transpose(kk));
          for (double& e : a.data()) e += 1.0;
          p = matmul(row_normalized(std::move(a)), v);
        } else {
          p = matmul(advanced_attention(q, kk), v);
        }
      }
      if (cfg.use_graph) p = add(p, matmul(adj, v));
      p_bar = add(p_bar, p);
    }
    p_bar = scale(p_bar, 1.0 / static_cast<double>(cfg.heads));
    Matrix blend = add(scale(p_bar, cfg.tau), scale(z, 1.0 - cfg.tau));
    if (cfg.use_source) blend = add(blend, scale(z0, cfg.tau));
    z = layer_norm_rows(blend);
    if (cfg.activation == Activation::kRelu) z = relu(std::move(z));
  }
  return add_row(matmul(z, params.value(output_weight_name())), params.value(output_bias_name()));
}

// ---------------------------------------------------------------------------
// Checkpoints

namespace {

json config_to_json(const ModelConfig& c) {
  return {{"variant", to_string(c.variant)},
          {"input_dim", c.input_dim},
          {"hidden_dim", c.hidden_dim},
          {"output_dim", c.output_dim},
          {"layers", c.layers},
          {"heads", c.heads},
          {"tau", c.tau},
          {"use_graph", c.use_graph},
          {"use_feature_transform", c.use_feature_transform},
          {"use_source", c.use_source},
          {"activation", to_string(c.activation)}};
}

ModelConfig config_from_json(const json& j) {
  ModelConfig c;
  c.variant = parse_model_variant(j.at("variant").get<std::string>());
  c.input_dim = j.at("input_dim").get<std::size_t>();
  c.hidden_dim = j.at("hidden_dim").get<std::size_t>();
  c.output_dim = j.at("output_dim").get<std::size_t>();
  c.layers = j.at("layers").get<std::size_t>();
  c.heads = j.at("heads").get<std::size_t>();
  c.tau = j.at("tau").get<double>();
  c.use_graph = j.at("use_graph").get<bool>();
  c.use_feature_transform = j.at("use_feature_transform").get<bool>();
  c.use_source = j.at("use_source").get<bool>();
  c.activation = parse_activation(j.at("activation").get<std::string>());
  return c;
}

json matrix_to_json(const Matrix& m) {
  json rows = json::array();
  for (std::size_t i = 0; i < m.rows(); ++i) {
    auto r = m.row(i);
    rows.push_back(std::vector<double>(r.begin(), r.end()));
  }
  return rows;
}

Matrix matrix_from_json(const json& j, const std::string& name) {
  if (!j.is_array() || j.empty()) throw ContractError("parameter " + name + " is not a matrix");
  const std::size_t rows = j.size();
  const std::size_t cols = j.front().size();
  std::vector<double> data;
  data.reserve(rows * cols);
  for (const auto& r : j) {
    if (!r.is_array() || r.size() != cols) {
      throw ContractError("parameter " + name + " has ragged rows");
    }
    for (const auto& v : r) data.push_back(v.get<double>());
  }
  return Matrix(rows, cols, std::move(data));
}

}  // namespace

void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path) {
  json params = json::object();
  for (const auto& name : ckpt.params.names()) params[name] = matrix_to_json(ckpt.params.value(name));
  json meta = {{"epoch", ckpt.meta.epoch}, {"seed", ckpt.meta.seed}, {"metric", ckpt.meta.metric}};
  for (const auto& [k, v] : ckpt.meta.values) meta[k] = v;
  const json doc = {{"config", config_to_json(ckpt.config)}, {"params", params}, {"meta", meta}};
  write_file_atomic(path, doc.dump(1) + "\n");
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw FormatError(path.string(), 0, "cannot open checkpoint");
  json doc;
  try {
    doc = json::parse(in);
  } catch (const json::parse_error& e) {
    throw FormatError(path.string(), 0, e.what());
  }
  Checkpoint ckpt;
  try {
    ckpt.config = config_from_json(doc.at("config"));
    const auto& meta = doc.at("meta");
    ckpt.meta.epoch = meta.at("epoch").get<std::size_t>();
    ckpt.meta.seed = meta.at("seed").get<std::uint64_t>();
    ckpt.meta.metric = meta.at("metric").get<std::string>();
    for (const auto& [k, v] : meta.items()) {
      if (v.is_number_float()) ckpt.meta.values[k] = v.get<double>();
    }
    // Register in the canonical order so optimizer state and re-saves line up.
    const auto& params = doc.at("params");
    for (const auto& s : param_shapes(ckpt.config)) {
      if (!params.contains(s.name)) throw ContractError("checkpoint lacks parameter " + s.name);
      ckpt.params.add(s.name, matrix_from_json(params.at(s.name), s.name));
    }
    if (params.size() != ckpt.params.size()) {
      throw ContractError("checkpoint has parameters the config does not use");
    }
  } catch (const json::exception& e) {
    throw FormatError(path.string(), 0, e.what());
  }
  validate_params(ckpt.config, ckpt.params);
  return ckpt;
}

}  // namespace ecdiff
