#include "ecdiff/coupling.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <string>

#include "ecdiff/errors.hpp"

namespace ecdiff {

namespace {

constexpr double kDomainSlack = 1e-9;

void check_z_sq(double z_sq, const char* who) {
  if (!(z_sq >= 0.0 && z_sq <= kMaxSquaredDistance + kDomainSlack)) {
    throw DomainError(std::string(who) + ": z^2 = " + std::to_string(z_sq) +
                      " is outside [0, 4]");
  }
}

double softmax_scale(const PenaltyFamily& p) {
  if (p.kind == PenaltyKind::kKernel) return 1.0;
  if (!(p.dim_scale > 0.0)) throw ParameterError("softmax penalty needs dim_scale > 0");
  return std::exp(1.0 / std::sqrt(p.dim_scale));
}

}  // namespace

PenaltyKind parse_penalty_kind(std::string_view name) {
  if (name == "simple") return PenaltyKind::kSimple;
  if (name == "advanced") return PenaltyKind::kAdvanced;
  if (name == "softmax") return PenaltyKind::kSoftmax;
  if (name == "quadratic") return PenaltyKind::kQuadratic;
  if (name == "kernel") return PenaltyKind::kKernel;
  throw ParameterError("unknown penalty family: " + std::string(name));
}

std::string_view to_string(PenaltyKind kind) {
  switch (kind) {
    case PenaltyKind::kSimple: return "simple";
    case PenaltyKind::kAdvanced: return "advanced";
    case PenaltyKind::kSoftmax: return "softmax";
    case PenaltyKind::kQuadratic: return "quadratic";
    case PenaltyKind::kKernel: return "kernel";
  }
  return "?";
}

double penalty_f(const PenaltyFamily& p, double z_sq) {
  check_z_sq(z_sq, "penalty_f");
  switch (p.kind) {
    case PenaltyKind::kSimple: return 2.0 - 0.5 * z_sq;
    case PenaltyKind::kAdvanced: return 1.0 / (1.0 + std::exp(0.5 * z_sq - 1.0));
    case PenaltyKind::kSoftmax:
    case PenaltyKind::kKernel: return std::exp(1.0 - 0.5 * z_sq) * softmax_scale(p);
    case PenaltyKind::kQuadratic: return 1.0;
  }
  return 0.0;
}

double penalty_delta(const PenaltyFamily& p, double z_sq) {
  check_z_sq(z_sq, "penalty_delta");
  switch (p.kind) {
    case PenaltyKind::kSimple: return 2.0 * z_sq - 0.25 * z_sq * z_sq;
    case PenaltyKind::kAdvanced:
      return z_sq - 2.0 * std::log1p(std::exp(0.5 * z_sq - 1.0)) +
             2.0 * std::log1p(std::exp(-1.0));
    case PenaltyKind::kSoftmax:
    case PenaltyKind::kKernel: {
      const double c = softmax_scale(p);
      return -2.0 * c * std::exp(1.0 - 0.5 * z_sq) + 2.0 * c * std::exp(1.0);
    }
    case PenaltyKind::kQuadratic: return z_sq;
  }
  return 0.0;
}

ScoreRange penalty_f_range(const PenaltyFamily& p) {
  return {penalty_f(p, kMaxSquaredDistance), penalty_f(p, 0.0)};
}

double penalty_conjugate(const PenaltyFamily& p, double omega) {
  const auto range = penalty_f_range(p);
  const double slack = kDomainSlack * std::max(1.0, std::abs(range.hi));
  if (!(omega >= range.lo - slack && omega <= range.hi + slack)) {
    throw DomainError("penalty_conjugate: omega = " + std::to_string(omega) +
                      " is outside the score range [" + std::to_string(range.lo) + ", " +
                      std::to_string(range.hi) + "]");
  }
  auto objective = [&](double y) { return omega * y - penalty_delta(p, y); };

  if (p.kind == PenaltyKind::kQuadratic) return 0.0;  // omega = 1, objective identically 0
  if (p.kind == PenaltyKind::kSimple) {
    const double y = std::clamp(2.0 * (2.0 - omega), 0.0, kMaxSquaredDistance);
    return objective(y);
  }

  // omega*y - delta(y) is convex in y, so golden-section search finds the
  // minimum; endpoints are checked separately for boundary optima.
  const double inv_phi = (std::sqrt(5.0) - 1.0) / 2.0;
  double a = 0.0;
  double b = kMaxSquaredDistance;
  double c = b - inv_phi * (b - a);
  double d = a + inv_phi * (b - a);
  double fc = objective(c);
  double fd = objective(d);
  while (b - a > 1e-10) {
    if (fc < fd) {
      b = d;
      d = c;
      fd = fc;
      c = b - inv_phi * (b - a);
      fc = objective(c);
    } else {
      a = c;
      c = d;
      fc = fd;
      d = a + inv_phi * (b - a);
      fd = objective(d);
    }
  }
  return std::min({objective(0.5 * (a + b)), objective(0.0), objective(kMaxSquaredDistance)});
}

CouplingFamily parse_coupling_family(std::string_view name) {
  if (name == "identity") return CouplingFamily::kIdentity;
  if (name == "all_one") return CouplingFamily::kAllOne;
  if (name == "gcn_sym") return CouplingFamily::kGcnSym;
  if (name == "gin") return CouplingFamily::kGin;
  if (name == "gat_masked") return CouplingFamily::kGatMasked;
  if (name == "attention") return CouplingFamily::kAttention;
  throw ParameterError("unknown coupling family: " + std::string(name));
}

std::string_view to_string(CouplingFamily family) {
  switch (family) {
    case CouplingFamily::kIdentity: return "identity";
    case CouplingFamily::kAllOne: return "all_one";
    case CouplingFamily::kGcnSym: return "gcn_sym";
    case CouplingFamily::kGin: return "gin";
    case CouplingFamily::kGatMasked: return "gat_masked";
    case CouplingFamily::kAttention: return "attention";
  }
  return "?";
}

bool is_attention(CouplingFamily family) {
  return family == CouplingFamily::kAttention || family == CouplingFamily::kGatMasked;
}

void CouplingSpec::validate() const {
  const std::string name(to_string(family));
  if (is_attention(family) && !penalty) {
    throw ParameterError(name + " coupling needs a penalty family");
  }
  if (!is_attention(family) && penalty) {
    throw ParameterError(name + " coupling takes no penalty family");
  }
  if (family == CouplingFamily::kGatMasked && !graph_mask) {
    throw ParameterError("gat_masked coupling needs a graph mask");
  }
}

Matrix build_coupling(const CouplingSpec& spec, const Matrix& z, const Graph* g,
                      CouplingLog* log) {
  spec.validate();
  switch (spec.family) {
    case CouplingFamily::kIdentity: return Matrix::identity(z.rows());
    case CouplingFamily::kAllOne: {
      const std::size_t n = z.rows();
      return Matrix(n, n, n ? 1.0 / static_cast<double>(n) : 0.0);
    }
    case CouplingFamily::kGcnSym:
    case CouplingFamily::kGin: {
      if (!g) throw ParameterError(std::string(to_string(spec.family)) + " coupling needs a graph");
      if (g->num_nodes() != z.rows()) {
        throw DimensionError("coupling graph has " + std::to_string(g->num_nodes()) +
                             " nodes, embeddings " + z.shape_string());
      }
      return normalized_adjacency(
          *g, spec.family == CouplingFamily::kGcnSym ? AdjacencyMode::kSym : AdjacencyMode::kGin);
    }
    case CouplingFamily::kGatMasked:
    case CouplingFamily::kAttention: break;
  }

  if (!rows_unit_norm(z, 1e-6)) {
    throw ContractError("attention coupling needs L2-normalized rows");
  }
  const std::size_t n = z.rows();
  const Graph* mask = spec.family == CouplingFamily::kGatMasked ? &*spec.graph_mask : nullptr;
  if (mask && mask->num_nodes() != n) {
    throw DimensionError("gat mask has " + std::to_string(mask->num_nodes()) +
                         " nodes, embeddings " + z.shape_string());
  }
  Matrix s(n, n);
  for (std::size_t i = 0; i < n; ++i) {
    double total = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
      if (mask && j != i && !mask->has_edge(i, j)) continue;
      const double z_sq = std::clamp(2.0 - 2.0 * dot(z.row(i), z.row(j)), 0.0,
                                     kMaxSquaredDistance);
      const double w = penalty_f(*spec.penalty, z_sq);
      s(i, j) = w;
      total += w;
    }
    if (total > 0.0) {
      for (double& v : s.row(i)) v /= total;
    } else {
      for (double& v : s.row(i)) v = 0.0;
      s(i, i) = 1.0;
      if (log) log->degenerate_rows.push_back(i);
    }
  }
  return s;
}

void write_landscape_csv(std::ostream& out, const PenaltyFamily& p) {
  out << "z_sq,f,delta\n";
  char buf[96];
  for (int k = 0; k <= 400; ++k) {
    const double z_sq = 0.01 * k;
    std::snprintf(buf, sizeof buf, "%.2f,%.17g,%.17g\n", z_sq, penalty_f(p, z_sq),
                  penalty_delta(p, z_sq));
    out << buf;
  }
}

}  // namespace ecdiff
