#pragma once

#include <cstddef>
#include <optional>
#include <ostream>
#include <string_view>
#include <vector>

#include "ecdiff/graph.hpp"
#include "ecdiff/matrix.hpp"

namespace ecdiff {

// kKernel is the softmax family without the e^{1/sqrt(d)} factor (a Gaussian
// kernel of bandwidth 1 up to a constant).
enum class PenaltyKind { kSimple, kAdvanced, kSoftmax, kQuadratic, kKernel };

struct PenaltyFamily {
  PenaltyKind kind = PenaltyKind::kSimple;
  // Embedding dimension d; only the softmax family reads it.
  double dim_scale = 1.0;
};

PenaltyKind parse_penalty_kind(std::string_view name);
std::string_view to_string(PenaltyKind kind);

// Upper end of the squared distance between unit vectors.
inline constexpr double kMaxSquaredDistance = 4.0;

// f(z^2): un-normalized attention score, the derivative of delta.
double penalty_f(const PenaltyFamily& p, double z_sq);
// delta(z^2), anchored so delta(0) = 0 for every family.
double penalty_delta(const PenaltyFamily& p, double z_sq);
// Concave conjugate inf_{y in [0,4]} (omega*y - delta(y)). Closed form for
// the simple and quadratic families, golden-section search otherwise.
double penalty_conjugate(const PenaltyFamily& p, double omega);

// [f(4), f(0)], the values an omega may take.
struct ScoreRange {
  double lo;
  double hi;
};
ScoreRange penalty_f_range(const PenaltyFamily& p);

enum class CouplingFamily { kIdentity, kAllOne, kGcnSym, kGin, kGatMasked, kAttention };

CouplingFamily parse_coupling_family(std::string_view name);
std::string_view to_string(CouplingFamily family);
bool is_attention(CouplingFamily family);

struct CouplingSpec {
  CouplingFamily family = CouplingFamily::kIdentity;
  std::optional<PenaltyFamily> penalty;
  std::optional<Graph> graph_mask;

  // Attention families need a penalty, static ones must not carry one, and
  // gat_masked needs a mask. Throws ParameterError.
  void validate() const;
};

// Rows whose masked weights vanished and were replaced by a self-loop.
struct CouplingLog {
  std::vector<std::size_t> degenerate_rows;
};

// S^(k) for `spec`. Static families read `g` (gcn_sym, gin) or nothing;
// attention families read the unit-norm rows of `z`.
Matrix build_coupling(const CouplingSpec& spec, const Matrix& z, const Graph* g = nullptr,
                      CouplingLog* log = nullptr);

// Columns z_sq, f, delta over [0, 4] with step 0.01.
void write_landscape_csv(std::ostream& out, const PenaltyFamily& p);

}  // namespace ecdiff
