#pragma once

#include <array>
#include <string>
#include <utility>
#include <vector>

#include "hoptrace/assignment.hpp"
#include "hoptrace/knowledge_store.hpp"
#include "hoptrace/types.hpp"

namespace hoptrace {

/// Which gold steps are recovered by exact evidence-id matches. Each
/// predicted step is consumed at most once; duplicates credit once.
std::vector<bool> exact_hits(const ReasoningGraph& pred, const ReasoningGraph& gold);

/// Hit per step: recovered gold steps / gold steps. Throws EmptyGoldGraph.
double hps_exact(const ReasoningGraph& pred, const ReasoningGraph& gold);

struct MatchedPair {
  int gold_index = 0;  // 1-based step index
  int pred_index = 0;  // 1-based step index
  double similarity = 0.0;
};

struct AlignmentResult {
  std::vector<MatchedPair> matched_pairs;
  double total_weight = 0.0;
  double hps = 0.0;
  std::vector<std::pair<double, double>> soft_hps_by_tau;  // (tau, score), input order
  int rd = 0;
  int delta_step = 0;
};

inline const std::vector<double> kDefaultTaus = {1.0, 0.95, 0.90, 0.85};

/// Gold x pred evidence similarity: 1 for identical ids, stored-embedding
/// cosine otherwise (kept strictly below 1), 0 across modalities or when a
/// predicted step retrieved nothing.
WeightMatrix evidence_similarity(const ReasoningGraph& pred, const ReasoningGraph& gold,
                                 const KnowledgeStore& kb);

/// Order-free step alignment. The matching maximizes the number of exact
/// evidence hits first and total similarity second, so soft-HPS at tau = 1
/// coincides with exact HPS. Soft-HPS(tau) counts matched pairs with
/// similarity >= tau.
AlignmentResult align_soft(const ReasoningGraph& pred, const ReasoningGraph& gold,
                           const KnowledgeStore& kb, const std::vector<double>& taus = kDefaultTaus);

struct RolloutDeviation {
  int rd = 0;
  int delta_step = 0;
};

RolloutDeviation rollout_deviation(const ReasoningGraph& pred, const ReasoningGraph& gold);

/// Delta-step report bins: <=-3, -2, -1, 0, 1, 2, 3, >=4.
inline constexpr std::size_t kDeltaStepBins = 8;
std::size_t delta_step_bin(int delta_step);
std::string_view delta_step_bin_label(std::size_t bin);

struct CoverageCell {
  std::size_t covered = 0;
  std::size_t gold = 0;

  /// Percent, or -1 for an empty cell.
  double percent() const { return gold == 0 ? -1.0 : 100.0 * static_cast<double>(covered) / gold; }
  std::string render() const;
};

/// Cells indexed [modality][query_has_image]; modality 0 = text, 1 = image.
struct ModalityCoverage {
  std::array<std::array<CoverageCell, 2>, 2> cells{};

  CoverageCell& at(Modality m, bool with_image) {
    return cells[m == Modality::kImage ? 1 : 0][with_image ? 1 : 0];
  }
  const CoverageCell& at(Modality m, bool with_image) const {
    return cells[m == Modality::kImage ? 1 : 0][with_image ? 1 : 0];
  }
  CoverageCell overall(Modality m) const;
};

struct CoverageInput {
  const ReasoningGraph* pred = nullptr;
  const ReasoningGraph* gold = nullptr;
  bool query_has_image = false;
};

ModalityCoverage modality_coverage(const std::vector<CoverageInput>& results);

}  // namespace hoptrace
