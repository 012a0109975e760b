#include "hoptrace/chain_align.hpp"

#include <cmath>
#include <cstdio>
#include <unordered_map>

#include "hoptrace/error.hpp"

namespace hoptrace {

std::vector<bool> exact_hits(const ReasoningGraph& pred, const ReasoningGraph& gold) {
  std::unordered_map<std::string, int> available;
  for (const auto& s : pred.steps) {
    if (!s.evidence_id.empty()) ++available[s.evidence_id];
  }
  std::vector<bool> hit(gold.steps.size(), false);
  for (std::size_t i = 0; i < gold.steps.size(); ++i) {
    auto it = available.find(gold.steps[i].evidence_id);
    if (it != available.end() && it->second > 0) {
      --it->second;
      hit[i] = true;
    }
  }
  return hit;
}

double hps_exact(const ReasoningGraph& pred, const ReasoningGraph& gold) {
  if (gold.steps.empty()) throw Error(ErrorCode::kEmptyGoldGraph, "gold graph has no steps");
  std::size_t n = 0;
  for (bool h : exact_hits(pred, gold)) n += h ? 1 : 0;
  return static_cast<double>(n) / static_cast<double>(gold.steps.size());
}

WeightMatrix evidence_similarity(const ReasoningGraph& pred, const ReasoningGraph& gold,
                                 const KnowledgeStore& kb) {
  static const double kBelowOne = std::nextafter(1.0, 0.0);
  WeightMatrix w(gold.steps.size(), std::vector<double>(pred.steps.size(), 0.0));
  for (std::size_t i = 0; i < gold.steps.size(); ++i) {
    const auto& g = kb.at(gold.steps[i].evidence_id);
    for (std::size_t j = 0; j < pred.steps.size(); ++j) {
      const auto& pid = pred.steps[j].evidence_id;
      if (pid.empty()) continue;
      if (pid == g.id) {
        w[i][j] = 1.0;
        continue;
      }
      const auto& p = kb.at(pid);
      if (p.modality != g.modality) continue;
      w[i][j] = std::min(dot(g.embedding, p.embedding), kBelowOne);
    }
  }
  return w;
}

AlignmentResult align_soft(const ReasoningGraph& pred, const ReasoningGraph& gold,
                           const KnowledgeStore& kb, const std::vector<double>& taus) {
  if (gold.steps.empty()) throw Error(ErrorCode::kEmptyGoldGraph, "gold graph has no steps");
  const WeightMatrix sim = evidence_similarity(pred, gold, kb);

  // Any single exact hit outweighs every possible sum of inexact pairs.
  const double bonus = static_cast<double>(std::min(gold.steps.size(), pred.steps.size())) + 1.0;
  WeightMatrix lexi = sim;
  for (std::size_t i = 0; i < lexi.size(); ++i) {
    for (std::size_t j = 0; j < lexi[i].size(); ++j) {
      if (pred.steps[j].evidence_id == gold.steps[i].evidence_id) lexi[i][j] += bonus;
    }
  }
  const Assignment a = max_weight_matching(lexi);

  AlignmentResult r;
  for (std::size_t i = 0; i < a.row_to_col.size(); ++i) {
    const int j = a.row_to_col[i];
    if (j < 0) continue;
    const double s = sim[i][static_cast<std::size_t>(j)];
    if (s <= 0.0) continue;
    r.matched_pairs.push_back({static_cast<int>(i + 1), j + 1, s});
    r.total_weight += s;
  }
  const double g = static_cast<double>(gold.steps.size());
  r.hps = hps_exact(pred, gold);
  for (double tau : taus) {
    std::size_t n = 0;
    for (const auto& p : r.matched_pairs) n += p.similarity >= tau ? 1 : 0;
    r.soft_hps_by_tau.emplace_back(tau, static_cast<double>(n) / g);
  }
  const auto dev = rollout_deviation(pred, gold);
  r.rd = dev.rd;
  r.delta_step = dev.delta_step;
  return r;
}

RolloutDeviation rollout_deviation(const ReasoningGraph& pred, const ReasoningGraph& gold) {
  const int delta = static_cast<int>(pred.steps.size()) - static_cast<int>(gold.steps.size());
  return {delta < 0 ? -delta : delta, delta};
}

std::size_t delta_step_bin(int delta_step) {
  if (delta_step <= -3) return 0;
  if (delta_step >= 4) return 7;
  return static_cast<std::size_t>(delta_step + 3);
}

std::string_view delta_step_bin_label(std::size_t bin) {
  static constexpr std::string_view kLabels[kDeltaStepBins] = {"<=-3", "-2", "-1", "0",
                                                               "1",    "2",  "3",  ">=4"};
  return bin < kDeltaStepBins ? kLabels[bin] : "?";
}

std::string CoverageCell::render() const {
  if (gold == 0) return "–";
  char buf[64];
  std::snprintf(buf, sizeof buf, "%zu/%zu (%.2f%%)", covered, gold, percent());
  return buf;
}

CoverageCell ModalityCoverage::overall(Modality m) const {
  CoverageCell c;
  for (bool with : {false, true}) {
    c.covered += at(m, with).covered;
    c.gold += at(m, with).gold;
  }
  return c;
}

ModalityCoverage modality_coverage(const std::vector<CoverageInput>& results) {
  ModalityCoverage cov;
  for (const auto& r : results) {
    const auto hits = exact_hits(*r.pred, *r.gold);
    for (std::size_t i = 0; i < r.gold->steps.size(); ++i) {
      auto& cell = cov.at(r.gold->steps[i].modality, r.query_has_image);
      ++cell.gold;
      if (hits[i]) ++cell.covered;
    }
  }
  return cov;
}

}  // namespace hoptrace
