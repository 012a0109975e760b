#pragma once

#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "hoptrace/backend.hpp"
#include "hoptrace/knowledge_store.hpp"
#include "hoptrace/types.hpp"

namespace hoptrace {

struct HavePolicy {
  double theta = 0.05;
  int max_redundant = 2;
};

enum class Decision { kKeep, kShrink, kDrop };

std::string_view to_string(Decision d);
Decision parse_decision(std::string_view s);

struct UtilityDetail {
  double f1_full = 0.0;
  double f1_ablated = 0.0;
  double util = 0.0;
};

struct HopVerdict {
  int index = 0;
  double util = 0.0;
  double f1_full = 0.0;
  double f1_ablated = 0.0;
  int nav = 0;
  bool redundant = false;

  bool operator==(const HopVerdict&) const = default;
};

struct HaveVerdict {
  std::string sample_id;
  std::vector<HopVerdict> hops;
  int redundant_count = 0;
  Decision decision = Decision::kKeep;

  std::vector<int> redundant_indices() const;
  bool operator==(const HaveVerdict&) const = default;
};

nlohmann::ordered_json verdict_to_json(const HaveVerdict& v);

/// Answer-F1 drop when hop t's evidence is withheld from the golden prompt.
/// Both completions go to `backend` (and `transcript` when given).
UtilityDetail context_utility(const Sample& sample, const Backend& backend, const KnowledgeStore& kb,
                              int t, std::vector<TranscriptEntry>* transcript = nullptr);

/// 1 iff entities of a_t reappear in a later sub-question. The last hop is 0.
int navigational_role(const ReasoningGraph& gold, int t);

inline bool is_redundant(double util, int nav, double theta) { return util < theta && nav == 0; }

Decision decide(int redundant_count, int max_redundant);

/// Utility and navigational role for every hop, then the sample decision.
/// The full-evidence completion is requested once and shared by all hops.
HaveVerdict have_verdict(const Sample& sample, const Backend& backend, const KnowledgeStore& kb,
                         const HavePolicy& policy,
                         std::vector<TranscriptEntry>* transcript = nullptr);

/// Decision from already-measured utilities (no model calls).
HaveVerdict verdict_from_utilities(const Sample& sample, const std::vector<UtilityDetail>& utils,
                                   const HavePolicy& policy);

/// Removes the redundant hops, asks the rewriter to repair the remaining
/// sub-questions, and revalidates. Throws RewriteValidationFailure.
Sample hop_shrink(const Sample& sample, const HaveVerdict& verdict, const Backend& rewriter,
                  const KnowledgeStore& kb, std::vector<TranscriptEntry>* transcript = nullptr);

/// The chain the rewriter is asked to repair, in dataset-record form.
nlohmann::ordered_json shrink_request(const Sample& sample, const HaveVerdict& verdict);

struct ConfoundingItem {
  int step = 0;
  std::string item_id;
  std::string reply;

  bool operator==(const ConfoundingItem&) const = default;
};

/// Asks the verifier whether any unused item from the same cluster answers a
/// sub-question on its own. Items without a cluster id are never compared.
std::vector<ConfoundingItem> uniqueness_check(const Sample& sample, const KnowledgeStore& kb,
                                              const Backend& verifier,
                                              std::vector<TranscriptEntry>* transcript = nullptr);

std::string uniqueness_prompt(const ReasoningStep& step, const KnowledgeItem& candidate);

struct QualityScores {
  int factual_correctness = 0;
  int step_necessity = 0;
  int clarity = 0;
  int multimodal_alignment = 0;

  double mean() const {
    return (factual_correctness + step_necessity + clarity + multimodal_alignment) / 4.0;
  }
  bool operator==(const QualityScores&) const = default;
};

/// Parses four integer scores in 1..5; anything else is JudgeParseFailure.
QualityScores parse_quality_scores(std::string_view reply);

QualityScores quality_score(const Sample& sample, const Backend& checker,
                            std::vector<TranscriptEntry>* transcript = nullptr);

// ---------------------------------------------------------------------------
// End-to-end curation

struct CurationBackends {
  Backend answerer;                 // utility ablations
  std::optional<Backend> reviser;   // hop rewriting and uniqueness checks
  std::optional<Backend> checker;   // final quality scoring
};

struct CurationPolicy {
  HavePolicy have;
  bool check_uniqueness = true;
  double min_quality = 0.0;  // mean score below this rejects the sample
};

enum class CurationOutcome { kKept, kShrunk, kDropped, kQuarantined, kConfounded, kLowQuality };

std::string_view to_string(CurationOutcome o);

struct CurationRecord {
  std::string sample_id;
  HaveVerdict verdict;
  CurationOutcome outcome = CurationOutcome::kKept;
  std::vector<ConfoundingItem> confounders;
  std::optional<QualityScores> quality;
  std::string reason;
  std::optional<Sample> curated;  // present for kept and shrunk samples

  bool accepted() const {
    return outcome == CurationOutcome::kKept || outcome == CurationOutcome::kShrunk;
  }
};

nlohmann::ordered_json curation_record_to_json(const CurationRecord& r);

/// Key entities of a gold graph: the entities of its final answer.
std::vector<std::string> key_entities(const ReasoningGraph& g);

CurationRecord curate_sample(const Sample& sample, const CurationBackends& backends,
                             const KnowledgeStore& kb, const CurationPolicy& policy);

struct CurationFunnel {
  std::size_t input = 0;
  std::size_t kept = 0;
  std::size_t shrunk = 0;
  std::size_t dropped = 0;
  std::size_t quarantined = 0;
  std::size_t confounded = 0;
  std::size_t low_quality = 0;
  std::size_t after_filter = 0;  // not dropped by the redundancy rule
  std::size_t output = 0;

  nlohmann::ordered_json to_json() const;
};

CurationFunnel funnel(const std::vector<CurationRecord>& records);

}  // namespace hoptrace
