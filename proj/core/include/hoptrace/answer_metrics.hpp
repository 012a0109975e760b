#pragma once

#include <array>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "hoptrace/agent.hpp"
#include "hoptrace/backend.hpp"
#include "hoptrace/types.hpp"

namespace hoptrace {

/// Answer normalization: ASCII lowercase, drop ASCII punctuation, split on
/// whitespace, drop the articles a/an/the.
std::vector<std::string> normalize_answer_tokens(std::string_view text);

struct F1Breakdown {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  std::size_t common = 0;
  std::vector<std::string> gold_tokens;
  std::vector<std::string> pred_tokens;
};

/// Multiset token overlap. Any side empty after normalization gives 0.
F1Breakdown token_f1(std::string_view prediction, std::string_view gold);

/// F1 with retrieval minus F1 without it.
double delta_f1(double f1_with, double f1_without);

struct JudgeScores {
  int accuracy = 0;
  int entities = 0;
  int coherence = 0;
  int alignment = 0;

  double stacked() const { return (accuracy + entities + coherence + alignment) / 4.0; }
  bool operator==(const JudgeScores&) const = default;
};

/// System prompt for the answer judge.
extern const std::string_view kJudgeSystemPrompt;

/// Parses {"scores":{"accuracy":..,"entities":..,"coherence":..,"alignment":..}}
/// (a flat object with the four keys is also accepted). Throws
/// JudgeParseFailure on malformed or out-of-range output.
JudgeScores parse_judge_scores(std::string_view reply);

nlohmann::ordered_json subchain_json(const ReasoningGraph& graph);

/// Scores the prediction against gold; one re-ask on a malformed reply.
JudgeScores judge(const Sample& sample, const EpisodeResult& episode, const Backend& backend,
                  std::vector<TranscriptEntry>* transcript = nullptr);

enum class ErrorType {
  kRetrievalFailure,
  kHallucinatedEntityAttribute,
  kStepOmission,
  kModalityMismatch,
  kSpuriousStep,
  kOrderDependencyError,
  kMultiHopFailure,
  kEvidenceMisinterpretation,
};

inline constexpr std::size_t kErrorTypeCount = 8;
std::string_view error_type_key(ErrorType t);
inline constexpr std::array<ErrorType, kErrorTypeCount> kAllErrorTypes = {
    ErrorType::kRetrievalFailure,    ErrorType::kHallucinatedEntityAttribute,
    ErrorType::kStepOmission,        ErrorType::kModalityMismatch,
    ErrorType::kSpuriousStep,        ErrorType::kOrderDependencyError,
    ErrorType::kMultiHopFailure,     ErrorType::kEvidenceMisinterpretation};

struct ErrorFlags {
  std::array<bool, kErrorTypeCount> flags{};

  bool get(ErrorType t) const { return flags[static_cast<std::size_t>(t)]; }
  void set(ErrorType t, bool v) { flags[static_cast<std::size_t>(t)] = v; }
  std::size_t count() const;
  bool operator==(const ErrorFlags&) const = default;
};

ErrorFlags parse_error_flags(std::string_view reply);

ErrorFlags annotate_errors(const Sample& sample, const EpisodeResult& episode,
                           const Backend& backend,
                           std::vector<TranscriptEntry>* transcript = nullptr);

/// Fraction of verdicts raising each flag (0 for an empty list).
std::array<double, kErrorTypeCount> error_rates(const std::vector<ErrorFlags>& verdicts);

/// Pulls the outermost JSON object out of a reply that may carry prose or
/// code fences around it.
nlohmann::json extract_json_object(std::string_view reply);

}  // namespace hoptrace
