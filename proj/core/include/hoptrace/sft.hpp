#pragma once

#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "hoptrace/backend.hpp"
#include "hoptrace/knowledge_store.hpp"
#include "hoptrace/types.hpp"

namespace hoptrace {

inline constexpr std::string_view kSftFormat = "hoptrace-sft/1";
inline constexpr std::string_view kPipelineVersion = "hoptrace 0.1.0";

struct ConversationTurn {
  Role role = Role::kUser;
  std::string text;
  std::vector<std::string> image_refs;
  std::optional<std::string> evidence_id;  // user turns that deliver a gold item

  bool operator==(const ConversationTurn&) const = default;
};

struct ConversationTrace {
  std::string sample_id;
  std::string pipeline_version = std::string(kPipelineVersion);
  std::vector<ConversationTurn> turns;

  bool operator==(const ConversationTrace&) const = default;
};

/// One thought per hop from the augmenter (one completion per hop, purpose
/// "augment"). Empty thoughts, or thoughts containing protocol tags, throw
/// AugmentFailure.
std::vector<std::string> augment_thoughts(const Sample& sample, const Backend& augmenter,
                                          const KnowledgeStore& kb,
                                          std::vector<TranscriptEntry>* transcript = nullptr);

/// Builds the dialogue: system protocol prompt, the question, then per hop an
/// assistant search turn and a user turn carrying the gold evidence, and a
/// final assistant `<End>` turn. Throws DanglingEvidence.
ConversationTrace compile_trace(const Sample& sample, const std::vector<std::string>& thoughts,
                                const KnowledgeStore& kb, bool attach_images = true);

nlohmann::ordered_json trace_to_json(const ConversationTrace& trace);
ConversationTrace trace_from_json(const nlohmann::ordered_json& j);

struct ReplayResult {
  ReasoningGraph graph;
  std::vector<std::string> thoughts;
  int parse_failures = 0;
};

/// Reads the assistant turns back through the agent's tag parser.
ReplayResult replay_trace(const ConversationTrace& trace);

/// Equality on what the protocol carries: question, final answer, and each
/// hop's sub-question, modality, evidence id and answer.
bool same_chain(const ReasoningGraph& a, const ReasoningGraph& b);

}  // namespace hoptrace
