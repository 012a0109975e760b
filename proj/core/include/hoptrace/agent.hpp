#pragma once

#include <optional>
#include <set>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "hoptrace/backend.hpp"
#include "hoptrace/knowledge_store.hpp"
#include "hoptrace/protocol.hpp"
#include "hoptrace/types.hpp"

namespace hoptrace {

struct LoopPolicy {
  int max_turns = 8;
  std::size_t k = 1;
  int parse_retries = 2;
};

enum class Termination { kEndTag, kMaxTurns, kProtocolFailure, kAbstained };

std::string_view to_string(Termination t);
Termination parse_termination(std::string_view s);

enum class RunMode { kAgentic, kClosedBook, kGolden, kFixed1, kFixed2 };

std::string_view to_string(RunMode m);
RunMode parse_run_mode(std::string_view s);

/// One executed search turn. `action` is empty for "No Retrieval".
struct AgentTurnRecord {
  int turn = 0;
  std::string thought;
  std::string sub_question;
  std::optional<RetrievalAction> action;
  std::vector<RetrievalHit> hits;
  std::string evidence_shown;
  std::string sub_answer;

  bool operator==(const AgentTurnRecord&) const = default;
};

/// Every store query issued while producing an answer, successful or not.
struct RetrievalCall {
  RetrievalAction action;
  std::vector<RetrievalHit> hits;
  std::string error;

  bool operator==(const RetrievalCall&) const = default;
};

struct EpisodeResult {
  std::string sample_id;
  RunMode mode = RunMode::kAgentic;
  ReasoningGraph predicted;
  std::string final_answer;
  Termination termination = Termination::kEndTag;
  std::vector<AgentTurnRecord> turns;
  std::vector<RetrievalCall> retrieval_calls;
  std::vector<TranscriptEntry> transcript;
  std::optional<std::string> error;

  bool operator==(const EpisodeResult&) const = default;
};

nlohmann::ordered_json episode_to_json(const EpisodeResult& e);
EpisodeResult episode_from_json(const nlohmann::ordered_json& j);

/// Iterative plan -> retrieve -> reason episode under the tag protocol.
EpisodeResult run_episode(const Sample& sample, const Backend& backend, const KnowledgeStore& kb,
                          const LoopPolicy& policy);

/// Single completion with no retrieval (the parametric-knowledge baseline).
EpisodeResult run_closed_book(const Sample& sample, const Backend& backend);

/// Single completion given every gold sub-question and its evidence payload.
/// Hops listed in `withheld` (1-based) keep their sub-question but lose their
/// evidence; this is the ablation behind hop utility.
EpisodeResult run_golden(const Sample& sample, const Backend& backend, const KnowledgeStore& kb,
                         const std::set<int>& withheld = {});

/// Fixed one- or two-hop retrieval followed by a single completion.
EpisodeResult run_fixed_rag(const Sample& sample, const Backend& backend, const KnowledgeStore& kb,
                            int hops);

EpisodeResult run_mode(RunMode mode, const Sample& sample, const Backend& backend,
                       const KnowledgeStore& kb, const LoopPolicy& policy);

/// How retrieved items are shown back to the model.
ChatMessage render_evidence(const KnowledgeStore& kb, const std::vector<RetrievalHit>& hits,
                            bool attach_images);

/// Reference handed to a backend for an image item: its file path if known.
std::string image_ref(const KnowledgeItem& item);

/// Opening user message of an agentic episode: the question, captions of the
/// input images, and (when attaching) their image refs.
ChatMessage question_message(const Sample& sample, const KnowledgeStore& kb, bool attach_images);

}  // namespace hoptrace
