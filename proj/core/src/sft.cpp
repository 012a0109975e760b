#include "hoptrace/sft.hpp"

#include <algorithm>
#include <cctype>

#include "hoptrace/agent.hpp"
#include "hoptrace/error.hpp"
#include "hoptrace/protocol.hpp"

namespace hoptrace {

using ojson = nlohmann::ordered_json;

namespace {

bool contains_tag(std::string_view text) {
  std::string lower(text);
  std::transform(lower.begin(), lower.end(), lower.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  for (std::string_view tag : {"<thought", "<sub-question", "<subquestion", "<search", "<end"}) {
    if (lower.find(tag) != std::string::npos) return true;
  }
  return false;
}

constexpr std::string_view kAugmentSystemPrompt =
    "You write the reasoning thought that precedes one retrieval step of a multi-hop answer. "
    "In one or two sentences, say what is known so far, why this sub-question is the next "
    "minimal step, and which retrieval will ground it. Plain text only.";

}  // namespace

std::vector<std::string> augment_thoughts(const Sample& sample, const Backend& augmenter,
                                          const KnowledgeStore& kb,
                                          std::vector<TranscriptEntry>* transcript) {
  Session session(augmenter.client, augmenter.spec, sample.id, "augment", transcript);
  std::vector<std::string> out;
  const auto& steps = sample.gold.steps;
  for (std::size_t i = 0; i < steps.size(); ++i) {
    const auto& item = kb.at(steps[i].evidence_id);
    ojson in;
    in["question"] = sample.gold.question;
    in["hop"] = steps[i].index;
    in["sub_question"] = steps[i].sub_question;
    in["modality"] = std::string(to_string(steps[i].modality));
    in["evidence"] = item.payload;
    in["answer"] = steps[i].intermediate_answer;
    in["previous_answer"] = i > 0 ? steps[i - 1].intermediate_answer : std::string();
    in["next_sub_question"] = i + 1 < steps.size() ? steps[i + 1].sub_question : std::string();
    std::string thought = trim(session.complete(
        {{Role::kSystem, std::string(kAugmentSystemPrompt), {}}, {Role::kUser, in.dump(2), {}}}));
    if (thought.empty()) {
      throw Error(ErrorCode::kAugmentFailure,
                  "sample '" + sample.id + "' hop " + std::to_string(steps[i].index) + ": empty thought");
    }
    if (contains_tag(thought)) {
      throw Error(ErrorCode::kAugmentFailure,
                  "sample '" + sample.id + "' hop " + std::to_string(steps[i].index) +
                      ": thought contains a protocol tag");
    }
    out.push_back(std::move(thought));
  }
  return out;
}

ConversationTrace compile_trace(const Sample& sample, const std::vector<std::string>& thoughts,
                                const KnowledgeStore& kb, bool attach_images) {
  const auto& g = sample.gold;
  if (g.steps.empty()) throw Error(ErrorCode::kEmptyGoldGraph, "sample '" + sample.id + "' has no hops");
  if (thoughts.size() != g.steps.size()) {
    throw Error(ErrorCode::kInvalidArgument, "sample '" + sample.id + "': " +
                                                 std::to_string(thoughts.size()) + " thoughts for " +
                                                 std::to_string(g.steps.size()) + " hops");
  }
  for (const auto& s : g.steps) {
    if (!kb.contains(s.evidence_id)) {
      throw Error(ErrorCode::kDanglingEvidence,
                  "sample '" + sample.id + "' hop " + std::to_string(s.index) + " cites '" + s.evidence_id + "'");
    }
  }

  ConversationTrace trace;
  trace.sample_id = sample.id;
  trace.turns.push_back({Role::kSystem, std::string(kAgentSystemPrompt), {}, std::nullopt});
  const ChatMessage q = question_message(sample, kb, attach_images);
  trace.turns.push_back({Role::kUser, q.text, q.image_refs, std::nullopt});

  std::string preamble;
  for (std::size_t i = 0; i < g.steps.size(); ++i) {
    const auto& s = g.steps[i];
    ActionChoice action = ActionChoice::kTextRetrieval;
    std::string image_id;
    if (s.modality == Modality::kImage) {
      const auto& inputs = g.input_image_ids;
      if (std::find(inputs.begin(), inputs.end(), s.evidence_id) != inputs.end()) {
        action = ActionChoice::kImageRetrievalInputImage;
        if (inputs.size() > 1) image_id = s.evidence_id;
      } else {
        action = ActionChoice::kImageRetrievalTextQuery;
      }
    }
    trace.turns.push_back({Role::kAssistant,
                           format_search_turn(preamble, thoughts[i], s.sub_question, action, image_id),
                           {},
                           std::nullopt});
    const ChatMessage ev = render_evidence(kb, {RetrievalHit{s.evidence_id, 1.0, 1}}, attach_images);
    trace.turns.push_back({Role::kUser, ev.text, ev.image_refs, s.evidence_id});
    preamble = s.intermediate_answer;
  }
  trace.turns.push_back({Role::kAssistant, format_end_turn(preamble, g.final_answer), {}, std::nullopt});
  return trace;
}

ojson trace_to_json(const ConversationTrace& trace) {
  ojson j;
  j["id"] = trace.sample_id;
  ojson messages = ojson::array();
  std::vector<std::string> images;
  for (const auto& t : trace.turns) {
    ojson m;
    m["role"] = std::string(to_string(t.role));
    m["content"] = t.text;
    m["images"] = t.image_refs;
    if (t.evidence_id) m["evidence_id"] = *t.evidence_id;
    messages.push_back(std::move(m));
    images.insert(images.end(), t.image_refs.begin(), t.image_refs.end());
  }
  j["messages"] = std::move(messages);
  j["images"] = images;
  j["provenance"] = ojson{{"sample_id", trace.sample_id},
                          {"pipeline_version", trace.pipeline_version},
                          {"format", std::string(kSftFormat)}};
  return j;
}

ConversationTrace trace_from_json(const ojson& j) {
  ConversationTrace t;
  try {
    t.sample_id = j.at("provenance").at("sample_id").get<std::string>();
    t.pipeline_version = j.at("provenance").at("pipeline_version").get<std::string>();
    for (const auto& m : j.at("messages")) {
      ConversationTurn turn;
      turn.role = parse_role(m.at("role").get<std::string>());
      turn.text = m.at("content").get<std::string>();
      turn.image_refs = m.value("images", std::vector<std::string>{});
      if (m.contains("evidence_id")) turn.evidence_id = m["evidence_id"].get<std::string>();
      t.turns.push_back(std::move(turn));
    }
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::kParseError, std::string("SFT record: ") + e.what());
  }
  return t;
}

ReplayResult replay_trace(const ConversationTrace& trace) {
  ReplayResult out;
  auto& g = out.graph;
  const std::string prefix = agent_question_message("");
  bool have_question = false;
  std::optional<std::size_t> open_step;  // awaiting its answer in the next preamble

  for (std::size_t i = 0; i < trace.turns.size(); ++i) {
    const auto& t = trace.turns[i];
    if (t.role == Role::kUser && !have_question) {
      std::string text = t.text;
      if (text.rfind(prefix, 0) == 0) text = text.substr(prefix.size());
      if (auto cut = text.find("\nInput image caption: "); cut != std::string::npos) text.resize(cut);
      g.question = text;
      have_question = true;
      continue;
    }
    if (t.role != Role::kAssistant) continue;
    const ParsedTurn p = parse_agent_output(t.text);
    if (p.kind == ParsedTurn::Kind::kInvalid) {
      ++out.parse_failures;
      continue;
    }
    if (open_step) {
      g.steps[*open_step].intermediate_answer = p.preamble;
      open_step.reset();
    }
    if (p.kind == ParsedTurn::Kind::kEnd) {
      g.final_answer = p.final_answer;
      break;
    }
    if (p.action == ActionChoice::kNoRetrieval) continue;
    ReasoningStep s;
    s.sub_question = p.sub_question;
    s.modality = p.action == ActionChoice::kTextRetrieval ? Modality::kText : Modality::kImage;
    if (i + 1 < trace.turns.size() && trace.turns[i + 1].evidence_id) {
      s.evidence_id = *trace.turns[i + 1].evidence_id;
    }
    g.steps.push_back(std::move(s));
    out.thoughts.push_back(p.thought);
    open_step = g.steps.size() - 1;
  }
  g.renumber();
  g.topology = infer_topology(g.steps);
  return out;
}

bool same_chain(const ReasoningGraph& a, const ReasoningGraph& b) {
  if (a.question != b.question || a.final_answer != b.final_answer) return false;
  if (a.steps.size() != b.steps.size()) return false;
  for (std::size_t i = 0; i < a.steps.size(); ++i) {
    const auto& x = a.steps[i];
    const auto& y = b.steps[i];
    if (x.index != y.index || x.sub_question != y.sub_question || x.modality != y.modality ||
        x.evidence_id != y.evidence_id || x.intermediate_answer != y.intermediate_answer) {
      return false;
    }
  }
  return true;
}

}  // namespace hoptrace
