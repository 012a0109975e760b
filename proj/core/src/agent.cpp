#include "hoptrace/agent.hpp"

#include "hoptrace/error.hpp"

namespace hoptrace {

using ojson = nlohmann::ordered_json;

std::string_view to_string(Termination t) {
  switch (t) {
    case Termination::kEndTag: return "EndTag";
    case Termination::kMaxTurns: return "MaxTurns";
    case Termination::kProtocolFailure: return "ProtocolFailure";
    case Termination::kAbstained: return "Abstained";
  }
  return "?";
}

Termination parse_termination(std::string_view s) {
  if (s == "EndTag") return Termination::kEndTag;
  if (s == "MaxTurns") return Termination::kMaxTurns;
  if (s == "ProtocolFailure") return Termination::kProtocolFailure;
  if (s == "Abstained") return Termination::kAbstained;
  throw Error(ErrorCode::kParseError, "unknown termination '" + std::string(s) + "'");
}

std::string_view to_string(RunMode m) {
  switch (m) {
    case RunMode::kAgentic: return "agentic";
    case RunMode::kClosedBook: return "closed_book";
    case RunMode::kGolden: return "golden";
    case RunMode::kFixed1: return "fixed1";
    case RunMode::kFixed2: return "fixed2";
  }
  return "?";
}

RunMode parse_run_mode(std::string_view s) {
  if (s == "agentic") return RunMode::kAgentic;
  if (s == "closed_book") return RunMode::kClosedBook;
  if (s == "golden") return RunMode::kGolden;
  if (s == "fixed1") return RunMode::kFixed1;
  if (s == "fixed2") return RunMode::kFixed2;
  throw Error(ErrorCode::kInvalidArgument, "unknown mode '" + std::string(s) + "'");
}

// ---------------------------------------------------------------------------
// Serialization

namespace {

ojson action_to_json(const RetrievalAction& a) {
  ojson j;
  j["kind"] = std::string(to_string(a.kind));
  if (a.query_text) j["query_text"] = *a.query_text;
  if (a.query_image_id) j["query_image_id"] = *a.query_image_id;
  return j;
}

RetrievalAction action_from_json(const ojson& j) {
  RetrievalAction a;
  a.kind = parse_action_kind(j.at("kind").get<std::string>());
  if (j.contains("query_text")) a.query_text = j["query_text"].get<std::string>();
  if (j.contains("query_image_id")) a.query_image_id = j["query_image_id"].get<std::string>();
  return a;
}

ojson hits_to_json(const std::vector<RetrievalHit>& hits) {
  ojson arr = ojson::array();
  for (const auto& h : hits) {
    arr.push_back(ojson{{"item_id", h.item_id}, {"similarity", h.similarity}, {"rank", h.rank}});
  }
  return arr;
}

std::vector<RetrievalHit> hits_from_json(const ojson& j) {
  std::vector<RetrievalHit> out;
  for (const auto& h : j) {
    out.push_back({h.at("item_id").get<std::string>(), h.at("similarity").get<double>(),
                   h.at("rank").get<int>()});
  }
  return out;
}

}  // namespace

ojson episode_to_json(const EpisodeResult& e) {
  ojson j;
  j["sample_id"] = e.sample_id;
  j["mode"] = std::string(to_string(e.mode));
  j["final_answer"] = e.final_answer;
  j["termination"] = std::string(to_string(e.termination));
  ojson pred = graph_to_json(e.predicted);
  pred.erase("key_entities");
  j["predicted"] = std::move(pred);
  ojson turns = ojson::array();
  for (const auto& t : e.turns) {
    ojson jt;
    jt["turn"] = t.turn;
    jt["thought"] = t.thought;
    jt["sub_question"] = t.sub_question;
    jt["action"] = t.action ? action_to_json(*t.action) : ojson("NoRetrieval");
    jt["hits"] = hits_to_json(t.hits);
    jt["evidence_shown"] = t.evidence_shown;
    jt["sub_answer"] = t.sub_answer;
    turns.push_back(std::move(jt));
  }
  j["turns"] = std::move(turns);
  ojson calls = ojson::array();
  for (const auto& c : e.retrieval_calls) {
    ojson jc;
    jc["action"] = action_to_json(c.action);
    jc["hits"] = hits_to_json(c.hits);
    if (!c.error.empty()) jc["error"] = c.error;
    calls.push_back(std::move(jc));
  }
  j["retrieval_calls"] = std::move(calls);
  j["transcript"] = transcript_to_json(e.transcript);
  if (e.error) j["error"] = *e.error;
  return j;
}

EpisodeResult episode_from_json(const ojson& j) {
  EpisodeResult e;
  try {
    e.sample_id = j.at("sample_id").get<std::string>();
    e.mode = parse_run_mode(j.at("mode").get<std::string>());
    e.final_answer = j.at("final_answer").get<std::string>();
    e.termination = parse_termination(j.at("termination").get<std::string>());
    e.predicted = graph_from_json(j.at("predicted"));
    for (const auto& jt : j.at("turns")) {
      AgentTurnRecord t;
      t.turn = jt.at("turn").get<int>();
      t.thought = jt.at("thought").get<std::string>();
      t.sub_question = jt.at("sub_question").get<std::string>();
      if (jt.at("action").is_object()) t.action = action_from_json(jt["action"]);
      t.hits = hits_from_json(jt.at("hits"));
      t.evidence_shown = jt.at("evidence_shown").get<std::string>();
      t.sub_answer = jt.at("sub_answer").get<std::string>();
      e.turns.push_back(std::move(t));
    }
    for (const auto& jc : j.at("retrieval_calls")) {
      RetrievalCall c;
      c.action = action_from_json(jc.at("action"));
      c.hits = hits_from_json(jc.at("hits"));
      c.error = jc.value("error", std::string());
      e.retrieval_calls.push_back(std::move(c));
    }
    e.transcript = transcript_from_json(j.at("transcript"));
    if (j.contains("error")) e.error = j["error"].get<std::string>();
  } catch (const nlohmann::json::exception& ex) {
    throw Error(ErrorCode::kParseError, std::string("trace record: ") + ex.what());
  }
  return e;
}

// ---------------------------------------------------------------------------
// Shared helpers

std::string image_ref(const KnowledgeItem& item) {
  return item.image_path ? *item.image_path : item.id;
}

ChatMessage render_evidence(const KnowledgeStore& kb, const std::vector<RetrievalHit>& hits,
                            bool attach_images) {
  ChatMessage msg;
  msg.role = Role::kUser;
  if (hits.empty()) {
    msg.text = "Retrieval returned no results.";
    return msg;
  }
  const bool many = hits.size() > 1;
  for (const auto& h : hits) {
    const auto& item = kb.at(h.item_id);
    if (!msg.text.empty()) msg.text += "\n";
    if (many) msg.text += "[" + std::to_string(h.rank) + "] ";
    if (item.modality == Modality::kImage) {
      msg.text += "Retrieved image caption: " + item.payload;
      if (attach_images) msg.image_refs.push_back(image_ref(item));
    } else {
      msg.text += "Retrieved text passage: " + item.payload;
    }
  }
  return msg;
}

namespace {

std::vector<std::string> input_image_refs(const Sample& sample, const KnowledgeStore* kb,
                                          bool attach, const std::set<std::string>& skip = {}) {
  std::vector<std::string> refs;
  if (!attach) return refs;
  for (const auto& id : sample.gold.input_image_ids) {
    if (skip.count(id)) continue;
    const KnowledgeItem* item = kb ? kb->find(id) : nullptr;
    refs.push_back(item ? image_ref(*item) : id);
  }
  return refs;
}

// Text-only endpoints still learn what the input image shows through its caption.
std::string input_image_captions(const Sample& sample, const KnowledgeStore* kb,
                                 const std::set<std::string>& skip = {}) {
  std::string out;
  if (!kb) return out;
  for (const auto& id : sample.gold.input_image_ids) {
    if (skip.count(id)) continue;
    if (const auto* item = kb->find(id); item && !item->payload.empty()) {
      out += "\nInput image caption: " + item->payload;
    }
  }
  return out;
}

}  // namespace

ChatMessage question_message(const Sample& sample, const KnowledgeStore& kb, bool attach_images) {
  return {Role::kUser,
          agent_question_message(sample.gold.question) + input_image_captions(sample, &kb),
          input_image_refs(sample, &kb, attach_images)};
}

namespace {

Scope make_scope(const Sample& sample) {
  return Scope(sample.kb_scope.begin(), sample.kb_scope.end());
}

RetrievalCall execute(const KnowledgeStore& kb, const RetrievalAction& action, std::size_t k,
                      const Scope* scope) {
  RetrievalCall call{action, {}, {}};
  try {
    call.hits = kb.retrieve(action, k, scope);
  } catch (const Error& e) {
    if (e.code() != ErrorCode::kUnknownImageId && e.code() != ErrorCode::kEmptyStoreForModality) {
      throw;
    }
    call.error = e.what();
  }
  return call;
}

ReasoningStep step_from_call(const RetrievalCall& call, const std::string& sub_question,
                             const std::string& answer) {
  ReasoningStep s;
  s.sub_question = sub_question;
  s.modality = target_modality(call.action.kind);
  s.evidence_id = call.hits.empty() ? std::string() : call.hits.front().item_id;
  s.intermediate_answer = answer;
  return s;
}

EpisodeResult make_result(const Sample& sample, RunMode mode) {
  EpisodeResult r;
  r.sample_id = sample.id;
  r.mode = mode;
  r.predicted.question = sample.gold.question;
  r.predicted.input_image_ids = sample.gold.input_image_ids;
  return r;
}

void finish_graph(EpisodeResult& r) {
  r.predicted.final_answer = r.final_answer;
  r.predicted.renumber();
  r.predicted.topology = infer_topology(r.predicted.steps);
}

constexpr std::string_view kSingleAnswerPrompt =
    "Reply with a one-sentence answer to the question. When the material you have does not "
    "settle it, say that it cannot be answered.";

}  // namespace

// ---------------------------------------------------------------------------
// Agentic episode

EpisodeResult run_episode(const Sample& sample, const Backend& backend, const KnowledgeStore& kb,
                          const LoopPolicy& policy) {
  if (policy.max_turns < 1) throw Error(ErrorCode::kInvalidArgument, "max_turns must be >= 1");
  if (policy.k < 1) throw Error(ErrorCode::kInvalidArgument, "k must be >= 1");

  EpisodeResult r = make_result(sample, RunMode::kAgentic);
  Session session(backend.client, backend.spec, sample.id, "agent", &r.transcript);
  const bool attach = session.accepts_images();
  const Scope scope = make_scope(sample);
  const Scope* scope_ptr = scope.empty() ? nullptr : &scope;

  std::vector<ChatMessage> messages;
  messages.push_back({Role::kSystem, std::string(kAgentSystemPrompt), {}});
  messages.push_back(question_message(sample, kb, attach));

  std::optional<std::size_t> awaiting_answer;  // turn whose evidence was just shown
  std::vector<std::size_t> step_turn;           // predicted step -> turn index
  int failures = 0;
  bool finished = false;

  for (int completion = 0; completion < policy.max_turns && !finished; ++completion) {
    std::string out = session.complete(messages);
    messages.push_back({Role::kAssistant, out, {}});
    ParsedTurn parsed = parse_agent_output(out);

    if (parsed.kind == ParsedTurn::Kind::kInvalid) {
      if (++failures > policy.parse_retries) {
        r.termination = Termination::kProtocolFailure;
        r.error = parsed.error;
        finish_graph(r);
        return r;
      }
      messages.push_back({Role::kUser, protocol_reminder(parsed.error), {}});
      continue;
    }
    failures = 0;
    if (awaiting_answer) {
      r.turns[*awaiting_answer].sub_answer = parsed.preamble;
      awaiting_answer.reset();
    }

    if (parsed.kind == ParsedTurn::Kind::kEnd) {
      r.final_answer = parsed.final_answer;
      r.termination = r.final_answer.empty() ? Termination::kAbstained : Termination::kEndTag;
      finished = true;
      break;
    }

    AgentTurnRecord rec;
    rec.turn = static_cast<int>(r.turns.size()) + 1;
    rec.thought = parsed.thought;
    rec.sub_question = parsed.sub_question;
    ChatMessage evidence{Role::kUser, "No retrieval performed. Continue with the next step.", {}};

    if (parsed.action != ActionChoice::kNoRetrieval) {
      RetrievalAction action;
      switch (parsed.action) {
        case ActionChoice::kTextRetrieval:
          action = RetrievalAction::text_search(parsed.sub_question);
          break;
        case ActionChoice::kImageRetrievalTextQuery:
          action = RetrievalAction::image_search_text(parsed.sub_question);
          break;
        default: {
          // An input image named in the search body wins; otherwise the first one.
          std::string image_id;
          for (const auto& id : sample.gold.input_image_ids) {
            if (parsed.search_body.find(id) != std::string::npos) image_id = id;
          }
          if (image_id.empty() && !sample.gold.input_image_ids.empty()) {
            image_id = sample.gold.input_image_ids.front();
          }
          action = RetrievalAction::image_search_image(image_id);
          break;
        }
      }
      RetrievalCall call;
      if (action.kind == ActionKind::kImageSearchImageQuery && action.query_image_id->empty()) {
        call = RetrievalCall{action, {}, "UnknownImageId: the question has no input image"};
      } else {
        call = execute(kb, action, policy.k, scope_ptr);
      }
      evidence = call.error.empty() ? render_evidence(kb, call.hits, attach)
                                    : ChatMessage{Role::kUser, "Retrieval failed: " + call.error, {}};
      rec.action = action;
      rec.hits = call.hits;
      r.retrieval_calls.push_back(call);
      r.predicted.steps.push_back(step_from_call(call, parsed.sub_question, ""));
      step_turn.push_back(r.turns.size());
    }
    rec.evidence_shown = evidence.text;
    r.turns.push_back(std::move(rec));
    awaiting_answer = r.turns.size() - 1;
    messages.push_back(std::move(evidence));
  }

  if (!finished) {
    // One closing request so a model that ran out of turns can still answer.
    messages.push_back({Role::kUser, max_turns_message(), {}});
    std::string out = session.complete(messages);
    ParsedTurn parsed = parse_agent_output(out);
    if (awaiting_answer && parsed.kind != ParsedTurn::Kind::kInvalid) {
      r.turns[*awaiting_answer].sub_answer = parsed.preamble;
    }
    if (parsed.kind == ParsedTurn::Kind::kEnd) {
      r.final_answer = parsed.final_answer;
    } else if (auto fa = find_final_answer(out)) {
      r.final_answer = *fa;
    }
    r.termination = Termination::kMaxTurns;
  }

  for (std::size_t i = 0; i < step_turn.size(); ++i) {
    r.predicted.steps[i].intermediate_answer = r.turns[step_turn[i]].sub_answer;
  }
  finish_graph(r);
  return r;
}

// ---------------------------------------------------------------------------
// Single-completion modes

EpisodeResult run_closed_book(const Sample& sample, const Backend& backend) {
  EpisodeResult r = make_result(sample, RunMode::kClosedBook);
  Session session(backend.client, backend.spec, sample.id, "closed_book", &r.transcript);
  std::vector<ChatMessage> messages = {
      {Role::kSystem,
       std::string(kSingleAnswerPrompt) + " No retrieval is available; rely on your own knowledge.",
       {}},
      {Role::kUser, agent_question_message(sample.gold.question),
       input_image_refs(sample, nullptr, session.accepts_images())}};
  r.final_answer = session.complete(messages);
  r.termination = trim(r.final_answer).empty() ? Termination::kAbstained : Termination::kEndTag;
  finish_graph(r);
  return r;
}

EpisodeResult run_golden(const Sample& sample, const Backend& backend, const KnowledgeStore& kb,
                         const std::set<int>& withheld) {
  for (const auto& step : sample.gold.steps) {
    if (!kb.contains(step.evidence_id)) {
      throw Error(ErrorCode::kDanglingEvidence,
                  "sample '" + sample.id + "' step " + std::to_string(step.index) + " cites '" +
                      step.evidence_id + "'");
    }
  }
  EpisodeResult r = make_result(sample, RunMode::kGolden);
  Session session(backend.client, backend.spec, sample.id, "golden", &r.transcript);
  const bool attach = session.accepts_images();

  // Withholding an input-image hop also hides that image from the question.
  std::set<std::string> hidden;
  for (const auto& step : sample.gold.steps) {
    if (withheld.count(step.index)) hidden.insert(step.evidence_id);
  }
  ChatMessage user{Role::kUser, agent_question_message(sample.gold.question), {}};
  user.image_refs = input_image_refs(sample, &kb, attach, hidden);
  user.text += input_image_captions(sample, &kb, hidden);
  user.text += "\n\nReasoning chain with retrieved evidence:";
  for (const auto& step : sample.gold.steps) {
    const auto& item = kb.at(step.evidence_id);
    user.text += "\nStep " + std::to_string(step.index) + " (" +
                 std::string(to_string(step.modality)) + "): " + step.sub_question;
    if (withheld.count(step.index)) {
      user.text += "\nEvidence: (withheld)";
      continue;
    }
    user.text += item.modality == Modality::kImage ? "\nEvidence (image caption): " : "\nEvidence: ";
    user.text += item.payload;
    if (item.modality == Modality::kImage && attach) user.image_refs.push_back(image_ref(item));
    r.predicted.steps.push_back(step);
  }
  std::vector<ChatMessage> messages = {
      {Role::kSystem,
       std::string(kSingleAnswerPrompt) +
           " Use only the reasoning chain and evidence given with the question.",
       {}},
      std::move(user)};
  r.final_answer = session.complete(messages);
  r.termination = trim(r.final_answer).empty() ? Termination::kAbstained : Termination::kEndTag;
  finish_graph(r);
  return r;
}

EpisodeResult run_fixed_rag(const Sample& sample, const Backend& backend, const KnowledgeStore& kb,
                            int hops) {
  if (hops != 1 && hops != 2) {
    throw Error(ErrorCode::kInvalidArgument, "fixed RAG supports 1 or 2 hops, got " + std::to_string(hops));
  }
  EpisodeResult r = make_result(sample, hops == 1 ? RunMode::kFixed1 : RunMode::kFixed2);
  Session session(backend.client, backend.spec, sample.id, "fixed_rag", &r.transcript);
  const Scope scope = make_scope(sample);
  const Scope* scope_ptr = scope.empty() ? nullptr : &scope;
  const std::string& question = sample.gold.question;

  auto top_payload = [&](const RetrievalCall& call) {
    return call.hits.empty() ? std::string() : kb.at(call.hits.front().item_id).payload;
  };
  auto run = [&](RetrievalAction action) {
    RetrievalCall call = execute(kb, action, 1, scope_ptr);
    const std::string query = action.query_text.value_or(action.query_image_id.value_or(""));
    r.predicted.steps.push_back(step_from_call(call, query, ""));
    r.retrieval_calls.push_back(call);
    return top_payload(call);
  };

  std::string context;
  if (sample.gold.has_input_image()) {
    // Image first; its caption then extends the text query.
    const std::string caption = run(RetrievalAction::image_search_image(sample.gold.input_image_ids.front()));
    context = caption;
    if (hops == 2) context += "\n" + run(RetrievalAction::text_search(question + " " + caption));
  } else {
    context = run(RetrievalAction::text_search(question));
    if (hops == 2) context += "\n" + run(RetrievalAction::text_search(question + " " + context));
  }

  std::vector<ChatMessage> messages = {
      {Role::kSystem,
       std::string(kSingleAnswerPrompt) + " Answer only when the retrieved context is sufficient.",
       {}},
      {Role::kUser,
       agent_question_message(question) + "\n\nRetrieved context:\n" +
           (context.empty() ? std::string("(none)") : context),
       input_image_refs(sample, &kb, session.accepts_images())}};
  r.final_answer = session.complete(messages);
  r.termination = trim(r.final_answer).empty() ? Termination::kAbstained : Termination::kEndTag;
  finish_graph(r);
  return r;
}

EpisodeResult run_mode(RunMode mode, const Sample& sample, const Backend& backend,
                       const KnowledgeStore& kb, const LoopPolicy& policy) {
  switch (mode) {
    case RunMode::kAgentic: return run_episode(sample, backend, kb, policy);
    case RunMode::kClosedBook: return run_closed_book(sample, backend);
    case RunMode::kGolden: return run_golden(sample, backend, kb);
    case RunMode::kFixed1: return run_fixed_rag(sample, backend, kb, 1);
    case RunMode::kFixed2: return run_fixed_rag(sample, backend, kb, 2);
  }
  throw Error(ErrorCode::kInvalidArgument, "bad mode");
}

}  // namespace hoptrace
