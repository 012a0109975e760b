#include "hoptrace/answer_metrics.hpp"

#include <cctype>
#include <cmath>
#include <unordered_map>

#include "hoptrace/error.hpp"

namespace hoptrace {

std::vector<std::string> normalize_answer_tokens(std::string_view text) {
  std::vector<std::string> tokens;
  std::string cur;
  auto flush = [&] {
    if (!cur.empty() && cur != "a" && cur != "an" && cur != "the") tokens.push_back(cur);
    cur.clear();
  };
  for (unsigned char c : text) {
    if (c < 0x80 && std::ispunct(c)) continue;
    if (c < 0x80 && std::isspace(c)) {
      flush();
      continue;
    }
    cur.push_back(static_cast<char>(c < 0x80 ? std::tolower(c) : c));
  }
  flush();
  return tokens;
}

F1Breakdown token_f1(std::string_view prediction, std::string_view gold) {
  F1Breakdown out;
  out.pred_tokens = normalize_answer_tokens(prediction);
  out.gold_tokens = normalize_answer_tokens(gold);
  if (out.pred_tokens.empty() || out.gold_tokens.empty()) return out;

  std::unordered_map<std::string, int> remaining;
  for (const auto& t : out.gold_tokens) ++remaining[t];
  for (const auto& t : out.pred_tokens) {
    auto it = remaining.find(t);
    if (it != remaining.end() && it->second > 0) {
      --it->second;
      ++out.common;
    }
  }
  if (out.common == 0) return out;
  out.precision = static_cast<double>(out.common) / static_cast<double>(out.pred_tokens.size());
  out.recall = static_cast<double>(out.common) / static_cast<double>(out.gold_tokens.size());
  out.f1 = 2.0 * out.precision * out.recall / (out.precision + out.recall);
  return out;
}

double delta_f1(double f1_with, double f1_without) { return f1_with - f1_without; }

const std::string_view kJudgeSystemPrompt = R"(Grade a predicted answer against a reference answer for the same question.
The input is JSON with the question, both answers, and both reasoning chains (sub-question, evidence id, answer per hop).
Treat the reference as correct; do not re-check it against outside knowledge. Grade only from what is in the input.
A prediction that declines to answer scores low whenever a reference answer exists.

Give four integers from 0 (absent or unrelated) to 5 (flawless):
accuracy   - the prediction states the same facts and relations as the reference and actually answers the question
entities   - the names, numbers and relations the reference depends on appear in the prediction and are right
coherence  - the predicted chain moves step by step to its conclusion without jumps or contradictions
alignment  - the prediction adds nothing the input does not support and follows the reference chain where it matters

Reply with JSON only:
{"scores": {"accuracy": 0, "entities": 0, "coherence": 0, "alignment": 0}})";

nlohmann::json extract_json_object(std::string_view reply) {
  const auto open = reply.find('{');
  const auto close = reply.rfind('}');
  if (open == std::string_view::npos || close == std::string_view::npos || close < open) {
    throw Error(ErrorCode::kJudgeParseFailure, "no JSON object in reply");
  }
  try {
    return nlohmann::json::parse(reply.substr(open, close - open + 1));
  } catch (const nlohmann::json::parse_error& e) {
    throw Error(ErrorCode::kJudgeParseFailure, e.what());
  }
}

namespace {

int bounded_int(const nlohmann::json& obj, const char* key, int lo, int hi) {
  auto it = obj.find(key);
  if (it == obj.end()) throw Error(ErrorCode::kJudgeParseFailure, std::string("missing '") + key + "'");
  double v = 0.0;
  if (it->is_number()) {
    v = it->get<double>();
  } else {
    throw Error(ErrorCode::kJudgeParseFailure, std::string("'") + key + "' is not a number");
  }
  if (v != std::floor(v) || v < lo || v > hi) {
    throw Error(ErrorCode::kJudgeParseFailure,
                std::string("'") + key + "' = " + it->dump() + " outside " + std::to_string(lo) +
                    ".." + std::to_string(hi));
  }
  return static_cast<int>(v);
}

template <typename Parse>
auto ask_with_one_retry(Session& session, std::vector<ChatMessage> messages, Parse parse,
                        std::string_view retry_note) {
  std::string reply = session.complete(messages);
  try {
    return parse(reply);
  } catch (const Error& e) {
    if (e.code() != ErrorCode::kJudgeParseFailure) throw;
    messages.push_back({Role::kAssistant, reply, {}});
    messages.push_back({Role::kUser,
                        "Your previous output was invalid (" + std::string(e.what()) + "). " +
                            std::string(retry_note),
                        {}});
  }
  return parse(session.complete(messages));
}

}  // namespace

JudgeScores parse_judge_scores(std::string_view reply) {
  nlohmann::json j = extract_json_object(reply);
  const nlohmann::json& scores = j.contains("scores") ? j["scores"] : j;
  if (!scores.is_object()) throw Error(ErrorCode::kJudgeParseFailure, "'scores' is not an object");
  JudgeScores s;
  s.accuracy = bounded_int(scores, "accuracy", 0, 5);
  s.entities = bounded_int(scores, "entities", 0, 5);
  s.coherence = bounded_int(scores, "coherence", 0, 5);
  s.alignment = bounded_int(scores, "alignment", 0, 5);
  return s;
}

nlohmann::ordered_json subchain_json(const ReasoningGraph& graph) {
  nlohmann::ordered_json arr = nlohmann::ordered_json::array();
  for (const auto& s : graph.steps) {
    arr.push_back({{"subquestion", s.sub_question},
                   {"modality", std::string(to_string(s.modality))},
                   {"evidence_id", s.evidence_id},
                   {"answer", s.intermediate_answer}});
  }
  return arr;
}

namespace {

std::string judge_inputs(const Sample& sample, const EpisodeResult& episode) {
  nlohmann::ordered_json in;
  in["question"] = sample.gold.question;
  in["gold_answer"] = sample.gold.final_answer;
  in["pred_answer"] = episode.final_answer;
  in["gold_subchain"] = subchain_json(sample.gold);
  in["pred_subchain"] = subchain_json(episode.predicted);
  return in.dump(2);
}

}  // namespace

JudgeScores judge(const Sample& sample, const EpisodeResult& episode, const Backend& backend,
                  std::vector<TranscriptEntry>* transcript) {
  Session session(backend.client, backend.spec, sample.id, "judge", transcript);
  std::vector<ChatMessage> messages = {{Role::kSystem, std::string(kJudgeSystemPrompt), {}},
                                       {Role::kUser, judge_inputs(sample, episode), {}}};
  return ask_with_one_retry(session, std::move(messages), parse_judge_scores,
                            "Return only the JSON object with four integer scores from 0 to 5.");
}

std::string_view error_type_key(ErrorType t) {
  switch (t) {
    case ErrorType::kRetrievalFailure: return "retrieval_failure";
    case ErrorType::kHallucinatedEntityAttribute: return "hallucinated_entity_attribute";
    case ErrorType::kStepOmission: return "step_omission";
    case ErrorType::kModalityMismatch: return "modality_mismatch";
    case ErrorType::kSpuriousStep: return "spurious_step";
    case ErrorType::kOrderDependencyError: return "order_dependency_error";
    case ErrorType::kMultiHopFailure: return "multi_hop_failure";
    case ErrorType::kEvidenceMisinterpretation: return "evidence_misinterpretation";
  }
  return "?";
}

std::size_t ErrorFlags::count() const {
  std::size_t n = 0;
  for (bool b : flags) n += b ? 1 : 0;
  return n;
}

ErrorFlags parse_error_flags(std::string_view reply) {
  nlohmann::json j = extract_json_object(reply);
  const nlohmann::json& body = j.contains("errors") ? j["errors"] : j;
  ErrorFlags out;
  for (ErrorType t : kAllErrorTypes) {
    const std::string key(error_type_key(t));
    auto it = body.find(key);
    if (it == body.end() || !it->is_boolean()) {
      throw Error(ErrorCode::kJudgeParseFailure, "'" + key + "' missing or not a boolean");
    }
    out.set(t, it->get<bool>());
  }
  return out;
}

namespace {

constexpr std::string_view kErrorSystemPrompt =
    "You are a strict error analyst for multi-step retrieval-augmented reasoning. Compare the "
    "predicted reasoning chain and answer with the gold chain and answer. For each error type "
    "decide independently whether it occurs.\n"
    "- retrieval_failure: a needed piece of evidence was never retrieved.\n"
    "- hallucinated_entity_attribute: the prediction asserts entities or attributes not supported "
    "by retrieved evidence.\n"
    "- step_omission: a necessary reasoning step is skipped.\n"
    "- modality_mismatch: a step searches the wrong modality (text vs image).\n"
    "- spurious_step: a step is unnecessary or irrelevant.\n"
    "- order_dependency_error: steps are executed in an order that breaks their dependencies.\n"
    "- multi_hop_failure: intermediate answers are not correctly chained into later hops.\n"
    "- evidence_misinterpretation: retrieved evidence is read incorrectly.\n"
    "Output strict JSON only: {\"errors\": {\"retrieval_failure\": false, "
    "\"hallucinated_entity_attribute\": false, \"step_omission\": false, \"modality_mismatch\": "
    "false, \"spurious_step\": false, \"order_dependency_error\": false, \"multi_hop_failure\": "
    "false, \"evidence_misinterpretation\": false}}";

}  // namespace

ErrorFlags annotate_errors(const Sample& sample, const EpisodeResult& episode,
                           const Backend& backend, std::vector<TranscriptEntry>* transcript) {
  Session session(backend.client, backend.spec, sample.id, "errors", transcript);
  std::vector<ChatMessage> messages = {{Role::kSystem, std::string(kErrorSystemPrompt), {}},
                                       {Role::kUser, judge_inputs(sample, episode), {}}};
  return ask_with_one_retry(session, std::move(messages), parse_error_flags,
                            "Return only the JSON object with eight boolean error flags.");
}

std::array<double, kErrorTypeCount> error_rates(const std::vector<ErrorFlags>& verdicts) {
  std::array<double, kErrorTypeCount> rates{};
  if (verdicts.empty()) return rates;
  for (const auto& v : verdicts) {
    for (std::size_t i = 0; i < kErrorTypeCount; ++i) rates[i] += v.flags[i] ? 1.0 : 0.0;
  }
  for (double& r : rates) r /= static_cast<double>(verdicts.size());
  return rates;
}

}  // namespace hoptrace
