#include "hoptrace/have.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <set>
#include <unordered_set>

#include "hoptrace/agent.hpp"
#include "hoptrace/answer_metrics.hpp"
#include "hoptrace/entities.hpp"
#include "hoptrace/error.hpp"
#include "hoptrace/protocol.hpp"
#include "hoptrace/validate.hpp"

namespace hoptrace {

using ojson = nlohmann::ordered_json;

std::string_view to_string(Decision d) {
  switch (d) {
    case Decision::kKeep: return "Keep";
    case Decision::kShrink: return "Shrink";
    case Decision::kDrop: return "Drop";
  }
  return "?";
}

Decision parse_decision(std::string_view s) {
  if (s == "Keep") return Decision::kKeep;
  if (s == "Shrink") return Decision::kShrink;
  if (s == "Drop") return Decision::kDrop;
  throw Error(ErrorCode::kParseError, "unknown decision '" + std::string(s) + "'");
}

std::vector<int> HaveVerdict::redundant_indices() const {
  std::vector<int> out;
  for (const auto& h : hops) {
    if (h.redundant) out.push_back(h.index);
  }
  return out;
}

ojson verdict_to_json(const HaveVerdict& v) {
  ojson j;
  j["sample_id"] = v.sample_id;
  ojson hops = ojson::array();
  for (const auto& h : v.hops) {
    hops.push_back(ojson{{"index", h.index},
                         {"util", h.util},
                         {"f1_full", h.f1_full},
                         {"f1_ablated", h.f1_ablated},
                         {"nav", h.nav},
                         {"redundant", h.redundant}});
  }
  j["hops"] = std::move(hops);
  j["redundant_count"] = v.redundant_count;
  j["decision"] = std::string(to_string(v.decision));
  return j;
}

namespace {

void check_hop(const Sample& sample, int t) {
  if (t < 1 || t > static_cast<int>(sample.gold.steps.size())) {
    throw Error(ErrorCode::kInvalidArgument,
                "hop " + std::to_string(t) + " outside 1.." + std::to_string(sample.gold.steps.size()));
  }
}

double golden_f1(const Sample& sample, const Backend& backend, const KnowledgeStore& kb,
                 const std::set<int>& withheld, std::vector<TranscriptEntry>* transcript) {
  EpisodeResult r = run_golden(sample, backend, kb, withheld);
  if (transcript) {
    transcript->insert(transcript->end(), r.transcript.begin(), r.transcript.end());
  }
  return token_f1(r.final_answer, sample.gold.final_answer).f1;
}

}  // namespace

UtilityDetail context_utility(const Sample& sample, const Backend& backend, const KnowledgeStore& kb,
                              int t, std::vector<TranscriptEntry>* transcript) {
  check_hop(sample, t);
  UtilityDetail d;
  d.f1_full = golden_f1(sample, backend, kb, {}, transcript);
  d.f1_ablated = golden_f1(sample, backend, kb, {t}, transcript);
  d.util = d.f1_full - d.f1_ablated;
  return d;
}

int navigational_role(const ReasoningGraph& gold, int t) {
  const int n = static_cast<int>(gold.steps.size());
  if (t < 1 || t > n) throw Error(ErrorCode::kInvalidArgument, "hop index out of range");
  if (t == n) return 0;
  const auto answer = extract_entities(gold.steps[static_cast<std::size_t>(t - 1)].intermediate_answer);
  if (answer.empty()) return 0;
  for (int u = t + 1; u <= n; ++u) {
    if (entities_intersect(answer, extract_entities(gold.steps[static_cast<std::size_t>(u - 1)].sub_question))) {
      return 1;
    }
  }
  return 0;
}

Decision decide(int redundant_count, int max_redundant) {
  if (redundant_count > max_redundant) return Decision::kDrop;
  if (redundant_count >= 1) return Decision::kShrink;
  return Decision::kKeep;
}

HaveVerdict verdict_from_utilities(const Sample& sample, const std::vector<UtilityDetail>& utils,
                                   const HavePolicy& policy) {
  if (utils.size() != sample.gold.steps.size()) {
    throw Error(ErrorCode::kInvalidArgument, "one utility per hop required");
  }
  HaveVerdict v;
  v.sample_id = sample.id;
  for (std::size_t i = 0; i < utils.size(); ++i) {
    HopVerdict h;
    h.index = static_cast<int>(i + 1);
    h.util = utils[i].util;
    h.f1_full = utils[i].f1_full;
    h.f1_ablated = utils[i].f1_ablated;
    h.nav = navigational_role(sample.gold, h.index);
    h.redundant = is_redundant(h.util, h.nav, policy.theta);
    v.redundant_count += h.redundant ? 1 : 0;
    v.hops.push_back(h);
  }
  v.decision = decide(v.redundant_count, policy.max_redundant);
  return v;
}

HaveVerdict have_verdict(const Sample& sample, const Backend& backend, const KnowledgeStore& kb,
                         const HavePolicy& policy, std::vector<TranscriptEntry>* transcript) {
  if (sample.gold.steps.empty()) throw Error(ErrorCode::kEmptyGoldGraph, "sample '" + sample.id + "' has no hops");
  const double full = golden_f1(sample, backend, kb, {}, transcript);
  std::vector<UtilityDetail> utils;
  for (int t = 1; t <= static_cast<int>(sample.gold.steps.size()); ++t) {
    UtilityDetail d;
    d.f1_full = full;
    d.f1_ablated = golden_f1(sample, backend, kb, {t}, transcript);
    d.util = d.f1_full - d.f1_ablated;
    utils.push_back(d);
  }
  return verdict_from_utilities(sample, utils, policy);
}

// ---------------------------------------------------------------------------
// Hop shrinkage

namespace {

constexpr std::string_view kRewriteSystemPrompt =
    "You repair multi-hop question decompositions. Some hops were removed as redundant. Rewrite "
    "the remaining sub-questions so that each is self-contained and none refers to a removed hop. "
    "Keep every remaining hop's modality, supporting_fact_id and answer, in the given order. "
    "Output strict JSON only: {\"subqa_chain\": [{\"subquestion\": ..., \"modality\": ..., "
    "\"supporting_fact_id\": ..., \"answer\": ...}]}";

[[noreturn]] void rewrite_failure(const Sample& s, const std::string& why) {
  throw Error(ErrorCode::kRewriteValidationFailure, "sample '" + s.id + "': " + why);
}

}  // namespace

ojson shrink_request(const Sample& sample, const HaveVerdict& verdict) {
  const auto drop = verdict.redundant_indices();
  ojson j;
  j["question"] = sample.gold.question;
  j["answer"] = sample.gold.final_answer;
  ojson removed = ojson::array();
  ojson chain = ojson::array();
  for (const auto& s : sample.gold.steps) {
    const bool gone = std::find(drop.begin(), drop.end(), s.index) != drop.end();
    (gone ? removed : chain).push_back(step_to_json(s));
  }
  j["removed_hops"] = std::move(removed);
  j["subqa_chain"] = std::move(chain);
  return j;
}

Sample hop_shrink(const Sample& sample, const HaveVerdict& verdict, const Backend& rewriter,
                  const KnowledgeStore& kb, std::vector<TranscriptEntry>* transcript) {
  if (verdict.decision != Decision::kShrink) {
    throw Error(ErrorCode::kInvalidArgument, "hop_shrink requires a Shrink verdict");
  }
  const auto drop = verdict.redundant_indices();
  std::vector<ReasoningStep> kept;
  std::set<std::string> removed_ids;
  for (const auto& s : sample.gold.steps) {
    if (std::find(drop.begin(), drop.end(), s.index) != drop.end()) {
      removed_ids.insert(s.evidence_id);
    } else {
      kept.push_back(s);
    }
  }

  Session session(rewriter.client, rewriter.spec, sample.id, "rewrite", transcript);
  const std::string reply = session.complete(
      {{Role::kSystem, std::string(kRewriteSystemPrompt), {}},
       {Role::kUser, shrink_request(sample, verdict).dump(2), {}}});

  std::vector<ReasoningStep> steps;
  try {
    const nlohmann::json parsed = extract_json_object(reply);
    const ojson j = ojson::parse(parsed.dump());
    const auto& chain = j.at("subqa_chain");
    int idx = 1;
    for (const auto& e : chain) steps.push_back(step_from_json(e, idx++));
  } catch (const Error& e) {
    rewrite_failure(sample, std::string("unparseable rewrite: ") + e.what());
  } catch (const nlohmann::json::exception& e) {
    rewrite_failure(sample, std::string("unparseable rewrite: ") + e.what());
  }

  if (steps.size() != kept.size()) {
    rewrite_failure(sample, "rewrite has " + std::to_string(steps.size()) + " hops, expected " +
                                std::to_string(kept.size()));
  }
  for (std::size_t i = 0; i < steps.size(); ++i) {
    if (removed_ids.count(steps[i].evidence_id)) {
      rewrite_failure(sample, "rewrite cites removed evidence '" + steps[i].evidence_id + "'");
    }
    if (steps[i].evidence_id != kept[i].evidence_id || steps[i].modality != kept[i].modality) {
      rewrite_failure(sample, "rewrite changed hop " + std::to_string(i + 1) + "'s evidence");
    }
    // Fork tags are structural; the rewriter only touches wording.
    steps[i].parallel_group = kept[i].parallel_group;
  }

  Sample out = sample;
  out.gold.steps = std::move(steps);
  out.gold.renumber();
  const auto check = validate_graph(out.gold, kb);
  if (!check.ok()) rewrite_failure(sample, "shrunk graph invalid: " + check.summary());
  return out;
}

// ---------------------------------------------------------------------------
// Uniqueness

std::string uniqueness_prompt(const ReasoningStep& step, const KnowledgeItem& candidate) {
  return "Sub-question: " + step.sub_question + "\nCandidate evidence (" +
         std::string(to_string(candidate.modality)) + "): " + candidate.payload +
         "\nCan this evidence alone answer the sub-question? Reply yes or no.";
}

std::vector<ConfoundingItem> uniqueness_check(const Sample& sample, const KnowledgeStore& kb,
                                              const Backend& verifier,
                                              std::vector<TranscriptEntry>* transcript) {
  std::unordered_set<std::string> used(sample.gold.input_image_ids.begin(),
                                       sample.gold.input_image_ids.end());
  for (const auto& s : sample.gold.steps) used.insert(s.evidence_id);

  std::vector<ConfoundingItem> out;
  for (const auto& step : sample.gold.steps) {
    const auto& gold_item = kb.at(step.evidence_id);
    if (!gold_item.cluster_id) continue;
    Session session(verifier.client, verifier.spec, sample.id, "verify", transcript);
    for (const KnowledgeItem* cand : kb.cluster_members(*gold_item.cluster_id)) {
      if (used.count(cand->id) || cand->modality != step.modality) continue;
      const std::string reply = session.complete(
          {{Role::kSystem,
            "You check whether a single piece of evidence is sufficient to answer a question. "
            "Answer with yes or no.",
            {}},
           {Role::kUser, uniqueness_prompt(step, *cand), {}}});
      std::string head = trim(reply).substr(0, 3);
      std::transform(head.begin(), head.end(), head.begin(),
                     [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
      if (head == "yes") out.push_back({step.index, cand->id, reply});
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Quality scoring

namespace {

constexpr std::string_view kQualitySystemPrompt =
    "You review a multi-hop question with its gold reasoning chain. Score the chain on four "
    "dimensions, each an integer from 1 (poor) to 5 (excellent): factual_correctness (answers "
    "are supported by the evidence), step_necessity (every hop is needed), clarity (questions "
    "are unambiguous), multimodal_alignment (image hops really need the image). Output strict "
    "JSON only: {\"factual_correctness\": 0, \"step_necessity\": 0, \"clarity\": 0, "
    "\"multimodal_alignment\": 0}";

int score_1_5(const nlohmann::json& obj, const char* key) {
  auto it = obj.find(key);
  if (it == obj.end() || !it->is_number()) {
    throw Error(ErrorCode::kJudgeParseFailure, std::string("'") + key + "' missing or not a number");
  }
  const double v = it->get<double>();
  if (v != std::floor(v) || v < 1 || v > 5) {
    throw Error(ErrorCode::kJudgeParseFailure, std::string("'") + key + "' = " + it->dump() + " outside 1..5");
  }
  return static_cast<int>(v);
}

}  // namespace

QualityScores parse_quality_scores(std::string_view reply) {
  const nlohmann::json j = extract_json_object(reply);
  const nlohmann::json& body = j.contains("scores") ? j["scores"] : j;
  QualityScores q;
  q.factual_correctness = score_1_5(body, "factual_correctness");
  q.step_necessity = score_1_5(body, "step_necessity");
  q.clarity = score_1_5(body, "clarity");
  q.multimodal_alignment = score_1_5(body, "multimodal_alignment");
  return q;
}

QualityScores quality_score(const Sample& sample, const Backend& checker,
                            std::vector<TranscriptEntry>* transcript) {
  Session session(checker.client, checker.spec, sample.id, "quality", transcript);
  ojson in;
  in["question"] = sample.gold.question;
  in["answer"] = sample.gold.final_answer;
  in["subqa_chain"] = subchain_json(sample.gold);
  return parse_quality_scores(session.complete(
      {{Role::kSystem, std::string(kQualitySystemPrompt), {}}, {Role::kUser, in.dump(2), {}}}));
}

// ---------------------------------------------------------------------------
// Pipeline

std::string_view to_string(CurationOutcome o) {
  switch (o) {
    case CurationOutcome::kKept: return "kept";
    case CurationOutcome::kShrunk: return "shrunk";
    case CurationOutcome::kDropped: return "dropped";
    case CurationOutcome::kQuarantined: return "quarantined";
    case CurationOutcome::kConfounded: return "confounded";
    case CurationOutcome::kLowQuality: return "low_quality";
  }
  return "?";
}

std::vector<std::string> key_entities(const ReasoningGraph& g) {
  std::vector<std::string> out;
  for (const auto& e : extract_entities(g.final_answer)) out.push_back(entity_text(e));
  return out;
}

ojson curation_record_to_json(const CurationRecord& r) {
  ojson j;
  j["sample_id"] = r.sample_id;
  j["outcome"] = std::string(to_string(r.outcome));
  j["verdict"] = verdict_to_json(r.verdict);
  ojson conf = ojson::array();
  for (const auto& c : r.confounders) {
    conf.push_back(ojson{{"step", c.step}, {"item_id", c.item_id}, {"reply", c.reply}});
  }
  j["confounders"] = std::move(conf);
  if (r.quality) {
    j["quality"] = ojson{{"factual_correctness", r.quality->factual_correctness},
                         {"step_necessity", r.quality->step_necessity},
                         {"clarity", r.quality->clarity},
                         {"multimodal_alignment", r.quality->multimodal_alignment},
                         {"mean", r.quality->mean()}};
  }
  if (!r.reason.empty()) j["reason"] = r.reason;
  return j;
}

CurationRecord curate_sample(const Sample& sample, const CurationBackends& backends,
                             const KnowledgeStore& kb, const CurationPolicy& policy) {
  CurationRecord rec;
  rec.sample_id = sample.id;
  try {
    const auto valid = validate_graph(sample.gold, kb);
    if (!valid.ok()) {
      rec.outcome = CurationOutcome::kQuarantined;
      rec.reason = "invalid gold graph: " + valid.summary();
      return rec;
    }
    rec.verdict = have_verdict(sample, backends.answerer, kb, policy.have);
    if (rec.verdict.decision == Decision::kDrop) {
      rec.outcome = CurationOutcome::kDropped;
      return rec;
    }
    Sample current = sample;
    if (rec.verdict.decision == Decision::kShrink) {
      if (!backends.reviser) {
        rec.outcome = CurationOutcome::kQuarantined;
        rec.reason = "shrink needed but no rewrite backend configured";
        return rec;
      }
      current = hop_shrink(sample, rec.verdict, *backends.reviser, kb);
    }
    if (policy.check_uniqueness && backends.reviser) {
      rec.confounders = uniqueness_check(current, kb, *backends.reviser);
      if (!rec.confounders.empty()) {
        rec.outcome = CurationOutcome::kConfounded;
        return rec;
      }
    }
    if (backends.checker) {
      rec.quality = quality_score(current, *backends.checker);
      if (rec.quality->mean() < policy.min_quality) {
        rec.outcome = CurationOutcome::kLowQuality;
        return rec;
      }
    }
    current.gold.key_entities = key_entities(current.gold);
    rec.outcome = rec.verdict.decision == Decision::kShrink ? CurationOutcome::kShrunk
                                                            : CurationOutcome::kKept;
    rec.curated = std::move(current);
  } catch (const Error& e) {
    rec.outcome = CurationOutcome::kQuarantined;
    rec.reason = e.what();
  }
  return rec;
}

ojson CurationFunnel::to_json() const {
  return ojson{{"input", input},         {"after_filter", after_filter}, {"output", output},
               {"kept", kept},           {"shrunk", shrunk},             {"dropped", dropped},
               {"quarantined", quarantined}, {"confounded", confounded}, {"low_quality", low_quality}};
}

CurationFunnel funnel(const std::vector<CurationRecord>& records) {
  CurationFunnel f;
  f.input = records.size();
  for (const auto& r : records) {
    switch (r.outcome) {
      case CurationOutcome::kKept: ++f.kept; break;
      case CurationOutcome::kShrunk: ++f.shrunk; break;
      case CurationOutcome::kDropped: ++f.dropped; break;
      case CurationOutcome::kQuarantined: ++f.quarantined; break;
      case CurationOutcome::kConfounded: ++f.confounded; break;
      case CurationOutcome::kLowQuality: ++f.low_quality; break;
    }
    if (r.outcome != CurationOutcome::kDropped && r.outcome != CurationOutcome::kQuarantined) {
      ++f.after_filter;
    }
    if (r.accepted()) ++f.output;
  }
  return f;
}

}  // namespace hoptrace
