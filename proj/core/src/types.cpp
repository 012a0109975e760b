#include "hoptrace/types.hpp"

#include <algorithm>
#include <cctype>
#include <map>
#include <set>

#include "hoptrace/error.hpp"
#include "hoptrace/jsonl.hpp"

namespace hoptrace {

using ojson = nlohmann::ordered_json;

std::string_view error_code_name(ErrorCode code) {
  switch (code) {
    case ErrorCode::kInvalidArgument: return "InvalidArgument";
    case ErrorCode::kParseError: return "ParseError";
    case ErrorCode::kIoError: return "IoError";
    case ErrorCode::kDuplicateId: return "DuplicateId";
    case ErrorCode::kMissingEmbedding: return "MissingEmbedding";
    case ErrorCode::kInvalidEmbedding: return "InvalidEmbedding";
    case ErrorCode::kUnknownImageId: return "UnknownImageId";
    case ErrorCode::kEmptyStoreForModality: return "EmptyStoreForModality";
    case ErrorCode::kProviderUnavailable: return "ProviderUnavailable";
    case ErrorCode::kDimensionMismatch: return "DimensionMismatch";
    case ErrorCode::kBudgetExhausted: return "BudgetExhausted";
    case ErrorCode::kTransportError: return "TransportError";
    case ErrorCode::kScriptExhausted: return "ScriptExhausted";
    case ErrorCode::kDanglingEvidence: return "DanglingEvidence";
    case ErrorCode::kJudgeParseFailure: return "JudgeParseFailure";
    case ErrorCode::kEmptyGoldGraph: return "EmptyGoldGraph";
    case ErrorCode::kRewriteValidationFailure: return "RewriteValidationFailure";
    case ErrorCode::kAugmentFailure: return "AugmentFailure";
    case ErrorCode::kMissingCompanionTrace: return "MissingCompanionTrace";
  }
  return "Unknown";
}

std::string_view to_string(Modality m) { return m == Modality::kImage ? "image" : "text"; }

Modality parse_modality(std::string_view s) {
  std::string lower(s);
  std::transform(lower.begin(), lower.end(), lower.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  if (lower == "text") return Modality::kText;
  if (lower == "image") return Modality::kImage;
  throw Error(ErrorCode::kParseError, "unknown modality '" + std::string(s) + "'");
}

std::string_view to_string(Topology t) {
  switch (t) {
    case Topology::kImageInitiatedChain: return "Image-Initiated Chain";
    case Topology::kTextInitiatedChain: return "Text-Initiated Chain";
    case Topology::kTextOnlyChain: return "Text-Only Chain";
    case Topology::kParallelImageTextFork: return "Parallel Image-Text Fork";
    case Topology::kMultiImagesFork: return "Multi-Images Fork";
  }
  return "?";
}

namespace {

// Lowercase and keep only letters so "Image-Initiated Chain",
// "image_initiated_chain" and "ImageInitiatedChain" compare equal.
std::string squash(std::string_view s) {
  std::string out;
  for (unsigned char c : s) {
    if (std::isalpha(c)) out.push_back(static_cast<char>(std::tolower(c)));
  }
  return out;
}

}  // namespace

Topology parse_topology(std::string_view s) {
  static const std::map<std::string, Topology> kNames = {
      {"imageinitiatedchain", Topology::kImageInitiatedChain},
      {"imageinitiated", Topology::kImageInitiatedChain},
      {"textinitiatedchain", Topology::kTextInitiatedChain},
      {"textinitiated", Topology::kTextInitiatedChain},
      {"textonlychain", Topology::kTextOnlyChain},
      {"textchain", Topology::kTextOnlyChain},
      {"textonly", Topology::kTextOnlyChain},
      {"parallelimagetextfork", Topology::kParallelImageTextFork},
      {"parallelvisualtextualfork", Topology::kParallelImageTextFork},
      {"imagetextfork", Topology::kParallelImageTextFork},
      {"multiimagesfork", Topology::kMultiImagesFork},
      {"parallelmultiimagesfork", Topology::kMultiImagesFork},
      {"multiimagefork", Topology::kMultiImagesFork},
  };
  auto it = kNames.find(squash(s));
  if (it == kNames.end()) {
    throw Error(ErrorCode::kParseError, "unknown graph_type '" + std::string(s) + "'");
  }
  return it->second;
}

std::size_t ReasoningGraph::count_modality(Modality m) const {
  return static_cast<std::size_t>(
      std::count_if(steps.begin(), steps.end(), [m](const auto& s) { return s.modality == m; }));
}

void ReasoningGraph::renumber() {
  for (std::size_t i = 0; i < steps.size(); ++i) steps[i].index = static_cast<int>(i + 1);
}

Topology infer_topology(const std::vector<ReasoningStep>& steps) {
  const bool any_image = std::any_of(steps.begin(), steps.end(),
                                     [](const auto& s) { return s.modality == Modality::kImage; });
  if (!any_image) return Topology::kTextOnlyChain;

  std::map<std::string, std::set<Modality>> groups;
  for (const auto& s : steps) {
    if (s.parallel_group) groups[*s.parallel_group].insert(s.modality);
  }
  for (const auto& [name, mods] : groups) {
    if (mods.size() == 2) return Topology::kParallelImageTextFork;
  }

  std::size_t leading_images = 0;
  for (const auto& s : steps) {
    if (s.modality != Modality::kImage) break;
    ++leading_images;
  }
  if (leading_images >= 2) return Topology::kMultiImagesFork;
  if (leading_images == 1) return Topology::kImageInitiatedChain;
  return Topology::kTextInitiatedChain;
}

namespace {

std::string json_scalar_to_string(const ojson& j) {
  if (j.is_string()) return j.get<std::string>();
  if (j.is_number_integer()) return std::to_string(j.get<long long>());
  if (j.is_number_unsigned()) return std::to_string(j.get<unsigned long long>());
  throw Error(ErrorCode::kParseError, "expected string or integer id, got " + j.dump());
}

std::string required_string(const ojson& j, const char* key) {
  auto it = j.find(key);
  if (it == j.end() || !it->is_string()) {
    throw Error(ErrorCode::kParseError, std::string("missing string field '") + key + "'");
  }
  return it->get<std::string>();
}

std::vector<std::string> string_list(const ojson& j, const char* key) {
  std::vector<std::string> out;
  auto it = j.find(key);
  if (it == j.end() || it->is_null()) return out;
  if (!it->is_array()) throw Error(ErrorCode::kParseError, std::string("'") + key + "' must be an array");
  for (const auto& v : *it) out.push_back(json_scalar_to_string(v));
  return out;
}

}  // namespace

ojson step_to_json(const ReasoningStep& s) {
  ojson j;
  j["subquestion"] = s.sub_question;
  j["modality"] = std::string(to_string(s.modality));
  j["supporting_fact_id"] = s.evidence_id;
  j["answer"] = s.intermediate_answer;
  if (s.parallel_group) j["parallel_group"] = *s.parallel_group;
  return j;
}

ReasoningStep step_from_json(const ojson& j, int index) {
  if (!j.is_object()) throw Error(ErrorCode::kParseError, "subqa_chain entry must be an object");
  ReasoningStep s;
  s.index = index;
  s.sub_question = required_string(j, "subquestion");
  s.modality = parse_modality(required_string(j, "modality"));
  auto ev = j.find("supporting_fact_id");
  if (ev == j.end()) throw Error(ErrorCode::kParseError, "missing 'supporting_fact_id'");
  s.evidence_id = json_scalar_to_string(*ev);
  auto ans = j.find("answer");
  if (ans != j.end() && !ans->is_null()) s.intermediate_answer = ans->get<std::string>();
  auto pg = j.find("parallel_group");
  if (pg != j.end() && !pg->is_null()) s.parallel_group = json_scalar_to_string(*pg);
  return s;
}

ojson graph_to_json(const ReasoningGraph& g) {
  ojson j;
  j["question"] = g.question;
  j["answer"] = g.final_answer;
  if (g.input_image_ids.size() == 1) {
    j["image_id"] = g.input_image_ids.front();
  } else if (g.input_image_ids.size() > 1) {
    j["image_ids"] = g.input_image_ids;
  }
  j["graph_type"] = std::string(to_string(g.topology));
  ojson chain = ojson::array();
  for (const auto& s : g.steps) chain.push_back(step_to_json(s));
  j["subqa_chain"] = std::move(chain);
  j["key_entities"] = g.key_entities;
  return j;
}

ReasoningGraph graph_from_json(const ojson& j) {
  if (!j.is_object()) throw Error(ErrorCode::kParseError, "record must be an object");
  ReasoningGraph g;
  g.question = required_string(j, "question");
  auto ans = j.find("answer");
  if (ans != j.end() && ans->is_string()) g.final_answer = ans->get<std::string>();
  if (auto it = j.find("image_id"); it != j.end() && !it->is_null()) {
    g.input_image_ids.push_back(json_scalar_to_string(*it));
  }
  for (auto& id : string_list(j, "image_ids")) g.input_image_ids.push_back(std::move(id));
  auto chain = j.find("subqa_chain");
  if (chain != j.end() && !chain->is_null()) {
    if (!chain->is_array()) throw Error(ErrorCode::kParseError, "'subqa_chain' must be an array");
    int idx = 1;
    for (const auto& step : *chain) g.steps.push_back(step_from_json(step, idx++));
  }
  auto gt = j.find("graph_type");
  g.topology = (gt != j.end() && gt->is_string()) ? parse_topology(gt->get<std::string>())
                                                   : infer_topology(g.steps);
  g.key_entities = string_list(j, "key_entities");
  return g;
}

ojson sample_to_json(const Sample& s) {
  ojson j;
  j["id"] = s.id;
  const ojson g = graph_to_json(s.gold);
  for (auto& [k, v] : g.items()) j[k] = v;
  if (!s.kb_scope.empty()) j["kb_scope"] = s.kb_scope;
  return j;
}

Sample sample_from_json(const ojson& j) {
  Sample s;
  auto id = j.find("id");
  if (id == j.end()) throw Error(ErrorCode::kParseError, "record has no 'id'");
  s.id = json_scalar_to_string(*id);
  s.gold = graph_from_json(j);
  s.kb_scope = string_list(j, "kb_scope");
  return s;
}

std::string serialize_sample(const Sample& s) { return sample_to_json(s).dump(); }

Sample parse_sample(std::string_view line) {
  ojson j;
  try {
    j = ojson::parse(line);
  } catch (const nlohmann::json::parse_error& e) {
    throw Error(ErrorCode::kParseError, e.what());
  }
  return sample_from_json(j);
}

std::vector<Sample> read_samples(const std::string& path) {
  std::vector<Sample> out;
  std::set<std::string> seen;
  for_each_line(path, [&](std::string_view line, std::size_t n) {
    Sample s;
    try {
      s = parse_sample(line);
    } catch (const Error& e) {
      throw Error(ErrorCode::kParseError, path + ":" + std::to_string(n) + ": " + e.what());
    }
    if (!seen.insert(s.id).second) {
      throw Error(ErrorCode::kDuplicateId, "sample id '" + s.id + "' repeated in " + path);
    }
    out.push_back(std::move(s));
  });
  return out;
}

void write_samples(const std::string& path, const std::vector<Sample>& samples) {
  std::string buf;
  for (const auto& s : samples) {
    buf += serialize_sample(s);
    buf += '\n';
  }
  write_file(path, buf);
}

}  // namespace hoptrace
