#include "hoptrace/validate.hpp"

#include <map>
#include <set>

namespace hoptrace {

std::string_view to_string(ViolationKind kind) {
  switch (kind) {
    case ViolationKind::kEmptyField: return "empty field";
    case ViolationKind::kNoSteps: return "no steps";
    case ViolationKind::kNonContiguousIndex: return "non-contiguous indices";
    case ViolationKind::kDanglingEvidence: return "dangling evidence_id";
    case ViolationKind::kModalityMismatch: return "modality mismatch";
    case ViolationKind::kDuplicateEvidence: return "duplicate evidence_id";
    case ViolationKind::kTopologyMismatch: return "topology/step mismatch";
    case ViolationKind::kInputImageNotInStore: return "input image not in store";
    case ViolationKind::kScatteredParallelGroup: return "scattered parallel group";
  }
  return "?";
}

bool ValidationResult::has(ViolationKind kind) const {
  for (const auto& v : violations) {
    if (v.kind == kind) return true;
  }
  return false;
}

std::string ValidationResult::summary() const {
  std::string out;
  for (const auto& v : violations) {
    if (!out.empty()) out += "; ";
    out += std::string(to_string(v.kind));
    if (v.step > 0) out += " (step " + std::to_string(v.step) + ")";
    if (!v.message.empty()) out += ": " + v.message;
  }
  return out;
}

bool topology_consistent(Topology topology, const std::vector<ReasoningStep>& steps) {
  std::size_t images = 0;
  std::size_t texts = 0;
  std::size_t leading_images = 0;
  bool leading = true;
  for (const auto& s : steps) {
    if (s.modality == Modality::kImage) {
      ++images;
      if (leading) ++leading_images;
    } else {
      ++texts;
      leading = false;
    }
  }
  switch (topology) {
    case Topology::kTextOnlyChain:
      return images == 0 && texts > 0;
    case Topology::kImageInitiatedChain:
      return !steps.empty() && steps.front().modality == Modality::kImage && texts > 0;
    case Topology::kTextInitiatedChain:
      return !steps.empty() && steps.front().modality == Modality::kText && images > 0;
    case Topology::kMultiImagesFork:
      return leading_images >= 2;
    case Topology::kParallelImageTextFork: {
      if (images == 0 || texts == 0) return false;
      std::map<std::string, std::set<Modality>> groups;
      for (const auto& s : steps) {
        if (s.parallel_group) groups[*s.parallel_group].insert(s.modality);
      }
      if (groups.empty()) return true;  // untagged records: modality mix is all we can check
      for (const auto& [name, mods] : groups) {
        if (mods.size() == 2) return true;
      }
      return false;
    }
  }
  return false;
}

ValidationResult validate_graph(const ReasoningGraph& graph, const KnowledgeStore& kb) {
  ValidationResult r;
  auto add = [&](ViolationKind k, int step, std::string msg) {
    r.violations.push_back({k, step, std::move(msg)});
  };

  if (graph.question.empty()) add(ViolationKind::kEmptyField, 0, "question");
  if (graph.final_answer.empty()) add(ViolationKind::kEmptyField, 0, "answer");
  if (graph.steps.empty()) add(ViolationKind::kNoSteps, 0, "");

  for (const auto& id : graph.input_image_ids) {
    const auto* item = kb.find(id);
    if (!item || item->modality != Modality::kImage) {
      add(ViolationKind::kInputImageNotInStore, 0, id);
    }
  }

  std::set<std::string> seen_evidence;
  std::map<std::string, std::pair<std::size_t, std::size_t>> group_span;  // first, last position
  std::map<std::string, std::size_t> group_count;
  for (std::size_t pos = 0; pos < graph.steps.size(); ++pos) {
    const auto& s = graph.steps[pos];
    const int expected = static_cast<int>(pos + 1);
    if (s.index != expected) {
      add(ViolationKind::kNonContiguousIndex, expected,
          "index " + std::to_string(s.index) + " at position " + std::to_string(expected));
    }
    if (s.sub_question.empty()) add(ViolationKind::kEmptyField, expected, "sub_question");
    if (s.intermediate_answer.empty()) add(ViolationKind::kEmptyField, expected, "answer");
    if (s.evidence_id.empty()) {
      add(ViolationKind::kEmptyField, expected, "evidence_id");
    } else {
      const auto* item = kb.find(s.evidence_id);
      if (!item) {
        add(ViolationKind::kDanglingEvidence, expected, s.evidence_id);
      } else if (item->modality != s.modality) {
        add(ViolationKind::kModalityMismatch, expected,
            s.evidence_id + " is " + std::string(to_string(item->modality)));
      }
      if (!seen_evidence.insert(s.evidence_id).second) {
        add(ViolationKind::kDuplicateEvidence, expected, s.evidence_id);
      }
    }
    if (s.parallel_group) {
      auto [it, fresh] = group_span.try_emplace(*s.parallel_group, pos, pos);
      if (!fresh) it->second.second = pos;
      ++group_count[*s.parallel_group];
    }
  }
  for (const auto& [name, span] : group_span) {
    if (span.second - span.first + 1 != group_count[name]) {
      add(ViolationKind::kScatteredParallelGroup, 0, name);
    }
  }
  if (!graph.steps.empty() && !topology_consistent(graph.topology, graph.steps)) {
    add(ViolationKind::kTopologyMismatch, 0, std::string(to_string(graph.topology)));
  }
  return r;
}

}  // namespace hoptrace
