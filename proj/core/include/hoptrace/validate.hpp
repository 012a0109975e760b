#pragma once

#include <string>
#include <vector>

#include "hoptrace/knowledge_store.hpp"
#include "hoptrace/types.hpp"

namespace hoptrace {

enum class ViolationKind {
  kEmptyField,
  kNoSteps,
  kNonContiguousIndex,
  kDanglingEvidence,
  kModalityMismatch,
  kDuplicateEvidence,
  kTopologyMismatch,
  kInputImageNotInStore,
  kScatteredParallelGroup,
};

std::string_view to_string(ViolationKind kind);

struct Violation {
  ViolationKind kind;
  int step = 0;  // 0 when the violation is graph-level
  std::string message;
};

struct ValidationResult {
  std::vector<Violation> violations;

  bool ok() const { return violations.empty(); }
  bool has(ViolationKind kind) const;
  std::string summary() const;
};

/// True when the modality sequence and fork tags fit the label's definition.
/// Depends only on the steps' modalities and parallel groups.
bool topology_consistent(Topology topology, const std::vector<ReasoningStep>& steps);

/// Structural and referential checks of a gold graph against a store.
/// Violations are returned as data; nothing is thrown.
ValidationResult validate_graph(const ReasoningGraph& graph, const KnowledgeStore& kb);

}  // namespace hoptrace
