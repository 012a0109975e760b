#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

namespace hoptrace {

enum class Modality { kText, kImage };

std::string_view to_string(Modality m);
Modality parse_modality(std::string_view s);

enum class Topology {
  kImageInitiatedChain,
  kTextInitiatedChain,
  kTextOnlyChain,
  kParallelImageTextFork,
  kMultiImagesFork,
};

inline constexpr Topology kAllTopologies[] = {
    Topology::kImageInitiatedChain, Topology::kTextInitiatedChain, Topology::kTextOnlyChain,
    Topology::kParallelImageTextFork, Topology::kMultiImagesFork};

/// Canonical label, e.g. "Image-Initiated Chain".
std::string_view to_string(Topology t);
/// Accepts the canonical labels plus the aliases seen in generator output
/// ("Text Chain", "Parallel Visual-Textual Fork", snake_case forms, ...).
Topology parse_topology(std::string_view s);

/// One retrieval-grounded hop.
struct ReasoningStep {
  int index = 0;  // 1-based
  std::string sub_question;
  Modality modality = Modality::kText;
  std::string evidence_id;
  std::string intermediate_answer;
  // Steps sharing a tag are order-interchangeable (fork topologies).
  std::optional<std::string> parallel_group;

  bool operator==(const ReasoningStep&) const = default;
};

struct ReasoningGraph {
  std::string question;
  std::string final_answer;
  std::vector<std::string> input_image_ids;
  Topology topology = Topology::kTextOnlyChain;
  std::vector<ReasoningStep> steps;
  std::vector<std::string> key_entities;

  std::size_t length() const { return steps.size(); }
  bool has_input_image() const { return !input_image_ids.empty(); }
  std::size_t count_modality(Modality m) const;
  void renumber();

  bool operator==(const ReasoningGraph&) const = default;
};

struct Sample {
  std::string id;
  ReasoningGraph gold;
  std::vector<std::string> kb_scope;  // empty = whole store

  bool operator==(const Sample&) const = default;
};

/// Most plausible topology for a bare modality sequence. Parallel forks are
/// only reported when a parallel group spans both modalities.
Topology infer_topology(const std::vector<ReasoningStep>& steps);

// Dataset record serialization. Field order is fixed so that
// serialize(parse(x)) == x for canonical records.
nlohmann::ordered_json step_to_json(const ReasoningStep& s);
ReasoningStep step_from_json(const nlohmann::ordered_json& j, int index);
nlohmann::ordered_json graph_to_json(const ReasoningGraph& g);
ReasoningGraph graph_from_json(const nlohmann::ordered_json& j);
nlohmann::ordered_json sample_to_json(const Sample& s);
Sample sample_from_json(const nlohmann::ordered_json& j);

std::string serialize_sample(const Sample& s);
Sample parse_sample(std::string_view line);

/// Reads a dataset file (one record per line). Rejects duplicate ids.
std::vector<Sample> read_samples(const std::string& path);
void write_samples(const std::string& path, const std::vector<Sample>& samples);

}  // namespace hoptrace
