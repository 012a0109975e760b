#pragma once

#include <array>
#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "hoptrace/backend.hpp"
#include "hoptrace/embedding.hpp"
#include "hoptrace/knowledge_store.hpp"
#include "hoptrace/types.hpp"

namespace hoptrace {

struct FixtureSpec {
  std::uint64_t seed = 7;
  std::array<int, 5> per_topology{10, 10, 10, 10, 10};  // kAllTopologies order
  int min_hops = 2;
  int max_hops = 5;
  double redundancy_rate = 0.3;     // per non-structural hop
  double navigational_rate = 0.15;  // per non-structural hop that is not redundant
  double confounder_rate = 0.3;     // per sample
  double near_duplicate_rate = 0.3; // per sample
  int distractors = 2;              // text distractors per sample
  std::size_t dimension = 64;
  double near_duplicate_cosine = 0.92;

  int total() const;
  nlohmann::ordered_json to_json() const;
};

struct PlantedNearDuplicate {
  int step = 0;
  std::string gold_id;
  std::string item_id;
  double cosine = 0.0;
};

struct PlantedConfounder {
  int step = 0;
  std::string item_id;
};

/// Ground truth for one generated sample.
struct PlantedLabels {
  std::string sample_id;
  Topology topology = Topology::kTextOnlyChain;
  std::vector<int> structural;
  std::vector<int> redundant;     // Util = 0 and Nav = 0 under the oracle answerer
  std::vector<int> navigational;  // Util = 0 but Nav = 1
  std::vector<PlantedConfounder> confounders;
  std::vector<PlantedNearDuplicate> near_duplicates;
  std::vector<std::string> distractors;

  nlohmann::ordered_json to_json() const;
  static PlantedLabels from_json(const nlohmann::ordered_json& j);
};

struct FixtureSet {
  FixtureSpec spec;
  std::string embedder;              // hash provider spec used for every vector
  std::vector<KnowledgeItem> items;  // with embeddings
  std::vector<std::string> precomputed;  // ids whose vectors go into the manifest
  std::vector<Sample> samples;
  std::vector<PlantedLabels> labels;
  // One script serving every role: agent replay of the gold chain, oracle
  // golden-answerer, rewriter, uniqueness verifier, thought augmenter, and
  // catch-alls for judge/errors/quality/closed_book/fixed_rag.
  std::vector<ScriptedBackend::Entry> script;

  std::shared_ptr<const EmbeddingProvider> provider() const;
  KnowledgeStore store() const;
  std::shared_ptr<ScriptedBackend> oracle() const;
};

/// Deterministic in `spec` alone: the same spec yields byte-identical files.
FixtureSet generate_fixtures(const FixtureSpec& spec);

/// Writes corpus.jsonl, samples.jsonl, planted.jsonl, oracle_script.jsonl and
/// fixture.json into `dir` (created if needed).
void write_fixtures(const FixtureSet& set, const std::string& dir);

std::vector<PlantedLabels> read_planted(const std::string& path);

}  // namespace hoptrace
