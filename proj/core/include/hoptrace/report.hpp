#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "hoptrace/agent.hpp"
#include "hoptrace/answer_metrics.hpp"
#include "hoptrace/chain_align.hpp"
#include "hoptrace/knowledge_store.hpp"
#include "hoptrace/types.hpp"

namespace hoptrace {

// ---------------------------------------------------------------------------
// Trace files: a {"meta": {...}} header line, then one episode per line.

struct TraceFile {
  nlohmann::ordered_json meta;
  std::vector<EpisodeResult> episodes;
};

TraceFile read_trace(const std::string& path);
std::string trace_header(const nlohmann::ordered_json& meta);

// ---------------------------------------------------------------------------
// Per-sample scores

struct SampleScore {
  std::string sample_id;
  Topology topology = Topology::kTextOnlyChain;
  int gold_hops = 0;
  bool has_image = false;
  Termination termination = Termination::kEndTag;
  double f1 = 0.0;
  std::optional<double> closed_book_f1;
  std::optional<double> delta_f1;
  std::optional<double> golden_f1;
  std::optional<JudgeScores> judge;
  std::optional<ErrorFlags> errors;
  AlignmentResult alignment;
};

nlohmann::ordered_json sample_score_to_json(const SampleScore& s);

struct ScoreOptions {
  std::vector<double> taus = kDefaultTaus;
  bool require_delta_f1 = false;  // MissingCompanionTrace without closed-book traces
};

/// Everything except model-judged fields.
SampleScore score_episode(const Sample& sample, const EpisodeResult& episode, const KnowledgeStore& kb,
                          const ScoreOptions& options, const EpisodeResult* closed_book = nullptr,
                          const EpisodeResult* golden = nullptr);

// ---------------------------------------------------------------------------
// Aggregates

struct Aggregate {
  std::size_t count = 0;
  double f1 = 0.0;
  std::optional<double> delta_f1;
  std::optional<double> golden_f1;
  std::optional<std::array<double, 5>> judge;  // accuracy, entities, coherence, alignment, stacked
  double hps = 0.0;
  std::vector<std::pair<double, double>> soft_hps;
  double rd = 0.0;
  double delta_step = 0.0;

  nlohmann::ordered_json to_json() const;
};

Aggregate aggregate(const std::vector<const SampleScore*>& scores, const std::vector<double>& taus);

struct DeltaStepBin {
  std::size_t count = 0;
  double mean_f1 = 0.0;
  std::optional<double> mean_delta_f1;
};

struct Report {
  nlohmann::ordered_json meta;
  std::vector<double> taus;
  std::vector<SampleScore> samples;
  Aggregate overall;
  std::map<Topology, Aggregate> by_topology;
  std::map<int, Aggregate> by_hops;
  std::array<DeltaStepBin, kDeltaStepBins> delta_step_bins{};
  ModalityCoverage coverage;
  std::optional<std::array<double, kErrorTypeCount>> error_rates;

  nlohmann::ordered_json to_json() const;
};

/// Aggregates per-sample scores; `episodes` supplies the predicted graphs for
/// modality coverage (matched to samples by id).
Report build_report(const std::vector<SampleScore>& scores, const std::vector<Sample>& dataset,
                    const std::vector<EpisodeResult>& episodes, const std::vector<double>& taus,
                    nlohmann::ordered_json meta);

/// Plain-text tables for the terminal.
std::string render_report(const Report& report);

// ---------------------------------------------------------------------------
// Dataset statistics

struct DatasetStats {
  std::size_t samples = 0;
  std::map<Topology, std::size_t> by_topology;
  std::map<std::size_t, std::size_t> by_hops;
  double mean_hops = 0.0;

  nlohmann::ordered_json to_json() const;
};

DatasetStats dataset_stats(const std::vector<Sample>& samples);

}  // namespace hoptrace
