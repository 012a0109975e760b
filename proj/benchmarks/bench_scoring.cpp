#include <benchmark/benchmark.h>

#include "hoptrace/agent.hpp"
#include "hoptrace/answer_metrics.hpp"
#include "hoptrace/chain_align.hpp"
#include "hoptrace/fixtures.hpp"
#include "hoptrace/report.hpp"

namespace {

struct Scored {
  hoptrace::FixtureSet set;
  hoptrace::KnowledgeStore kb;
  std::vector<hoptrace::EpisodeResult> episodes;
};

const Scored& fixture() {
  static const Scored s = [] {
    hoptrace::FixtureSpec spec;
    spec.per_topology.fill(40);
    auto set = hoptrace::generate_fixtures(spec);
    auto kb = set.store();
    const auto oracle = hoptrace::Backend::scripted(set.oracle(), 100000);
    std::vector<hoptrace::EpisodeResult> eps;
    for (const auto& smp : set.samples) eps.push_back(hoptrace::run_episode(smp, oracle, kb, hoptrace::LoopPolicy{}));
    return Scored{std::move(set), std::move(kb), std::move(eps)};
  }();
  return s;
}

void BM_TokenF1(benchmark::State& state) {
  const std::string pred = "The Annunciation, held by the Philadelphia Museum of Art since 1899";
  const std::string gold = "The Annunciation; Philadelphia Museum of Art; 1899; $1,750";
  for (auto _ : state) benchmark::DoNotOptimize(hoptrace::token_f1(pred, gold));
}
BENCHMARK(BM_TokenF1);

void BM_AlignSoft(benchmark::State& state) {
  const auto& f = fixture();
  std::size_t i = 0;
  for (auto _ : state) {
    const auto& s = f.set.samples[i % f.set.samples.size()];
    benchmark::DoNotOptimize(hoptrace::align_soft(f.episodes[i % f.episodes.size()].predicted, s.gold, f.kb));
    ++i;
  }
}
BENCHMARK(BM_AlignSoft);

void BM_ScoreAndReport(benchmark::State& state) {
  const auto& f = fixture();
  for (auto _ : state) {
    std::vector<hoptrace::SampleScore> scores;
    for (std::size_t i = 0; i < f.episodes.size(); ++i) {
      scores.push_back(hoptrace::score_episode(f.set.samples[i], f.episodes[i], f.kb, hoptrace::ScoreOptions{}));
    }
    benchmark::DoNotOptimize(
        hoptrace::build_report(scores, f.set.samples, f.episodes, hoptrace::kDefaultTaus, nlohmann::ordered_json::object()));
  }
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(f.episodes.size()));
}
BENCHMARK(BM_ScoreAndReport)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
