#include <random>

#include <benchmark/benchmark.h>

#include "hoptrace/embedding.hpp"
#include "hoptrace/knowledge_store.hpp"

namespace {

hoptrace::KnowledgeStore make_store(std::size_t n, std::size_t dim) {
  auto provider = hoptrace::make_embedding_provider("hash:" + std::to_string(dim) + ":0");
  std::vector<hoptrace::KnowledgeItem> items;
  items.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    hoptrace::KnowledgeItem it;
    it.id = "item" + std::to_string(i);
    it.modality = i % 4 == 0 ? hoptrace::Modality::kImage : hoptrace::Modality::kText;
    it.payload = "passage number " + std::to_string(i) + " about topic " + std::to_string(i % 97);
    it.embedding = provider->embed(it.payload, it.modality);
    items.push_back(std::move(it));
  }
  return hoptrace::KnowledgeStore::from_items(std::move(items), provider);
}

void BM_TextRetrieval(benchmark::State& state) {
  const auto kb = make_store(static_cast<std::size_t>(state.range(0)), 64);
  const auto action = hoptrace::RetrievalAction::text_search("which topic does passage 42 cover");
  for (auto _ : state) benchmark::DoNotOptimize(kb.retrieve(action, 5));
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_TextRetrieval)->Arg(1000)->Arg(10000)->Arg(100000);

void BM_ImageByImage(benchmark::State& state) {
  const auto kb = make_store(static_cast<std::size_t>(state.range(0)), 64);
  const auto action = hoptrace::RetrievalAction::image_search_image("item0");
  for (auto _ : state) benchmark::DoNotOptimize(kb.retrieve(action, 1));
}
BENCHMARK(BM_ImageByImage)->Arg(1000)->Arg(10000);

void BM_HashEmbedding(benchmark::State& state) {
  const auto provider = hoptrace::make_embedding_provider("hash:" + std::to_string(state.range(0)) + ":0");
  const std::string text = "What biblical scene is shown, and where is the painting held today?";
  for (auto _ : state) benchmark::DoNotOptimize(provider->embed(text, hoptrace::Modality::kText));
}
BENCHMARK(BM_HashEmbedding)->Arg(64)->Arg(768);

}  // namespace

BENCHMARK_MAIN();
