#include <map>
#include <set>

#include <doctest.h>

#include "hoptrace/fixtures.hpp"
#include "hoptrace/have.hpp"
#include "hoptrace/jsonl.hpp"
#include "hoptrace/validate.hpp"
#include "test_support.hpp"

using namespace hoptrace;

namespace {

constexpr auto I = Modality::kImage;
constexpr auto T = Modality::kText;

// Shape rules written out from the topology definitions.
bool has_shape(const ReasoningGraph& g) {
  const auto& s = g.steps;
  auto images = g.count_modality(I);
  switch (g.topology) {
    case Topology::kImageInitiatedChain:
      return s.front().modality == I;
    case Topology::kTextInitiatedChain:
      return s.front().modality == T && s.back().modality == I;
    case Topology::kTextOnlyChain:
      return images == 0;
    case Topology::kParallelImageTextFork: {
      std::map<std::string, std::set<Modality>> groups;
      for (const auto& st : s) {
        if (st.parallel_group) groups[*st.parallel_group].insert(st.modality);
      }
      for (const auto& [_, m] : groups) {
        if (m.size() == 2) return true;
      }
      return false;
    }
    case Topology::kMultiImagesFork: {
      std::size_t before_text = 0;
      for (const auto& st : s) {
        if (st.modality == T) break;
        ++before_text;
      }
      return before_text >= 2 && images < s.size();
    }
  }
  return false;
}

std::string dir_bytes(const std::string& dir) {
  std::string all;
  for (const char* f : {"corpus.jsonl", "samples.jsonl", "planted.jsonl", "oracle_script.jsonl", "fixture.json"}) {
    all += std::string(f) + "\n" + read_file(dir + "/" + f);
  }
  return all;
}

}  // namespace

TEST_SUITE("synth-fixtures") {
  TEST_CASE("seed 7 twice gives byte-identical files; another seed differs") {
    testing::TempDir a("fxa"), b("fxb"), c("fxc");
    write_fixtures(generate_fixtures(testing::small_spec(10, 7)), a.path().string());
    write_fixtures(generate_fixtures(testing::small_spec(10, 7)), b.path().string());
    write_fixtures(generate_fixtures(testing::small_spec(10, 8)), c.path().string());
    CHECK(dir_bytes(a.path().string()) == dir_bytes(b.path().string()));
    CHECK(dir_bytes(a.path().string()) != dir_bytes(c.path().string()));
  }

  TEST_CASE("10 per topology: 50 valid samples, mean hops in [2, 5], shapes hold") {
    const auto set = generate_fixtures(testing::small_spec(10));
    const auto kb = set.store();
    REQUIRE(set.samples.size() == 50);
    double hops = 0.0;
    std::map<Topology, int> by;
    for (const auto& s : set.samples) {
      const auto v = validate_graph(s.gold, kb);
      CHECK_MESSAGE(v.ok(), s.id << ": " << v.summary());
      CHECK_MESSAGE(has_shape(s.gold), s.id);
      CHECK(s.gold.steps.size() >= 2);
      CHECK(s.gold.steps.size() <= 5);
      hops += static_cast<double>(s.gold.steps.size());
      ++by[s.gold.topology];
    }
    const double mean = hops / 50.0;
    CHECK(mean >= 2.0);
    CHECK(mean <= 5.0);
    for (auto t : kAllTopologies) CHECK(by[t] == 10);
  }

  TEST_CASE("files read back into the same samples and labels") {
    const auto set = generate_fixtures(testing::small_spec(3));
    testing::TempDir d("fxr");
    write_fixtures(set, d.path().string());
    CHECK(read_samples(d.file("samples.jsonl")) == set.samples);
    const auto planted = read_planted(d.file("planted.jsonl"));
    REQUIRE(planted.size() == set.labels.size());
    for (std::size_t i = 0; i < planted.size(); ++i) {
      CHECK(planted[i].to_json().dump() == set.labels[i].to_json().dump());
    }
    const auto kb = KnowledgeStore::ingest(d.file("corpus.jsonl"), set.provider());
    CHECK(kb.content_hash() == set.store().content_hash());
  }

  TEST_CASE("labels are complete and consistent") {
    const auto set = generate_fixtures(testing::small_spec(10, 3));
    const auto kb = set.store();
    REQUIRE(set.labels.size() == set.samples.size());
    std::size_t confounders = 0, near = 0;
    for (std::size_t i = 0; i < set.samples.size(); ++i) {
      const auto& s = set.samples[i];
      const auto& lab = set.labels[i];
      CHECK(lab.sample_id == s.id);
      CHECK(lab.topology == s.gold.topology);
      std::set<int> seen;
      for (const auto* group : {&lab.structural, &lab.redundant, &lab.navigational}) {
        for (int t : *group) {
          CHECK(t >= 1);
          CHECK(t <= static_cast<int>(s.gold.steps.size()));
          CHECK_MESSAGE(seen.insert(t).second, s.id << " hop " << t << " has two roles");
        }
      }
      for (const auto& c : lab.confounders) {
        REQUIRE(kb.contains(c.item_id));
        const auto& gold_item = kb.at(s.gold.steps[static_cast<std::size_t>(c.step - 1)].evidence_id);
        CHECK(kb.at(c.item_id).cluster_id == gold_item.cluster_id);
        ++confounders;
      }
      for (const auto& n : lab.near_duplicates) {
        CHECK(kb.similarity(n.gold_id, n.item_id) == doctest::Approx(n.cosine).epsilon(1e-9));
        ++near;
      }
      for (const auto& id : lab.distractors) CHECK(kb.contains(id));
    }
    CHECK(confounders > 0);
    CHECK(near > 0);
  }

  TEST_CASE("a planted redundant hop at position 3 is flagged exactly there") {
    const auto set = generate_fixtures(testing::small_spec(10));
    const auto kb = set.store();
    const auto oracle = Backend::scripted(set.oracle(), 10000);
    bool found = false;
    for (std::size_t i = 0; i < set.samples.size(); ++i) {
      if (set.labels[i].redundant != std::vector<int>{3}) continue;
      found = true;
      const auto v = have_verdict(set.samples[i], oracle, kb, HavePolicy{});
      CHECK(v.redundant_indices() == std::vector<int>{3});
      CHECK(v.decision == Decision::kShrink);
    }
    CHECK(found);
  }
}
