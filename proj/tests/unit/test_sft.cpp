#include <doctest.h>

#include "hoptrace/error.hpp"
#include "hoptrace/fixtures.hpp"
#include "hoptrace/protocol.hpp"
#include "hoptrace/sft.hpp"
#include "test_support.hpp"

using namespace hoptrace;
using testing::entry;

namespace {

ErrorCode code_of(const std::function<void()>& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  FAIL("expected an error");
  return ErrorCode::kInvalidArgument;
}

ConversationTrace c1_trace(bool attach = true) {
  auto c1 = testing::load_c1();
  const auto thoughts = augment_thoughts(c1.sample, c1.script, c1.kb);
  return compile_trace(c1.sample, thoughts, c1.kb, attach);
}

}  // namespace

TEST_SUITE("sft-export") {
  TEST_CASE("augmenter output is used verbatim, one thought per hop") {
    auto c1 = testing::load_c1();
    auto b = testing::scripted({entry(std::nullopt, 1, "augment", "  first thought  "),
                                entry(std::nullopt, std::nullopt, "augment", "later thought")});
    std::vector<TranscriptEntry> log;
    const auto th = augment_thoughts(c1.sample, b, c1.kb, &log);
    REQUIRE(th.size() == 4);
    CHECK(th[0] == "first thought");
    CHECK(th[3] == "later thought");
    CHECK(log.size() == 4);
    CHECK(log[1].request.back().text.find(c1.sample.gold.steps[1].sub_question) != std::string::npos);
  }

  TEST_CASE("empty or tag-bearing thoughts are AugmentFailure") {
    auto c1 = testing::load_c1();
    auto empty = testing::scripted({entry(std::nullopt, std::nullopt, "augment", "   ")});
    CHECK(code_of([&] { augment_thoughts(c1.sample, empty, c1.kb); }) == ErrorCode::kAugmentFailure);
    auto tagged = testing::scripted({entry(std::nullopt, std::nullopt, "augment", "ok <Search> sneaky")});
    CHECK(code_of([&] { augment_thoughts(c1.sample, tagged, c1.kb); }) == ErrorCode::kAugmentFailure);
  }

  TEST_CASE("the image-initiated example compiles to 4 search turns and an End turn") {
    auto c1 = testing::load_c1();
    const auto trace = c1_trace();
    // system, question, 4 x (assistant, user), end
    REQUIRE(trace.turns.size() == 11);
    CHECK(trace.turns[0].role == Role::kSystem);
    CHECK(trace.turns[1].role == Role::kUser);
    CHECK(trace.turns[1].text.find(c1.sample.gold.question) != std::string::npos);
    const auto& caption = c1.kb.at("30332773").payload;
    const bool has_image = trace.turns[1].text.find(caption) != std::string::npos || !trace.turns[1].image_refs.empty();
    CHECK(has_image);
    for (int h = 0; h < 4; ++h) {
      const auto& a = trace.turns[static_cast<std::size_t>(2 + 2 * h)];
      const auto& u = trace.turns[static_cast<std::size_t>(3 + 2 * h)];
      CHECK(a.role == Role::kAssistant);
      CHECK(a.text.find("<Search>") != std::string::npos);
      CHECK(u.role == Role::kUser);
      CHECK(u.evidence_id == c1.sample.gold.steps[static_cast<std::size_t>(h)].evidence_id);
    }
    CHECK(trace.turns[2].text.find("Image Retrieval with Input Image") != std::string::npos);
    CHECK(trace.turns[4].text.find("Text Retrieval with a specific query") != std::string::npos);
    CHECK(trace.turns.back().text.find("<End> Final Answer: " + c1.sample.gold.final_answer) != std::string::npos);

    const auto back = replay_trace(trace);
    CHECK(back.parse_failures == 0);
    CHECK(same_chain(back.graph, c1.sample.gold));
  }

  TEST_CASE("without image attachment the refs disappear but the caption stays") {
    const auto trace = c1_trace(false);
    for (const auto& t : trace.turns) CHECK(t.image_refs.empty());
    auto c1 = testing::load_c1();
    CHECK(trace.turns[1].text.find(c1.kb.at("30332773").payload) != std::string::npos);
  }

  TEST_CASE("zero-hop samples and thought-count mismatches are rejected") {
    auto c1 = testing::load_c1();
    Sample empty = c1.sample;
    empty.gold.steps.clear();
    CHECK(code_of([&] { compile_trace(empty, {}, c1.kb); }) == ErrorCode::kEmptyGoldGraph);
    CHECK(code_of([&] { compile_trace(c1.sample, {"only one"}, c1.kb); }) == ErrorCode::kInvalidArgument);
    Sample dangling = c1.sample;
    dangling.gold.steps[2].evidence_id = "nowhere";
    CHECK(code_of([&] { compile_trace(dangling, {"a", "b", "c", "d"}, c1.kb); }) == ErrorCode::kDanglingEvidence);
  }

  TEST_CASE("traces survive JSON and compile deterministically") {
    const auto a = c1_trace();
    const auto b = c1_trace();
    CHECK(trace_to_json(a).dump() == trace_to_json(b).dump());
    CHECK(trace_from_json(trace_to_json(a)) == a);
  }

  TEST_CASE("property: every fixture trace replays to its gold chain") {
    const auto set = generate_fixtures(testing::small_spec(6, 19));
    const auto kb = set.store();
    const auto oracle = Backend::scripted(set.oracle(), 10000);
    for (const auto& s : set.samples) {
      const auto th = augment_thoughts(s, oracle, kb);
      CHECK(th.size() == s.gold.steps.size());
      for (bool attach : {true, false}) {
        const auto trace = compile_trace(s, th, kb, attach);
        const auto back = replay_trace(trace_from_json(trace_to_json(trace)));
        CHECK(back.parse_failures == 0);
        CHECK_MESSAGE(same_chain(back.graph, s.gold), s.id);
        CHECK(back.thoughts == th);
      }
    }
  }
}
