#include <doctest.h>

#include "hoptrace/agent.hpp"
#include "hoptrace/backend.hpp"
#include "hoptrace/error.hpp"
#include "hoptrace/fixtures.hpp"
#include "test_support.hpp"

using namespace hoptrace;
using testing::entry;

namespace {

std::vector<ChatMessage> msgs(const std::string& user) {
  return {{Role::kSystem, "sys", {}}, {Role::kUser, user, {}}};
}

}  // namespace

TEST_SUITE("model-backend") {
  TEST_CASE("turn-keyed script returns the turn block verbatim") {
    auto b = testing::scripted({entry("s1", 1, "agent", "first block\n<Thought> x"),
                                entry("s1", 2, "agent", "second")});
    std::vector<TranscriptEntry> log;
    Session s(b.client, b.spec, "s1", "agent", &log);
    CHECK(s.complete(msgs("hi")) == "first block\n<Thought> x");
    CHECK(s.complete(msgs("again")) == "second");
    REQUIRE(log.size() == 2);
    CHECK(log[0].turn == 1);
    CHECK(log[1].turn == 2);
    CHECK(log[1].request.back().text == "again");
  }

  TEST_CASE("budget 2: the third call is refused") {
    auto b = testing::scripted({entry(std::nullopt, std::nullopt, std::nullopt, "ok")}, 2);
    Session s(b.client, b.spec, "s", "agent", nullptr);
    s.complete(msgs("1"));
    s.complete(msgs("2"));
    try {
      s.complete(msgs("3"));
      FAIL("expected BudgetExhausted");
    } catch (const Error& e) {
      CHECK(e.code() == ErrorCode::kBudgetExhausted);
    }
  }

  TEST_CASE("identical requests give identical outputs") {
    auto b = testing::scripted({entry(std::nullopt, std::nullopt, "judge", "R", {}, std::string("alpha.*beta"))});
    CallContext ctx{"x", 1, "judge"};
    CHECK(b.client->complete(ctx, msgs("alpha then beta")) == b.client->complete(ctx, msgs("alpha then beta")));
  }

  TEST_CASE("no matching entry is ScriptExhausted") {
    auto b = testing::scripted({entry("s1", 1, "agent", "x")});
    try {
      b.client->complete({"s2", 1, "agent"}, msgs("u"));
      FAIL("expected ScriptExhausted");
    } catch (const Error& e) {
      CHECK(e.code() == ErrorCode::kScriptExhausted);
    }
  }

  TEST_CASE("first match in file order wins; contains and cue read the last user message") {
    auto b = testing::scripted({entry(std::nullopt, std::nullopt, "golden", "both", {"Fact 1", "Fact 2"}),
                                entry(std::nullopt, std::nullopt, "golden", "cue", {}, std::string("F[a-z]+ 3")),
                                entry(std::nullopt, std::nullopt, "golden", "fallback")});
    CallContext ctx{"s", 1, "golden"};
    CHECK(b.client->complete(ctx, msgs("Fact 2 and Fact 1")) == "both");
    CHECK(b.client->complete(ctx, msgs("Fact 1 only")) == "fallback");
    CHECK(b.client->complete(ctx, msgs("see Fact 3")) == "cue");
    std::vector<ChatMessage> m = {{Role::kUser, "Fact 1 Fact 2", {}}, {Role::kAssistant, "a", {}},
                                  {Role::kUser, "nothing", {}}};
    CHECK(b.client->complete(ctx, m) == "fallback");
  }

  TEST_CASE("script file entries round-trip through JSON") {
    auto e = entry("s", 3, "rewrite", "R", {"a", "b"}, std::string("x+"));
    auto back = ScriptedBackend::entry_from_json(ScriptedBackend::entry_to_json(e));
    CHECK(back.sample == e.sample);
    CHECK(back.turn == e.turn);
    CHECK(back.purpose == e.purpose);
    CHECK(back.cue == e.cue);
    CHECK(back.contains == e.contains);
    CHECK(back.response == e.response);
  }

  TEST_CASE("replaying a transcript reproduces the run byte-identically") {
    const auto set = generate_fixtures(testing::small_spec(1));
    const auto kb = set.store();
    const auto oracle = Backend::scripted(set.oracle());
    std::vector<std::pair<std::string, std::vector<TranscriptEntry>>> logs;
    std::vector<EpisodeResult> first;
    for (const auto& s : set.samples) {
      first.push_back(run_episode(s, oracle, kb, LoopPolicy{}));
      logs.push_back({s.id, first.back().transcript});
    }
    const auto replay = Backend::scripted(replay_backend(logs));
    for (std::size_t i = 0; i < set.samples.size(); ++i) {
      const auto again = run_episode(set.samples[i], replay, kb, LoopPolicy{});
      CHECK(episode_to_json(again).dump() == episode_to_json(first[i]).dump());
    }
  }

  TEST_CASE("transcripts survive JSON") {
    std::vector<TranscriptEntry> t = {{"agent", 1, {{Role::kSystem, "s", {}}, {Role::kUser, "u", {"img.png"}}}, "r"}};
    CHECK(transcript_from_json(transcript_to_json(t)) == t);
  }

  TEST_CASE("backend specs: scripted endpoints and unknown schemes") {
    BackendSpec bad;
    bad.endpoint = "ftp://x";
    CHECK_THROWS_AS(make_backend(bad), Error);
    BackendSpec http;
    http.endpoint = "http://127.0.0.1:9/v1/chat";
    auto client = make_backend(http);
    CHECK(client->describe() == "http://127.0.0.1:9/v1/chat");
  }

  TEST_CASE("unreachable HTTP endpoint surfaces TransportError after retries") {
    BackendSpec spec;
    spec.endpoint = "http://127.0.0.1:9/v1/chat";
    spec.retries = 1;
    spec.timeout_seconds = 2;
    auto b = Backend::from_spec(spec);
    try {
      b.client->complete({"s", 1, "agent"}, msgs("u"));
      FAIL("expected TransportError");
    } catch (const Error& e) {
      CHECK(e.code() == ErrorCode::kTransportError);
    }
  }
}
