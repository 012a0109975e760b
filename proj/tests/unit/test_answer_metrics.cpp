#include <random>

#include <doctest.h>

#include "hoptrace/answer_metrics.hpp"
#include "hoptrace/error.hpp"
#include "metric_table.hpp"
#include "test_support.hpp"

using namespace hoptrace;
using testing::entry;

namespace {

EpisodeResult echo_episode(const Sample& s) {
  EpisodeResult e;
  e.sample_id = s.id;
  e.predicted = s.gold;
  e.final_answer = s.gold.final_answer;
  return e;
}

ErrorCode code_of(const std::function<void()>& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  FAIL("expected an error");
  return ErrorCode::kInvalidArgument;
}

std::string random_answer(std::mt19937_64& rng) {
  static const char* words[] = {"Partick", "the", "Glasgow", "museum", "of", "Art", "1899", "a", "Annunciation",
                                "$1,750", "Tanner's", "an", "first", "work", "F.C.", "scene"};
  std::string s;
  const int n = static_cast<int>(rng() % 7);
  for (int i = 0; i < n; ++i) s += std::string(words[rng() % 16]) + (rng() % 3 ? " " : ", ");
  return s;
}

}  // namespace

TEST_SUITE("answer-metrics") {
  TEST_CASE("25-case metric table") {
    const auto results = testing::run_metric_table();
    CHECK(results.size() == 25);
    for (const auto& r : results) CHECK_MESSAGE(r.ok, r.id << ": " << r.detail);
  }

  TEST_CASE("normalization") {
    CHECK(normalize_answer_tokens("The  Philadelphia\tMuseum, of Art!") ==
          std::vector<std::string>{"philadelphia", "museum", "of", "art"});
    CHECK(normalize_answer_tokens("A an THE").empty());
  }

  TEST_CASE("delta F1 examples") {
    CHECK(delta_f1(0.5, 0.2) == doctest::Approx(0.3).epsilon(1e-12));
    CHECK(delta_f1(0.3, 0.3) == 0.0);
    CHECK(delta_f1(0.1, 0.4) == doctest::Approx(-0.3).epsilon(1e-12));
  }

  TEST_CASE("property: swapping arguments swaps precision and recall, keeps f1") {
    std::mt19937_64 rng(5);
    for (int i = 0; i < 500; ++i) {
      const auto a = random_answer(rng);
      const auto b = random_answer(rng);
      const auto ab = token_f1(a, b);
      const auto ba = token_f1(b, a);
      CHECK(ab.precision == doctest::Approx(ba.recall).epsilon(1e-15));
      CHECK(ab.recall == doctest::Approx(ba.precision).epsilon(1e-15));
      CHECK(ab.f1 == doctest::Approx(ba.f1).epsilon(1e-15));
      CHECK(ab.f1 >= 0.0);
      CHECK(ab.f1 <= 1.0);
      if (!normalize_answer_tokens(a).empty()) CHECK(token_f1(a, a).f1 == 1.0);
    }
  }

  TEST_CASE("judge: all fives, a 4/3/5/4 reply, out-of-range") {
    auto c1 = testing::load_c1();
    const auto ep = echo_episode(c1.sample);
    auto fives = testing::scripted(
        {entry(std::nullopt, std::nullopt, "judge", R"({"accuracy":5,"entities":5,"coherence":5,"alignment":5})")});
    CHECK(judge(c1.sample, ep, fives).stacked() == 5.0);

    auto mixed = testing::scripted({entry(std::nullopt, std::nullopt, "judge",
                                          "Here you go:\n```json\n{\"scores\":{\"accuracy\":4,\"entities\":3,"
                                          "\"coherence\":5,\"alignment\":4}}\n```")});
    const auto s = judge(c1.sample, ep, mixed);
    CHECK(s == JudgeScores{4, 3, 5, 4});
    CHECK(s.stacked() == 4.0);

    auto seven = testing::scripted(
        {entry(std::nullopt, std::nullopt, "judge", R"({"accuracy":7,"entities":5,"coherence":5,"alignment":5})")});
    std::vector<TranscriptEntry> log;
    CHECK(code_of([&] { judge(c1.sample, ep, seven, &log); }) == ErrorCode::kJudgeParseFailure);
    CHECK(log.size() == 2);  // one re-ask

    auto fixed_on_retry = testing::scripted(
        {entry(std::nullopt, 1, "judge", "no idea"),
         entry(std::nullopt, 2, "judge", R"({"accuracy":0,"entities":1,"coherence":2,"alignment":3})")});
    CHECK(judge(c1.sample, ep, fixed_on_retry) == JudgeScores{0, 1, 2, 3});
  }

  TEST_CASE("judge prompt carries question, answers and both sub-chains") {
    auto c1 = testing::load_c1();
    auto b = testing::scripted(
        {entry(std::nullopt, std::nullopt, "judge", R"({"accuracy":5,"entities":5,"coherence":5,"alignment":5})")});
    std::vector<TranscriptEntry> log;
    judge(c1.sample, echo_episode(c1.sample), b, &log);
    const auto& text = log.at(0).request.back().text;
    CHECK(text.find(c1.sample.gold.question) != std::string::npos);
    CHECK(text.find(c1.sample.gold.steps[1].sub_question) != std::string::npos);
    CHECK(text.find("30332773") != std::string::npos);
  }

  TEST_CASE("error annotation and rates") {
    auto c1 = testing::load_c1();
    const auto ep = echo_episode(c1.sample);
    std::string all_false = "{";
    for (std::size_t i = 0; i < kErrorTypeCount; ++i) {
      all_false += (i ? "," : "") + std::string("\"") + std::string(error_type_key(kAllErrorTypes[i])) + "\":false";
    }
    all_false += "}";
    auto none = testing::scripted({entry(std::nullopt, std::nullopt, "errors", all_false)});
    CHECK(annotate_errors(c1.sample, ep, none).count() == 0);

    std::string one = all_false;
    one.replace(one.find("false"), 5, "true");
    auto rf = testing::scripted({entry(std::nullopt, std::nullopt, "errors", one)});
    const auto flags = annotate_errors(c1.sample, ep, rf);
    CHECK(flags.count() == 1);
    CHECK(flags.get(ErrorType::kRetrievalFailure));

    std::vector<ErrorFlags> ten(10);
    for (int i = 0; i < 8; ++i) ten[static_cast<std::size_t>(i)].set(ErrorType::kRetrievalFailure, true);
    ten[0].set(ErrorType::kSpuriousStep, true);
    const auto rates = error_rates(ten);
    CHECK(rates[0] == doctest::Approx(0.8).epsilon(1e-15));
    CHECK(rates[static_cast<std::size_t>(ErrorType::kSpuriousStep)] == doctest::Approx(0.1).epsilon(1e-15));
    CHECK(error_rates({})[0] == 0.0);
  }
}
