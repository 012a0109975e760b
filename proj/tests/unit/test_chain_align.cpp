#include <random>

#include <doctest.h>

#include "align_oracle.hpp"
#include "hoptrace/chain_align.hpp"
#include "hoptrace/error.hpp"
#include "test_support.hpp"

using namespace hoptrace;
using testing::evidence_graph;

namespace {

constexpr auto T = Modality::kText;
constexpr auto I = Modality::kImage;

KnowledgeStore two_by_one_store() {
  // pred p = e0; cos(g1, p) = 0.92, cos(g2, p) = 0.3
  const std::size_t dim = 8;
  std::vector<KnowledgeItem> items = {
      testing::item("g1", T, "g1", testing::at_cosine(dim, 0.92, 1)),
      testing::item("g2", T, "g2", testing::at_cosine(dim, 0.3, 2)),
      testing::item("p", T, "p", testing::basis(dim, 0)),
      testing::item("img", I, "img", testing::basis(dim, 0)),
  };
  return KnowledgeStore::from_items(std::move(items), make_embedding_provider("hash:8:0"));
}

}  // namespace

TEST_SUITE("chain-align") {
  TEST_CASE("hps_exact examples") {
    const auto gold = evidence_graph({{T, "A"}, {T, "B"}});
    CHECK(hps_exact(evidence_graph({{T, "A"}, {T, "B"}}), gold) == 1.0);
    CHECK(hps_exact(evidence_graph({{T, "B"}, {T, "A"}}), gold) == 1.0);
    CHECK(hps_exact(evidence_graph({{T, "A"}, {T, "A"}}), gold) == 0.5);
    CHECK(hps_exact(evidence_graph({}), gold) == 0.0);
    CHECK(hps_exact(evidence_graph({{T, "C"}, {T, "D"}, {T, "B"}}), gold) == 0.5);
    CHECK(hps_exact(evidence_graph({{T, "A"}, {T, "B"}, {T, "C"}, {T, "D"}}), gold) == 1.0);
    try {
      hps_exact(gold, evidence_graph({}));
      FAIL("expected EmptyGoldGraph");
    } catch (const Error& e) {
      CHECK(e.code() == ErrorCode::kEmptyGoldGraph);
    }
  }

  TEST_CASE("soft-HPS on the 2x1 near-duplicate example") {
    const auto kb = two_by_one_store();
    const auto gold = evidence_graph({{T, "g1"}, {T, "g2"}});
    const auto pred = evidence_graph({{T, "p"}});
    const auto r = align_soft(pred, gold, kb, {1.0, 0.95, 0.90});
    REQUIRE(r.matched_pairs.size() == 1);
    CHECK(r.matched_pairs[0].gold_index == 1);
    CHECK(r.matched_pairs[0].pred_index == 1);
    CHECK(r.matched_pairs[0].similarity == doctest::Approx(0.92).epsilon(1e-12));
    CHECK(r.soft_hps_by_tau[0].second == 0.0);
    CHECK(r.soft_hps_by_tau[1].second == 0.0);
    CHECK(r.soft_hps_by_tau[2].second == 0.5);
    CHECK(r.hps == 0.0);
    CHECK(r.rd == 1);
    CHECK(r.delta_step == -1);
  }

  TEST_CASE("cross-modality and empty retrievals weigh nothing") {
    const auto kb = two_by_one_store();
    const auto gold = evidence_graph({{T, "g1"}});
    const auto w = evidence_similarity(evidence_graph({{I, "img"}, {T, ""}}), gold, kb);
    CHECK(w[0][0] == 0.0);
    CHECK(w[0][1] == 0.0);
    CHECK(align_soft(evidence_graph({{I, "img"}}), gold, kb).matched_pairs.empty());
  }

  TEST_CASE("max_weight_matching equals brute force up to 6x6") {
    std::mt19937_64 rng(11);
    std::uniform_real_distribution<double> u(-0.3, 1.0);
    for (int trial = 0; trial < 600; ++trial) {
      const std::size_t rows = 1 + rng() % 6, cols = 1 + rng() % 6;
      WeightMatrix w(rows, std::vector<double>(cols));
      for (auto& row : w) {
        for (double& x : row) x = (rng() % 5 == 0) ? 0.0 : u(rng);
      }
      const auto a = max_weight_matching(w);
      CHECK(a.total_weight == doctest::Approx(testing::brute_max_weight(w)).epsilon(1e-12));
      // reported assignment is a matching and sums to the reported weight
      std::vector<bool> used(cols, false);
      double sum = 0.0;
      REQUIRE(a.row_to_col.size() == rows);
      for (std::size_t r = 0; r < rows; ++r) {
        const int c = a.row_to_col[r];
        if (c < 0) continue;
        CHECK_FALSE(used[static_cast<std::size_t>(c)]);
        used[static_cast<std::size_t>(c)] = true;
        CHECK(w[r][static_cast<std::size_t>(c)] > 0.0);
        sum += w[r][static_cast<std::size_t>(c)];
      }
      CHECK(sum == doctest::Approx(a.total_weight).epsilon(1e-12));
    }
  }

  TEST_CASE("empty and degenerate matrices") {
    CHECK(max_weight_matching({}).row_to_col.empty());
    const auto a = max_weight_matching({{0.0, -1.0}, {-2.0, 0.0}});
    CHECK(a.total_weight == 0.0);
    CHECK(a.row_to_col == std::vector<int>{-1, -1});
  }

  TEST_CASE("align_soft equals the lexicographic brute force") {
    std::mt19937_64 rng(23);
    const auto kb = testing::random_align_store(rng, 8, 6);
    const std::vector<double> taus = {1.0, 0.95, 0.9, 0.85, 0.5};
    for (int trial = 0; trial < 400; ++trial) {
      const auto [pred, gold] = testing::random_align_pair(rng, kb, 6);
      const auto got = align_soft(pred, gold, kb, taus);
      const auto want = testing::brute_align(pred, gold, kb, taus);
      const double g = static_cast<double>(gold.steps.size());
      CHECK(got.hps == doctest::Approx(want.exact / g).epsilon(1e-12));
      CHECK(got.total_weight == doctest::Approx(want.weight).epsilon(1e-9));
      for (std::size_t t = 0; t < taus.size(); ++t) {
        CHECK(got.soft_hps_by_tau[t].second == doctest::Approx(want.soft[t] / g).epsilon(1e-12));
      }
    }
  }

  TEST_CASE("property: tau = 1 is exact HPS, and soft-HPS never rises as tau rises") {
    std::mt19937_64 rng(31);
    const auto kb = testing::random_align_store(rng, 10, 5);
    for (int trial = 0; trial < 500; ++trial) {
      const auto [pred, gold] = testing::random_align_pair(rng, kb, 6);
      const auto r = align_soft(pred, gold, kb, {1.0, 0.95, 0.9, 0.85, 0.7, 0.0});
      CHECK(r.soft_hps_by_tau[0].second == hps_exact(pred, gold));
      for (std::size_t t = 1; t < r.soft_hps_by_tau.size(); ++t) {
        CHECK(r.soft_hps_by_tau[t].second >= r.soft_hps_by_tau[t - 1].second);
      }
      CHECK(r.hps >= 0.0);
      CHECK(r.hps <= 1.0);
    }
  }

  TEST_CASE("rollout deviation and delta-step bins") {
    const auto g4 = evidence_graph({{T, "a"}, {T, "b"}, {T, "c"}, {T, "d"}});
    CHECK(rollout_deviation(evidence_graph({}), g4).rd == 4);
    CHECK(rollout_deviation(evidence_graph({}), g4).delta_step == -4);
    CHECK(rollout_deviation(g4, g4).rd == 0);
    const auto six = evidence_graph({{T, "a"}, {T, "b"}, {T, "c"}, {T, "d"}, {T, "e"}, {T, "f"}});
    CHECK(rollout_deviation(six, g4).delta_step == 2);
    CHECK(delta_step_bin_label(delta_step_bin(-7)) == "<=-3");
    CHECK(delta_step_bin_label(delta_step_bin(-3)) == "<=-3");
    CHECK(delta_step_bin_label(delta_step_bin(0)) == "0");
    CHECK(delta_step_bin_label(delta_step_bin(3)) == "3");
    CHECK(delta_step_bin_label(delta_step_bin(4)) == ">=4");
    CHECK(delta_step_bin_label(delta_step_bin(40)) == ">=4");
  }

  TEST_CASE("modality coverage cells") {
    const auto gold = evidence_graph({{I, "x"}, {T, "y"}, {T, "z"}});
    const auto pred = evidence_graph({{T, "z"}, {I, "x"}});
    const auto cov = modality_coverage({{&pred, &gold, true}});
    CHECK(cov.at(I, true).covered == 1);
    CHECK(cov.at(I, true).gold == 1);
    CHECK(cov.at(T, true).covered == 1);
    CHECK(cov.at(T, true).gold == 2);
    CHECK(cov.at(T, false).render() == "–");
    CHECK(cov.at(T, true).render() == "1/2 (50.00%)");
    CHECK(cov.overall(T).gold == 2);
  }
}
