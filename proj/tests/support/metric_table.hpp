#pragma once

#include <cmath>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "hoptrace/answer_metrics.hpp"
#include "hoptrace/chain_align.hpp"
#include "hoptrace/jsonl.hpp"
#include "test_support.hpp"

namespace testing {

struct CaseOutcome {
  std::string id;
  std::string tag;
  bool ok = true;
  std::string detail;
};

inline constexpr double kMetricTolerance = 1e-12;

inline double rational(const nlohmann::json& r) {
  return r.at(0).get<double>() / r.at(1).get<double>();
}

/// Evaluates tests/data/metric_cases.json against the library.
inline std::vector<CaseOutcome> run_metric_table() {
  using namespace hoptrace;
  const auto doc = nlohmann::json::parse(read_file(data_path("metric_cases.json")));
  std::vector<CaseOutcome> out;
  for (const auto& c : doc.at("cases")) {
    CaseOutcome o{c.at("id").get<std::string>(), c.at("tag").get<std::string>(), true, ""};
    std::ostringstream why;
    auto expect = [&](const char* what, double got, double want) {
      if (!(std::abs(got - want) < kMetricTolerance)) {
        o.ok = false;
        why << what << " got " << got << " want " << want << "; ";
      }
    };
    const std::string kind = c.at("kind").get<std::string>();
    if (kind == "token_f1") {
      const auto f = token_f1(c.at("pred").get<std::string>(), c.at("gold").get<std::string>());
      expect("precision", f.precision, rational(c.at("precision")));
      expect("recall", f.recall, rational(c.at("recall")));
      expect("f1", f.f1, rational(c.at("f1")));
    } else if (kind == "delta_f1") {
      expect("delta", delta_f1(rational(c.at("with")), rational(c.at("without"))), rational(c.at("delta")));
    } else if (kind == "rollout") {
      std::vector<std::pair<Modality, std::string>> p, g;
      for (int i = 0; i < c.at("pred_steps").get<int>(); ++i) p.push_back({Modality::kText, "p" + std::to_string(i)});
      for (int i = 0; i < c.at("gold_steps").get<int>(); ++i) g.push_back({Modality::kText, "g" + std::to_string(i)});
      const auto rd = rollout_deviation(evidence_graph(p), evidence_graph(g));
      expect("rd", rd.rd, c.at("rd").get<int>());
      expect("delta_step", rd.delta_step, c.at("delta_step").get<int>());
      if (delta_step_bin_label(delta_step_bin(rd.delta_step)) != c.at("bin").get<std::string>()) {
        o.ok = false;
        why << "bin " << delta_step_bin_label(delta_step_bin(rd.delta_step)) << "; ";
      }
    } else if (kind == "coverage") {
      std::vector<ReasoningGraph> preds, golds;
      std::vector<bool> with;
      auto to_graph = [](const nlohmann::json& steps) {
        std::vector<std::pair<Modality, std::string>> ev;
        for (const auto& s : steps) ev.push_back({parse_modality(s.at(0).get<std::string>()), s.at(1).get<std::string>()});
        return evidence_graph(ev);
      };
      for (const auto& s : c.at("samples")) {
        preds.push_back(to_graph(s.at("pred")));
        golds.push_back(to_graph(s.at("gold")));
        with.push_back(s.at("has_image").get<bool>());
      }
      std::vector<CoverageInput> in;
      for (std::size_t i = 0; i < preds.size(); ++i) in.push_back({&preds[i], &golds[i], with[i]});
      const auto cov = modality_coverage(in);
      auto cell = [&](const std::string& key) -> const CoverageCell& {
        const auto slash = key.find('/');
        return cov.at(parse_modality(key.substr(0, slash)), key.substr(slash + 1) == "with");
      };
      for (const auto& [key, want] : c.at("cells").items()) {
        const auto& got = cell(key);
        expect((key + ".covered").c_str(), static_cast<double>(got.covered), want.at(0).get<double>());
        expect((key + ".gold").c_str(), static_cast<double>(got.gold), want.at(1).get<double>());
      }
      if (c.contains("render")) {
        for (const auto& [key, want] : c.at("render").items()) {
          if (cell(key).render() != want.get<std::string>()) {
            o.ok = false;
            why << key << " renders '" << cell(key).render() << "'; ";
          }
        }
      }
      if (c.contains("overall")) {
        for (const auto& [key, want] : c.at("overall").items()) {
          const auto got = cov.overall(parse_modality(key));
          expect((key + ".overall.covered").c_str(), static_cast<double>(got.covered), want.at(0).get<double>());
          expect((key + ".overall.gold").c_str(), static_cast<double>(got.gold), want.at(1).get<double>());
        }
      }
      if (c.contains("percent")) {
        for (const auto& [key, want] : c.at("percent").items()) expect("percent", cell(key).percent(), rational(want));
      }
    } else {
      o.ok = false;
      why << "unknown kind " << kind;
    }
    o.detail = why.str();
    out.push_back(std::move(o));
  }
  return out;
}

}  // namespace testing
