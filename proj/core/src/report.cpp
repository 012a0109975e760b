#include "hoptrace/report.hpp"

#include <cstdio>
#include <unordered_map>

#include "hoptrace/error.hpp"
#include "hoptrace/jsonl.hpp"

namespace hoptrace {

using ojson = nlohmann::ordered_json;

TraceFile read_trace(const std::string& path) {
  TraceFile tf;
  for_each_line(path, [&](std::string_view line, std::size_t n) {
    ojson j;
    try {
      j = ojson::parse(line);
    } catch (const nlohmann::json::parse_error& e) {
      throw Error(ErrorCode::kParseError, path + ":" + std::to_string(n) + ": " + e.what());
    }
    if (j.contains("meta") && j.size() == 1) {
      tf.meta = j["meta"];
      return;
    }
    try {
      tf.episodes.push_back(episode_from_json(j));
    } catch (const Error& e) {
      throw Error(ErrorCode::kParseError, path + ":" + std::to_string(n) + ": " + e.what());
    }
  });
  return tf;
}

std::string trace_header(const ojson& meta) { return ojson{{"meta", meta}}.dump(); }

// ---------------------------------------------------------------------------

namespace {

ojson pair_list(const std::vector<std::pair<double, double>>& v) {
  ojson j = ojson::object();
  for (const auto& [tau, score] : v) {
    char key[32];
    std::snprintf(key, sizeof key, "%.2f", tau);
    j[key] = score;
  }
  return j;
}

ojson judge_json(const JudgeScores& s) {
  return ojson{{"accuracy", s.accuracy},
               {"entities", s.entities},
               {"coherence", s.coherence},
               {"alignment", s.alignment},
               {"stacked", s.stacked()}};
}

}  // namespace

ojson sample_score_to_json(const SampleScore& s) {
  ojson j;
  j["sample_id"] = s.sample_id;
  j["topology"] = std::string(to_string(s.topology));
  j["gold_hops"] = s.gold_hops;
  j["has_image"] = s.has_image;
  j["termination"] = std::string(to_string(s.termination));
  j["f1"] = s.f1;
  if (s.closed_book_f1) j["closed_book_f1"] = *s.closed_book_f1;
  if (s.delta_f1) j["delta_f1"] = *s.delta_f1;
  if (s.golden_f1) j["golden_f1"] = *s.golden_f1;
  if (s.judge) j["judge"] = judge_json(*s.judge);
  if (s.errors) {
    ojson e;
    for (ErrorType t : kAllErrorTypes) e[std::string(error_type_key(t))] = s.errors->get(t);
    j["errors"] = std::move(e);
  }
  j["hps"] = s.alignment.hps;
  j["soft_hps"] = pair_list(s.alignment.soft_hps_by_tau);
  j["rd"] = s.alignment.rd;
  j["delta_step"] = s.alignment.delta_step;
  ojson pairs = ojson::array();
  for (const auto& p : s.alignment.matched_pairs) {
    pairs.push_back(ojson{{"gold", p.gold_index}, {"pred", p.pred_index}, {"similarity", p.similarity}});
  }
  j["matched_pairs"] = std::move(pairs);
  return j;
}

SampleScore score_episode(const Sample& sample, const EpisodeResult& episode, const KnowledgeStore& kb,
                          const ScoreOptions& options, const EpisodeResult* closed_book,
                          const EpisodeResult* golden) {
  if (options.require_delta_f1 && !closed_book) {
    throw Error(ErrorCode::kMissingCompanionTrace,
                "delta F1 for '" + sample.id + "' needs a closed-book trace");
  }
  SampleScore s;
  s.sample_id = sample.id;
  s.topology = sample.gold.topology;
  s.gold_hops = static_cast<int>(sample.gold.steps.size());
  s.has_image = sample.gold.has_input_image();
  s.termination = episode.termination;
  s.f1 = token_f1(episode.final_answer, sample.gold.final_answer).f1;
  if (closed_book) {
    s.closed_book_f1 = token_f1(closed_book->final_answer, sample.gold.final_answer).f1;
    s.delta_f1 = delta_f1(s.f1, *s.closed_book_f1);
  }
  if (golden) s.golden_f1 = token_f1(golden->final_answer, sample.gold.final_answer).f1;
  s.alignment = align_soft(episode.predicted, sample.gold, kb, options.taus);
  return s;
}

// ---------------------------------------------------------------------------

ojson Aggregate::to_json() const {
  ojson j;
  j["count"] = count;
  j["f1"] = f1;
  j["delta_f1"] = delta_f1 ? ojson(*delta_f1) : ojson(nullptr);
  j["golden_f1"] = golden_f1 ? ojson(*golden_f1) : ojson(nullptr);
  if (judge) {
    j["judge"] = ojson{{"accuracy", (*judge)[0]},
                       {"entities", (*judge)[1]},
                       {"coherence", (*judge)[2]},
                       {"alignment", (*judge)[3]},
                       {"stacked", (*judge)[4]}};
  } else {
    j["judge"] = nullptr;
  }
  j["hps"] = hps;
  j["soft_hps"] = pair_list(soft_hps);
  j["rd"] = rd;
  j["delta_step"] = delta_step;
  return j;
}

Aggregate aggregate(const std::vector<const SampleScore*>& scores, const std::vector<double>& taus) {
  Aggregate a;
  a.count = scores.size();
  for (double tau : taus) a.soft_hps.emplace_back(tau, 0.0);
  if (scores.empty()) return a;

  double delta = 0.0, golden = 0.0;
  std::size_t n_delta = 0, n_golden = 0, n_judge = 0;
  std::array<double, 5> judge{};
  for (const SampleScore* s : scores) {
    a.f1 += s->f1;
    a.hps += s->alignment.hps;
    a.rd += s->alignment.rd;
    a.delta_step += s->alignment.delta_step;
    for (std::size_t i = 0; i < taus.size() && i < s->alignment.soft_hps_by_tau.size(); ++i) {
      a.soft_hps[i].second += s->alignment.soft_hps_by_tau[i].second;
    }
    if (s->delta_f1) {
      delta += *s->delta_f1;
      ++n_delta;
    }
    if (s->golden_f1) {
      golden += *s->golden_f1;
      ++n_golden;
    }
    if (s->judge) {
      judge[0] += s->judge->accuracy;
      judge[1] += s->judge->entities;
      judge[2] += s->judge->coherence;
      judge[3] += s->judge->alignment;
      judge[4] += s->judge->stacked();
      ++n_judge;
    }
  }
  const double n = static_cast<double>(scores.size());
  a.f1 /= n;
  a.hps /= n;
  a.rd /= n;
  a.delta_step /= n;
  for (auto& p : a.soft_hps) p.second /= n;
  // Companion metrics average over the samples that have them.
  if (n_delta) a.delta_f1 = delta / static_cast<double>(n_delta);
  if (n_golden) a.golden_f1 = golden / static_cast<double>(n_golden);
  if (n_judge) {
    for (double& x : judge) x /= static_cast<double>(n_judge);
    a.judge = judge;
  }
  return a;
}

Report build_report(const std::vector<SampleScore>& scores, const std::vector<Sample>& dataset,
                    const std::vector<EpisodeResult>& episodes, const std::vector<double>& taus,
                    ojson meta) {
  Report r;
  r.meta = std::move(meta);
  r.taus = taus;
  r.samples = scores;

  std::vector<const SampleScore*> all;
  std::map<Topology, std::vector<const SampleScore*>> by_topo;
  std::map<int, std::vector<const SampleScore*>> by_hops;
  std::array<std::size_t, kDeltaStepBins> n_delta{};
  for (const auto& s : r.samples) {
    all.push_back(&s);
    by_topo[s.topology].push_back(&s);
    by_hops[s.gold_hops].push_back(&s);
    auto& bin = r.delta_step_bins[delta_step_bin(s.alignment.delta_step)];
    ++bin.count;
    bin.mean_f1 += s.f1;
    if (s.delta_f1) {
      bin.mean_delta_f1 = bin.mean_delta_f1.value_or(0.0) + *s.delta_f1;
      ++n_delta[delta_step_bin(s.alignment.delta_step)];
    }
  }
  for (std::size_t b = 0; b < kDeltaStepBins; ++b) {
    auto& bin = r.delta_step_bins[b];
    if (bin.count) bin.mean_f1 /= static_cast<double>(bin.count);
    if (bin.mean_delta_f1) *bin.mean_delta_f1 /= static_cast<double>(n_delta[b]);
  }
  r.overall = aggregate(all, taus);
  for (const auto& [t, v] : by_topo) r.by_topology[t] = aggregate(v, taus);
  for (const auto& [h, v] : by_hops) r.by_hops[h] = aggregate(v, taus);

  std::unordered_map<std::string, const Sample*> gold;
  for (const auto& s : dataset) gold[s.id] = &s;
  std::vector<CoverageInput> cov;
  for (const auto& e : episodes) {
    auto it = gold.find(e.sample_id);
    if (it == gold.end()) continue;
    cov.push_back({&e.predicted, &it->second->gold, it->second->gold.has_input_image()});
  }
  r.coverage = modality_coverage(cov);

  std::vector<ErrorFlags> flags;
  for (const auto& s : r.samples) {
    if (s.errors) flags.push_back(*s.errors);
  }
  if (!flags.empty()) r.error_rates = error_rates(flags);
  return r;
}

namespace {

ojson cell_json(const CoverageCell& c) {
  return ojson{{"covered", c.covered},
               {"gold", c.gold},
               {"percent", c.gold ? ojson(c.percent()) : ojson(nullptr)},
               {"display", c.render()}};
}

}  // namespace

ojson Report::to_json() const {
  ojson j;
  j["meta"] = meta;
  ojson agg;
  agg["overall"] = overall.to_json();
  ojson topo = ojson::object();
  for (const auto& [t, a] : by_topology) topo[std::string(to_string(t))] = a.to_json();
  agg["by_topology"] = std::move(topo);
  ojson hops = ojson::object();
  for (const auto& [h, a] : by_hops) hops[std::to_string(h)] = a.to_json();
  agg["by_hops"] = std::move(hops);
  ojson bins = ojson::array();
  for (std::size_t b = 0; b < kDeltaStepBins; ++b) {
    const auto& bin = delta_step_bins[b];
    bins.push_back(ojson{{"bin", std::string(delta_step_bin_label(b))},
                         {"count", bin.count},
                         {"mean_f1", bin.count ? ojson(bin.mean_f1) : ojson(nullptr)},
                         {"mean_delta_f1", bin.mean_delta_f1 ? ojson(*bin.mean_delta_f1) : ojson(nullptr)}});
  }
  agg["delta_step_bins"] = std::move(bins);
  ojson cov;
  for (Modality m : {Modality::kText, Modality::kImage}) {
    cov[std::string(to_string(m))] = ojson{{"without_image", cell_json(coverage.at(m, false))},
                                           {"with_image", cell_json(coverage.at(m, true))},
                                           {"overall", cell_json(coverage.overall(m))}};
  }
  agg["modality_coverage"] = std::move(cov);
  if (error_rates) {
    ojson e;
    for (ErrorType t : kAllErrorTypes) e[std::string(error_type_key(t))] = (*error_rates)[static_cast<std::size_t>(t)];
    agg["error_rates"] = std::move(e);
  } else {
    agg["error_rates"] = nullptr;
  }
  j["aggregate"] = std::move(agg);
  ojson samples_json = ojson::array();
  for (const auto& s : samples) samples_json.push_back(sample_score_to_json(s));
  j["samples"] = std::move(samples_json);
  return j;
}

namespace {

std::string fmt(double v, int prec = 3) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.*f", prec, v);
  return buf;
}

std::string opt(const std::optional<double>& v) { return v ? fmt(*v) : "-"; }

std::string row(const std::string& label, const Aggregate& a) {
  char buf[256];
  std::snprintf(buf, sizeof buf, "%-28s %6zu %7s %7s %7s %7s %7s %6s", label.c_str(), a.count,
                fmt(a.f1).c_str(), opt(a.delta_f1).c_str(), opt(a.golden_f1).c_str(),
                a.judge ? fmt((*a.judge)[4], 2).c_str() : "-", fmt(a.hps).c_str(), fmt(a.rd, 2).c_str());
  std::string out = buf;
  for (const auto& [tau, v] : a.soft_hps) out += " " + fmt(v);
  return out + "\n";
}

}  // namespace

std::string render_report(const Report& r) {
  std::string out;
  std::string head = "group                         count      F1     dF1  GoldF1      LJ     HPS     RD";
  for (double tau : r.taus) head += "  s@" + fmt(tau, 2);
  out += head + "\n";
  out += row("overall", r.overall);
  for (const auto& [t, a] : r.by_topology) out += row(std::string(to_string(t)), a);
  for (const auto& [h, a] : r.by_hops) out += row(std::to_string(h) + " hops", a);

  out += "\ndelta-step   count  mean F1  mean dF1\n";
  for (std::size_t b = 0; b < kDeltaStepBins; ++b) {
    const auto& bin = r.delta_step_bins[b];
    char buf[128];
    std::snprintf(buf, sizeof buf, "%-10s %7zu %8s %9s\n", std::string(delta_step_bin_label(b)).c_str(),
                  bin.count, bin.count ? fmt(bin.mean_f1).c_str() : "-", opt(bin.mean_delta_f1).c_str());
    out += buf;
  }

  out += "\nmodality   without image          with image             overall\n";
  for (Modality m : {Modality::kText, Modality::kImage}) {
    char buf[160];
    std::snprintf(buf, sizeof buf, "%-10s %-22s %-22s %s\n", std::string(to_string(m)).c_str(),
                  r.coverage.at(m, false).render().c_str(), r.coverage.at(m, true).render().c_str(),
                  r.coverage.overall(m).render().c_str());
    out += buf;
  }
  if (r.error_rates) {
    out += "\nerror type                       rate\n";
    for (ErrorType t : kAllErrorTypes) {
      char buf[96];
      std::snprintf(buf, sizeof buf, "%-32s %s\n", std::string(error_type_key(t)).c_str(),
                    fmt((*r.error_rates)[static_cast<std::size_t>(t)]).c_str());
      out += buf;
    }
  }
  return out;
}

// ---------------------------------------------------------------------------

ojson DatasetStats::to_json() const {
  ojson topo = ojson::object();
  for (const auto& [t, c] : by_topology) topo[std::string(to_string(t))] = c;
  ojson hops = ojson::object();
  for (const auto& [h, c] : by_hops) hops[std::to_string(h)] = c;
  return ojson{{"samples", samples}, {"by_topology", topo}, {"by_hops", hops}, {"mean_hops", mean_hops}};
}

DatasetStats dataset_stats(const std::vector<Sample>& samples) {
  DatasetStats st;
  st.samples = samples.size();
  std::size_t hops = 0;
  for (const auto& s : samples) {
    ++st.by_topology[s.gold.topology];
    ++st.by_hops[s.gold.steps.size()];
    hops += s.gold.steps.size();
  }
  if (!samples.empty()) st.mean_hops = static_cast<double>(hops) / static_cast<double>(samples.size());
  return st;
}

}  // namespace hoptrace
