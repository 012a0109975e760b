// hoptrace command-line driver.

#include <algorithm>
#include <atomic>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <mutex>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>
#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include "hoptrace/agent.hpp"
#include "hoptrace/answer_metrics.hpp"
#include "hoptrace/error.hpp"
#include "hoptrace/fixtures.hpp"
#include "hoptrace/hashing.hpp"
#include "hoptrace/have.hpp"
#include "hoptrace/jsonl.hpp"
#include "hoptrace/knowledge_store.hpp"
#include "hoptrace/parallel.hpp"
#include "hoptrace/report.hpp"
#include "hoptrace/sft.hpp"
#include "hoptrace/validate.hpp"

namespace fs = std::filesystem;
using ojson = nlohmann::ordered_json;
using namespace hoptrace;

namespace {

constexpr const char* kVersion = "0.1.0";

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// ---------------------------------------------------------------------------
// flags > config file > environment (HOPTRACE_<KEY>)

std::string env_name(const std::string& key) {
  std::string out = "HOPTRACE_";
  for (char c : key) out.push_back(c == '-' ? '_' : static_cast<char>(std::toupper(static_cast<unsigned char>(c))));
  return out;
}

template <typename T>
T from_text(const std::string& s) {
  if constexpr (std::is_same_v<T, std::string>) {
    return s;
  } else if constexpr (std::is_same_v<T, bool>) {
    return s == "1" || s == "true" || s == "yes" || s == "on";
  } else {
    std::istringstream in(s);
    T v{};
    in >> v;
    if (in.fail()) throw UsageError("cannot parse '" + s + "'");
    return v;
  }
}

class Settings {
 public:
  void load(const std::string& path) {
    path_ = path;
    if (path.empty()) return;
    try {
      config_ = ojson::parse(read_file(path));
    } catch (const nlohmann::json::exception& e) {
      throw UsageError("config " + path + ": " + e.what());
    }
    if (!config_.is_object()) throw UsageError("config " + path + " must hold a JSON object");
    for (const char* secret : {"api_key", "api-key", "token"}) {
      if (config_.contains(secret)) throw UsageError("credentials belong in the environment, not in " + path);
    }
  }

  template <typename T>
  void resolve(const CLI::Option* opt, const std::string& key, T& var) const {
    if (opt && opt->count() > 0) return;
    std::string k = key;
    std::replace(k.begin(), k.end(), '-', '_');
    if (config_.contains(k)) {
      const auto& v = config_[k];
      if constexpr (std::is_same_v<T, std::string>) {
        var = v.is_string() ? v.get<std::string>() : v.dump();
      } else {
        var = v.get<T>();
      }
      return;
    }
    if (const char* e = std::getenv(env_name(key).c_str())) var = from_text<T>(e);
  }

  std::string config_hash() const { return config_.empty() ? "" : sha256_hex(config_.dump()); }

 private:
  std::string path_;
  ojson config_ = ojson::object();
};

std::vector<double> parse_taus(const std::string& text) {
  std::vector<double> out;
  std::stringstream ss(text);
  std::string part;
  while (std::getline(ss, part, ',')) {
    if (part.empty()) continue;
    out.push_back(from_text<double>(part));
  }
  if (out.empty()) throw UsageError("--tau needs at least one threshold");
  return out;
}

struct BackendFlags {
  double temperature = 0.0;
  int max_output_tokens = 1024;
  int budget = 64;
  bool accepts_images = false;
  int retries = 2;
  int timeout = 60;
  bool serialize_egress = false;
};

Backend make(const std::string& name, const std::string& endpoint, const BackendFlags& f) {
  if (endpoint.empty()) throw UsageError("no endpoint given for the " + name + " backend");
  BackendSpec spec;
  spec.name = name;
  spec.endpoint = endpoint;
  spec.temperature = f.temperature;
  spec.max_output_tokens = f.max_output_tokens;
  spec.budget = f.budget;
  spec.accepts_images = f.accepts_images;
  spec.retries = f.retries;
  spec.timeout_seconds = f.timeout;
  spec.serialize_egress = f.serialize_egress;
  if (spec.budget <= 0) throw UsageError("--budget must be positive");
  return Backend::from_spec(spec);
}

KnowledgeStore open_store(const std::string& path) {
  if (path.empty()) throw UsageError("--store is required");
  if (!fs::exists(path)) throw UsageError("store file not found: " + path);
  return KnowledgeStore::load(path);
}

std::vector<Sample> open_dataset(const std::string& path) {
  if (path.empty()) throw UsageError("--dataset is required");
  if (!fs::exists(path)) throw UsageError("dataset file not found: " + path);
  return read_samples(path);
}

void require(const std::string& value, const char* flag) {
  if (value.empty()) throw UsageError(std::string(flag) + " is required");
}

/// Commits results to `writer` in index order as they complete.
class OrderedSink {
 public:
  OrderedSink(LineWriter& writer, std::size_t n) : writer_(writer), ready_(n) {}

  void put(std::size_t i, std::string line) {
    std::lock_guard lock(mu_);
    ready_[i] = std::move(line);
    while (next_ < ready_.size() && ready_[next_]) {
      if (!ready_[next_]->empty()) writer_.append(*ready_[next_]);
      ready_[next_].reset();
      ++next_;
    }
  }

 private:
  LineWriter& writer_;
  std::mutex mu_;
  std::vector<std::optional<std::string>> ready_;
  std::size_t next_ = 0;
};

// Drops a torn final line left by an interrupted run; returns completed ids.
std::set<std::string> completed_ids(const std::string& path, bool& has_header) {
  std::set<std::string> ids;
  has_header = false;
  if (!fs::exists(path)) return ids;
  std::string content = read_file(path);
  const auto last_nl = content.rfind('\n');
  const std::size_t keep = last_nl == std::string::npos ? 0 : last_nl + 1;
  if (keep != content.size()) {
    spdlog::warn("{}: discarding an incomplete final line", path);
    content.resize(keep);
    write_file(path, content);
  }
  std::stringstream ss(content);
  std::string line;
  while (std::getline(ss, line)) {
    if (line.empty()) continue;
    const ojson j = ojson::parse(line);
    if (j.contains("meta")) {
      has_header = true;
    } else {
      ids.insert(j.at("sample_id").get<std::string>());
    }
  }
  return ids;
}

// ---------------------------------------------------------------------------
// ingest

struct IngestArgs {
  std::string manifest, out, embedder = "hash:64:0";
  CLI::Option* o_embedder = nullptr;
};

int cmd_ingest(const IngestArgs& a, const Settings& cfg) {
  IngestArgs args = a;
  cfg.resolve(a.o_embedder, "embedder", args.embedder);
  KnowledgeStore store = KnowledgeStore::ingest(args.manifest, make_embedding_provider(args.embedder));
  store.save(args.out);
  const auto c = store.counts();
  std::cout << "text:" << c.text << " image:" << c.image << "\n"
            << "dimension:" << store.dimension() << " embedder:" << store.embedder()
            << " image_embedding_source:" << store.image_embedding_source() << "\n"
            << "content_hash:" << store.content_hash() << "\n";
  return 0;
}

// ---------------------------------------------------------------------------
// fixtures

struct FixturesArgs {
  std::string out;
  std::uint64_t seed = 7;
  int per_topology = 10;
  int min_hops = 2, max_hops = 5;
  double redundancy = 0.3, navigational = 0.15, confounders = 0.3, near_duplicates = 0.3;
  std::size_t dim = 64;
  CLI::Option* o_seed = nullptr;
};

int cmd_fixtures(const FixturesArgs& a, const Settings& cfg) {
  FixturesArgs args = a;
  cfg.resolve(a.o_seed, "seed", args.seed);
  FixtureSpec spec;
  spec.seed = args.seed;
  spec.per_topology.fill(args.per_topology);
  spec.min_hops = args.min_hops;
  spec.max_hops = args.max_hops;
  spec.redundancy_rate = args.redundancy;
  spec.navigational_rate = args.navigational;
  spec.confounder_rate = args.confounders;
  spec.near_duplicate_rate = args.near_duplicates;
  spec.dimension = args.dim;
  const FixtureSet set = generate_fixtures(spec);
  write_fixtures(set, args.out);
  std::cout << "samples:" << set.samples.size() << " items:" << set.items.size()
            << " embedder:" << set.embedder << " -> " << args.out << "\n";
  return 0;
}

// ---------------------------------------------------------------------------
// run

struct RunArgs {
  std::string store, dataset, backend, mode = "agentic", out;
  std::size_t k = 1;
  int max_turns = 8, parse_retries = 2, parallel = 1;
  std::uint64_t seed = 0;
  bool resume = false;
  BackendFlags bf;
  CLI::Option *o_backend = nullptr, *o_mode = nullptr, *o_k = nullptr, *o_max_turns = nullptr,
              *o_parallel = nullptr, *o_seed = nullptr, *o_store = nullptr, *o_dataset = nullptr,
              *o_budget = nullptr;
};

int cmd_run(const RunArgs& a, const Settings& cfg) {
  RunArgs args = a;
  cfg.resolve(a.o_backend, "backend", args.backend);
  cfg.resolve(a.o_mode, "mode", args.mode);
  cfg.resolve(a.o_k, "k", args.k);
  cfg.resolve(a.o_max_turns, "max-turns", args.max_turns);
  cfg.resolve(a.o_parallel, "parallel", args.parallel);
  cfg.resolve(a.o_seed, "seed", args.seed);
  cfg.resolve(a.o_store, "store", args.store);
  cfg.resolve(a.o_dataset, "dataset", args.dataset);
  cfg.resolve(a.o_budget, "budget", args.bf.budget);
  require(args.backend, "--backend");
  require(args.out, "--out");
  if (args.k < 1) throw UsageError("--k must be >= 1");
  if (args.max_turns < 1) throw UsageError("--max-turns must be >= 1");

  const RunMode mode = parse_run_mode(args.mode);
  const KnowledgeStore kb = open_store(args.store);
  const std::vector<Sample> dataset = open_dataset(args.dataset);
  const Backend backend = make("agent", args.backend, args.bf);
  LoopPolicy policy{args.max_turns, args.k, args.parse_retries};

  bool has_header = false;
  std::set<std::string> done;
  if (args.resume) {
    done = completed_ids(args.out, has_header);
  } else if (fs::exists(args.out)) {
    fs::remove(args.out);
  }
  LineWriter writer(args.out, false);
  if (!has_header) {
    ojson meta;
    meta["tool"] = std::string("hoptrace ") + kVersion;
    meta["mode"] = std::string(to_string(mode));
    meta["backend"] = backend.spec.to_json();
    meta["backend_describe"] = backend.client->describe();
    meta["k"] = args.k;
    meta["max_turns"] = args.max_turns;
    meta["parse_retries"] = args.parse_retries;
    meta["corpus_hash"] = kb.content_hash();
    meta["embedder"] = kb.embedder();
    meta["image_embedding_source"] = kb.image_embedding_source();
    meta["dataset"] = args.dataset;
    meta["seed"] = args.seed;
    meta["config_hash"] = cfg.config_hash();
    writer.append(trace_header(meta));
  }

  std::vector<std::size_t> todo;
  for (std::size_t i = 0; i < dataset.size(); ++i) {
    if (!done.count(dataset[i].id)) todo.push_back(i);
  }
  spdlog::info("run: {} samples ({} already done), mode {}", todo.size(), done.size(), to_string(mode));
  OrderedSink sink(writer, todo.size());
  std::atomic<std::size_t> failures{0};
  parallel_for(todo.size(), static_cast<std::size_t>(std::max(1, args.parallel)), [&](std::size_t j) {
    const Sample& s = dataset[todo[j]];
    EpisodeResult r;
    try {
      r = run_mode(mode, s, backend, kb, policy);
    } catch (const Error& e) {
      ++failures;
      spdlog::warn("sample {}: {}", s.id, e.what());
      r = EpisodeResult{};
      r.sample_id = s.id;
      r.mode = mode;
      r.predicted.question = s.gold.question;
      r.termination = Termination::kProtocolFailure;
      r.error = e.what();
    }
    sink.put(j, episode_to_json(r).dump());
  });
  std::cout << "wrote " << todo.size() << " trace lines to " << args.out;
  if (failures) std::cout << " (" << failures << " with errors)";
  std::cout << "\n";
  return 0;
}

// ---------------------------------------------------------------------------
// score

struct ScoreArgs {
  std::string store, dataset, out, closed_book, golden, judge, tau = "1.0,0.95,0.90,0.85";
  std::vector<std::string> traces;
  bool delta_f1 = false, annotate_errors = false, quiet = false;
  int parallel = 1;
  BackendFlags bf;
  CLI::Option *o_tau = nullptr, *o_judge = nullptr, *o_parallel = nullptr, *o_store = nullptr,
              *o_dataset = nullptr;
};

std::map<std::string, EpisodeResult> by_id(const std::string& path) {
  std::map<std::string, EpisodeResult> out;
  for (auto& e : read_trace(path).episodes) out[e.sample_id] = std::move(e);
  return out;
}

int cmd_score(const ScoreArgs& a, const Settings& cfg) {
  ScoreArgs args = a;
  cfg.resolve(a.o_tau, "tau", args.tau);
  cfg.resolve(a.o_judge, "judge", args.judge);
  cfg.resolve(a.o_parallel, "parallel", args.parallel);
  cfg.resolve(a.o_store, "store", args.store);
  cfg.resolve(a.o_dataset, "dataset", args.dataset);
  if (args.traces.empty()) throw UsageError("--trace is required");
  require(args.out, "--out");
  if (args.delta_f1 && args.closed_book.empty()) {
    throw Error(ErrorCode::kMissingCompanionTrace, "--delta-f1 needs --closed-book TRACE");
  }
  if (args.annotate_errors && args.judge.empty()) throw UsageError("--annotate-errors needs --judge");

  const KnowledgeStore kb = open_store(args.store);
  const std::vector<Sample> dataset = open_dataset(args.dataset);
  std::map<std::string, const Sample*> gold;
  for (const auto& s : dataset) gold[s.id] = &s;

  std::vector<EpisodeResult> episodes;
  std::vector<ojson> trace_meta;
  for (const auto& t : args.traces) {
    TraceFile tf = read_trace(t);
    trace_meta.push_back(tf.meta);
    for (auto& e : tf.episodes) {
      if (!gold.count(e.sample_id)) {
        throw UsageError(t + " references unknown sample '" + e.sample_id + "'");
      }
      episodes.push_back(std::move(e));
    }
  }
  const auto closed = args.closed_book.empty() ? std::map<std::string, EpisodeResult>{} : by_id(args.closed_book);
  const auto golden = args.golden.empty() ? std::map<std::string, EpisodeResult>{} : by_id(args.golden);
  std::optional<Backend> judge;
  if (!args.judge.empty()) judge = make("judge", args.judge, args.bf);

  ScoreOptions opts;
  opts.taus = parse_taus(args.tau);
  opts.require_delta_f1 = args.delta_f1;

  std::vector<SampleScore> scores(episodes.size());
  parallel_for(episodes.size(), static_cast<std::size_t>(std::max(1, args.parallel)), [&](std::size_t i) {
    const auto& e = episodes[i];
    const Sample& s = *gold.at(e.sample_id);
    auto c = closed.find(e.sample_id);
    auto g = golden.find(e.sample_id);
    if (args.delta_f1 && c == closed.end()) {
      throw Error(ErrorCode::kMissingCompanionTrace, "no closed-book episode for '" + e.sample_id + "'");
    }
    scores[i] = score_episode(s, e, kb, opts, c == closed.end() ? nullptr : &c->second,
                              g == golden.end() ? nullptr : &g->second);
    if (judge) {
      scores[i].judge = hoptrace::judge(s, e, *judge);
      if (args.annotate_errors) scores[i].errors = annotate_errors(s, e, *judge);
    }
  });

  ojson meta;
  meta["tool"] = std::string("hoptrace ") + kVersion;
  meta["traces"] = args.traces;
  meta["trace_meta"] = trace_meta;
  if (!args.closed_book.empty()) meta["closed_book_trace"] = args.closed_book;
  if (!args.golden.empty()) meta["golden_trace"] = args.golden;
  meta["dataset"] = args.dataset;
  meta["corpus_hash"] = kb.content_hash();
  meta["taus"] = opts.taus;
  meta["judge"] = judge ? judge->spec.to_json() : ojson(nullptr);
  meta["answer_normalization"] = "ascii-lowercase, strip ascii punctuation, drop a/an/the, whitespace split";
  meta["config_hash"] = cfg.config_hash();

  const Report report = build_report(scores, dataset, episodes, opts.taus, meta);
  write_file(args.out, report.to_json().dump(2) + "\n");
  if (!args.quiet) std::cout << render_report(report);
  std::cout << "report: " << args.out << "\n";
  return 0;
}

// ---------------------------------------------------------------------------
// curate

struct CurateArgs {
  std::string store, dataset, backend, reviser, checker, out, report;
  double theta = 0.05, min_quality = 0.0;
  int max_redundant = 2, parallel = 1;
  bool no_uniqueness = false;
  BackendFlags bf;
  CLI::Option *o_backend = nullptr, *o_theta = nullptr, *o_max_redundant = nullptr, *o_parallel = nullptr,
              *o_store = nullptr, *o_dataset = nullptr, *o_reviser = nullptr, *o_checker = nullptr;
};

int cmd_curate(const CurateArgs& a, const Settings& cfg) {
  CurateArgs args = a;
  cfg.resolve(a.o_backend, "backend", args.backend);
  cfg.resolve(a.o_theta, "theta", args.theta);
  cfg.resolve(a.o_max_redundant, "max-redundant", args.max_redundant);
  cfg.resolve(a.o_parallel, "parallel", args.parallel);
  cfg.resolve(a.o_store, "store", args.store);
  cfg.resolve(a.o_dataset, "dataset", args.dataset);
  cfg.resolve(a.o_reviser, "reviser", args.reviser);
  cfg.resolve(a.o_checker, "checker", args.checker);
  require(args.backend, "--backend");
  require(args.out, "--out");
  if (args.report.empty()) args.report = args.out + ".report.json";

  const KnowledgeStore kb = open_store(args.store);
  const std::vector<Sample> dataset = open_dataset(args.dataset);
  CurationBackends backends{make("answerer", args.backend, args.bf), std::nullopt, std::nullopt};
  if (!args.reviser.empty()) backends.reviser = make("reviser", args.reviser, args.bf);
  if (!args.checker.empty()) backends.checker = make("checker", args.checker, args.bf);
  CurationPolicy policy;
  policy.have.theta = args.theta;
  policy.have.max_redundant = args.max_redundant;
  policy.check_uniqueness = !args.no_uniqueness;
  policy.min_quality = args.min_quality;

  std::vector<CurationRecord> records(dataset.size());
  parallel_for(dataset.size(), static_cast<std::size_t>(std::max(1, args.parallel)), [&](std::size_t i) {
    records[i] = curate_sample(dataset[i], backends, kb, policy);
    if (records[i].outcome == CurationOutcome::kQuarantined) {
      spdlog::warn("sample {} quarantined: {}", records[i].sample_id, records[i].reason);
    }
  });

  std::string curated;
  for (const auto& r : records) {
    if (r.curated) curated += serialize_sample(*r.curated) + "\n";
  }
  write_file(args.out, curated);

  const CurationFunnel f = funnel(records);
  ojson rep;
  rep["meta"] = ojson{{"tool", std::string("hoptrace ") + kVersion},
                      {"dataset", args.dataset},
                      {"corpus_hash", kb.content_hash()},
                      {"theta", args.theta},
                      {"max_redundant", args.max_redundant},
                      {"uniqueness_check", policy.check_uniqueness},
                      {"min_quality", args.min_quality},
                      {"answerer", backends.answerer.spec.to_json()},
                      {"reviser", backends.reviser ? backends.reviser->spec.to_json() : ojson(nullptr)},
                      {"checker", backends.checker ? backends.checker->spec.to_json() : ojson(nullptr)},
                      {"config_hash", cfg.config_hash()}};
  rep["funnel"] = f.to_json();
  ojson recs = ojson::array();
  for (const auto& r : records) recs.push_back(curation_record_to_json(r));
  rep["records"] = std::move(recs);
  write_file(args.report, rep.dump(2) + "\n");
  std::cout << "input:" << f.input << " kept:" << f.kept << " shrunk:" << f.shrunk << " dropped:" << f.dropped
            << " confounded:" << f.confounded << " low_quality:" << f.low_quality
            << " quarantined:" << f.quarantined << " output:" << f.output << "\n";
  return 0;
}

// ---------------------------------------------------------------------------
// export-sft

struct ExportArgs {
  std::string store, dataset, augmenter, out;
  int parallel = 1;
  bool no_images = false;
  BackendFlags bf;
  CLI::Option *o_augmenter = nullptr, *o_parallel = nullptr, *o_store = nullptr, *o_dataset = nullptr;
};

int cmd_export(const ExportArgs& a, const Settings& cfg) {
  ExportArgs args = a;
  cfg.resolve(a.o_augmenter, "augmenter", args.augmenter);
  cfg.resolve(a.o_parallel, "parallel", args.parallel);
  cfg.resolve(a.o_store, "store", args.store);
  cfg.resolve(a.o_dataset, "dataset", args.dataset);
  require(args.augmenter, "--augmenter");
  require(args.out, "--out");
  const KnowledgeStore kb = open_store(args.store);
  const std::vector<Sample> dataset = open_dataset(args.dataset);
  const Backend augmenter = make("augmenter", args.augmenter, args.bf);
  if (dataset.empty()) spdlog::warn("dataset {} is empty; writing an empty SFT file", args.dataset);

  if (fs::exists(args.out)) fs::remove(args.out);
  LineWriter writer(args.out, true);
  OrderedSink sink(writer, dataset.size());
  std::atomic<std::size_t> quarantined{0}, round_trip_failures{0};
  parallel_for(dataset.size(), static_cast<std::size_t>(std::max(1, args.parallel)), [&](std::size_t i) {
    const Sample& s = dataset[i];
    try {
      const auto thoughts = augment_thoughts(s, augmenter, kb);
      const ConversationTrace trace = compile_trace(s, thoughts, kb, !args.no_images);
      const ReplayResult replay = replay_trace(trace);
      if (replay.parse_failures != 0 || !same_chain(replay.graph, s.gold)) {
        ++round_trip_failures;
        spdlog::warn("sample {}: compiled trace does not round-trip through the protocol parser", s.id);
      }
      sink.put(i, trace_to_json(trace).dump());
    } catch (const Error& e) {
      ++quarantined;
      spdlog::warn("sample {} quarantined: {}", s.id, e.what());
      sink.put(i, "");
    }
  });
  std::cout << "traces:" << dataset.size() - quarantined << " quarantined:" << quarantined
            << " round_trip_failures:" << round_trip_failures << " -> " << args.out << "\n";
  return 0;
}

// ---------------------------------------------------------------------------
// stats / validate

int cmd_stats(const std::string& dataset_path, const std::string& store_path) {
  const auto dataset = open_dataset(dataset_path);
  ojson out = dataset_stats(dataset).to_json();
  if (!store_path.empty()) {
    const KnowledgeStore kb = open_store(store_path);
    std::size_t invalid = 0;
    ojson problems = ojson::array();
    for (const auto& s : dataset) {
      const auto v = validate_graph(s.gold, kb);
      if (!v.ok()) {
        ++invalid;
        if (problems.size() < 20) problems.push_back(ojson{{"id", s.id}, {"violations", v.summary()}});
      }
    }
    out["invalid"] = invalid;
    out["first_violations"] = std::move(problems);
  }
  std::cout << out.dump(2) << "\n";
  return 0;
}

void add_backend_flags(CLI::App* app, BackendFlags& f) {
  app->add_option("--temperature", f.temperature, "Decoding temperature (ignored by scripted backends)");
  app->add_option("--max-output-tokens", f.max_output_tokens, "Maximum output length");
  app->add_option("--budget", f.budget, "Completions allowed per sample and role");
  app->add_flag("--accepts-images", f.accepts_images, "Backend receives image attachments");
  app->add_option("--retries", f.retries, "Transport retries");
  app->add_option("--timeout", f.timeout, "Request timeout in seconds");
  app->add_flag("--serialize-egress", f.serialize_egress, "One request in flight at a time");
}

}  // namespace

int main(int argc, char** argv) {
  spdlog::set_default_logger(spdlog::stderr_color_mt("hoptrace"));
  spdlog::set_pattern("[%l] %v");

  CLI::App app{"hoptrace: agentic multimodal retrieval traces, metrics and curation"};
  app.require_subcommand(1);
  std::string config_path;
  app.add_option("--config", config_path, "JSON config; flags override it, it overrides HOPTRACE_* env vars")
      ->check(CLI::ExistingFile);
  bool verbose = false;
  app.add_flag("-v,--verbose", verbose, "Debug logging");
  app.set_version_flag("--version", kVersion);

  IngestArgs ingest;
  auto* c_ingest = app.add_subcommand("ingest", "Build a knowledge store from a corpus manifest");
  c_ingest->add_option("manifest,--manifest", ingest.manifest, "Corpus manifest (JSONL)")
      ->required()
      ->check(CLI::ExistingFile);
  c_ingest->add_option("--out", ingest.out, "Store file to write")->required();
  ingest.o_embedder = c_ingest->add_option("--embedder", ingest.embedder, "hash:<dim>[:seed] or http://host/path#<dim>");

  FixturesArgs fx;
  auto* c_fx = app.add_subcommand("fixtures", "Generate a synthetic corpus, dataset, labels and oracle script");
  c_fx->add_option("--out", fx.out, "Output directory")->required();
  fx.o_seed = c_fx->add_option("--seed", fx.seed, "Generator seed");
  c_fx->add_option("--per-topology", fx.per_topology, "Samples per topology");
  c_fx->add_option("--min-hops", fx.min_hops);
  c_fx->add_option("--max-hops", fx.max_hops);
  c_fx->add_option("--redundancy", fx.redundancy, "Plant rate of redundant hops");
  c_fx->add_option("--navigational", fx.navigational, "Plant rate of navigational-only hops");
  c_fx->add_option("--confounders", fx.confounders, "Per-sample confounder rate");
  c_fx->add_option("--near-duplicates", fx.near_duplicates, "Per-sample near-duplicate rate");
  c_fx->add_option("--dim", fx.dim, "Embedding dimension");

  RunArgs run;
  auto* c_run = app.add_subcommand("run", "Run one answering mode over a dataset and write a trace");
  run.o_store = c_run->add_option("--store", run.store, "Store file from 'ingest'");
  run.o_dataset = c_run->add_option("--dataset", run.dataset, "Dataset (JSONL)");
  run.o_backend = c_run->add_option("--backend", run.backend, "scripted:<file> or http://host:port/path");
  run.o_mode = c_run->add_option("--mode", run.mode, "agentic | closed_book | golden | fixed1 | fixed2");
  run.o_k = c_run->add_option("--k", run.k, "Hits per retrieval");
  run.o_max_turns = c_run->add_option("--max-turns", run.max_turns, "Agent completions before forced stop");
  c_run->add_option("--parse-retries", run.parse_retries, "Consecutive unparseable outputs tolerated");
  run.o_parallel = c_run->add_option("--parallel", run.parallel, "Worker threads");
  run.o_seed = c_run->add_option("--seed", run.seed, "Recorded in the trace header");
  c_run->add_flag("--resume", run.resume, "Skip samples already in the trace");
  c_run->add_option("--out", run.out, "Trace file")->required();
  add_backend_flags(c_run, run.bf);
  run.o_budget = c_run->get_option("--budget");

  ScoreArgs score;
  auto* c_score = app.add_subcommand("score", "Score traces and write a report");
  score.o_store = c_score->add_option("--store", score.store);
  score.o_dataset = c_score->add_option("--dataset", score.dataset);
  c_score->add_option("--trace", score.traces, "Trace file(s) to score")->required();
  c_score->add_option("--closed-book", score.closed_book, "Closed-book trace (enables delta F1)");
  c_score->add_option("--golden", score.golden, "Golden-evidence trace (enables Golden F1)");
  score.o_judge = c_score->add_option("--judge", score.judge, "Judge backend (enables LJ)");
  c_score->add_flag("--annotate-errors", score.annotate_errors, "Error taxonomy via the judge backend");
  c_score->add_flag("--delta-f1", score.delta_f1, "Require delta F1 (fails without --closed-book)");
  score.o_tau = c_score->add_option("--tau", score.tau, "Soft-HPS thresholds, comma separated");
  score.o_parallel = c_score->add_option("--parallel", score.parallel);
  c_score->add_flag("--quiet", score.quiet, "No tables on stdout");
  c_score->add_option("--out", score.out, "Report file (JSON)")->required();
  add_backend_flags(c_score, score.bf);

  CurateArgs cur;
  auto* c_cur = app.add_subcommand("curate", "HAVE filtering, hop shrinkage and verification");
  cur.o_store = c_cur->add_option("--store", cur.store);
  cur.o_dataset = c_cur->add_option("--dataset", cur.dataset);
  cur.o_backend = c_cur->add_option("--backend", cur.backend, "Answerer for the evidence ablations");
  cur.o_reviser = c_cur->add_option("--reviser", cur.reviser, "Rewrite and uniqueness backend");
  cur.o_checker = c_cur->add_option("--checker", cur.checker, "Quality scoring backend");
  cur.o_theta = c_cur->add_option("--theta", cur.theta, "Utility threshold");
  cur.o_max_redundant = c_cur->add_option("--max-redundant", cur.max_redundant, "Drop above this many redundant hops");
  c_cur->add_option("--min-quality", cur.min_quality, "Reject samples whose mean quality is lower");
  c_cur->add_flag("--no-uniqueness", cur.no_uniqueness, "Skip the knowledge-base uniqueness check");
  cur.o_parallel = c_cur->add_option("--parallel", cur.parallel);
  c_cur->add_option("--out", cur.out, "Curated dataset (JSONL)")->required();
  c_cur->add_option("--report", cur.report, "Curation report (JSON)");
  add_backend_flags(c_cur, cur.bf);

  ExportArgs ex;
  auto* c_ex = app.add_subcommand("export-sft", "Compile gold chains into conversation traces");
  ex.o_store = c_ex->add_option("--store", ex.store);
  ex.o_dataset = c_ex->add_option("--dataset", ex.dataset);
  ex.o_augmenter = c_ex->add_option("--augmenter", ex.augmenter, "Thought augmenter backend");
  ex.o_parallel = c_ex->add_option("--parallel", ex.parallel);
  c_ex->add_flag("--no-images", ex.no_images, "Do not attach image refs");
  c_ex->add_option("--out", ex.out, "SFT file (JSONL)")->required();
  add_backend_flags(c_ex, ex.bf);

  std::string stats_dataset, stats_store;
  auto* c_stats = app.add_subcommand("stats", "Dataset statistics and validation");
  c_stats->add_option("--dataset", stats_dataset)->required();
  c_stats->add_option("--store", stats_store, "Validate every sample against this store");

  try {
    app.parse(argc, argv);
  } catch (const CLI::Success& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }
  if (verbose) spdlog::set_level(spdlog::level::debug);

  try {
    Settings cfg;
    cfg.load(config_path);
    if (c_ingest->parsed()) return cmd_ingest(ingest, cfg);
    if (c_fx->parsed()) return cmd_fixtures(fx, cfg);
    if (c_run->parsed()) return cmd_run(run, cfg);
    if (c_score->parsed()) return cmd_score(score, cfg);
    if (c_cur->parsed()) return cmd_curate(cur, cfg);
    if (c_ex->parsed()) return cmd_export(ex, cfg);
    if (c_stats->parsed()) return cmd_stats(stats_dataset, stats_store);
  } catch (const UsageError& e) {
    std::cerr << "usage error: " << e.what() << "\n";
    return 2;
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
