#include <sys/wait.h>

#include <cstdlib>
#include <fstream>
#include <map>
#include <set>

#include <doctest.h>
#include <nlohmann/json.hpp>

#include "hoptrace/fixtures.hpp"
#include "hoptrace/jsonl.hpp"
#include "test_support.hpp"

using namespace hoptrace;
using json = nlohmann::json;

namespace {

struct Result {
  int code = -1;
  std::string out;
};

// Runs the CLI with `args`, stdout and stderr captured together.
Result cli(const testing::TempDir& d, const std::string& args, const std::string& env = "") {
  const auto log = d.file("cli.log");
  const std::string cmd = "cd '" + d.path().string() + "' && " + env + (env.empty() ? "" : " ") + "'" +
                          HOPTRACE_CLI + "' " + args + " > '" + log + "' 2>&1";
  const int status = std::system(cmd.c_str());
  Result r;
  r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  r.out = read_file(log);
  return r;
}

std::vector<json> jsonl(const std::string& path) {
  std::vector<json> out;
  for (const auto& l : read_lines(path)) out.push_back(json::parse(l));
  return out;
}

// fixtures + ingest in a fresh directory
struct Workspace {
  testing::TempDir dir;
  std::string data = "--store store.jsonl --dataset fx/samples.jsonl";
  std::string oracle = "scripted:fx/oracle_script.jsonl";

  explicit Workspace(const std::string& tag, const std::string& fixture_flags = "--seed 7") : dir(tag) {
    REQUIRE(cli(dir, "fixtures --out fx " + fixture_flags).code == 0);
    REQUIRE(cli(dir, "ingest fx/corpus.jsonl --out store.jsonl").code == 0);
  }
  Result run(const std::string& args, const std::string& env = "") const { return cli(dir, args, env); }
  std::string file(const std::string& f) const { return dir.file(f); }
};

}  // namespace

TEST_SUITE("cli") {
  TEST_CASE("ingest: counts, missing file, stable hash") {
    testing::TempDir d("cli-ingest");
    std::string manifest;
    for (int i = 0; i < 12; ++i) manifest += json{{"id", "t" + std::to_string(i)}, {"modality", "text"}, {"payload", "passage " + std::to_string(i)}}.dump() + "\n";
    for (int i = 0; i < 8; ++i) manifest += json{{"id", "i" + std::to_string(i)}, {"modality", "image"}, {"payload", "caption " + std::to_string(i)}}.dump() + "\n";
    write_file(d.file("m.jsonl"), manifest);
    const auto a = cli(d, "ingest m.jsonl --out a.jsonl");
    CHECK(a.code == 0);
    CHECK(a.out.find("text:12 image:8") != std::string::npos);
    const auto b = cli(d, "ingest --manifest m.jsonl --out b.jsonl");
    CHECK(b.code == 0);
    CHECK(read_file(d.file("a.jsonl")) == read_file(d.file("b.jsonl")));
    const auto hash_line = [](const std::string& s) { return s.substr(s.find("content_hash:")); };
    CHECK(hash_line(a.out) == hash_line(b.out));

    const auto missing = cli(d, "ingest nope.jsonl --out c.jsonl");
    CHECK(missing.code == 2);
    CHECK_FALSE(std::filesystem::exists(d.file("c.jsonl")));
    CHECK(cli(d, "frobnicate").code == 2);
  }

  TEST_CASE("run: one line per sample, resume, fixed-RAG call counts") {
    Workspace w("cli-run");
    REQUIRE(w.run("run " + w.data + " --backend " + w.oracle + " --out full.jsonl --parallel 4").code == 0);
    const auto full = read_lines(w.file("full.jsonl"));
    REQUIRE(full.size() == 51);  // header + 50
    CHECK(json::parse(full[0]).contains("meta"));

    // keep the header and 30 episodes plus half of the next line
    std::string cut;
    for (std::size_t i = 0; i <= 30; ++i) cut += full[i] + "\n";
    cut += full[31].substr(0, full[31].size() / 2);
    write_file(w.file("part.jsonl"), cut);
    const auto resumed = w.run("run " + w.data + " --backend " + w.oracle + " --out part.jsonl --resume");
    CHECK(resumed.code == 0);
    CHECK(resumed.out.find("30 already done") != std::string::npos);
    const auto part = read_lines(w.file("part.jsonl"));
    REQUIRE(part.size() == 51);
    for (std::size_t i = 1; i < 51; ++i) CHECK(part[i] == full[i]);

    REQUIRE(w.run("run " + w.data + " --backend " + w.oracle + " --mode fixed2 --out f2.jsonl").code == 0);
    const auto f2 = jsonl(w.file("f2.jsonl"));
    for (std::size_t i = 1; i < f2.size(); ++i) {
      CHECK(f2[i].at("retrieval_calls").size() <= 2);
      CHECK(f2[i].at("transcript").size() == 1);
    }
  }

  TEST_CASE("score: aggregate equals the mean of per-sample rows; delta F1 needs a companion") {
    Workspace w("cli-score");
    REQUIRE(w.run("run " + w.data + " --backend " + w.oracle + " --out t.jsonl").code == 0);
    REQUIRE(w.run("run " + w.data + " --backend " + w.oracle + " --mode closed_book --out cb.jsonl").code == 0);
    const auto r = w.run("score " + w.data + " --trace t.jsonl --closed-book cb.jsonl --delta-f1 --out r.json");
    REQUIRE(r.code == 0);
    const auto report = json::parse(read_file(w.file("r.json")));
    const auto& rows = report.at("samples");
    REQUIRE(rows.size() == 50);
    double f1 = 0, hps = 0, soft90 = 0;
    for (const auto& s : rows) {
      f1 += s.at("f1").get<double>();
      hps += s.at("hps").get<double>();
      soft90 += s.at("soft_hps").at("0.90").get<double>();
    }
    const auto& agg = report.at("aggregate").at("overall");
    CHECK(agg.at("f1").get<double>() == doctest::Approx(f1 / 50).epsilon(1e-12));
    CHECK(agg.at("hps").get<double>() == doctest::Approx(hps / 50).epsilon(1e-12));
    CHECK(agg.at("soft_hps").at("0.90").get<double>() == doctest::Approx(soft90 / 50).epsilon(1e-12));
    CHECK_FALSE(agg.at("delta_f1").is_null());

    const auto missing = w.run("score " + w.data + " --trace t.jsonl --delta-f1 --out r2.json");
    CHECK(missing.code == 1);
    CHECK(missing.out.find("MissingCompanionTrace") != std::string::npos);
  }

  TEST_CASE("curate: funnel matches planted truth; theta and max-redundant knobs") {
    Workspace w("cli-curate");
    const std::string backends = " --backend " + w.oracle + " --reviser " + w.oracle + " --checker " + w.oracle;
    REQUIRE(w.run("curate " + w.data + backends + " --out cur.jsonl").code == 0);
    const auto planted = read_planted(w.file("fx/planted.jsonl"));
    std::map<std::string, std::string> expected;
    std::map<std::string, std::size_t> counts;
    for (const auto& p : planted) {
      std::string o = p.redundant.size() > 2 ? "dropped"
                      : !p.confounders.empty() ? "confounded"
                      : !p.redundant.empty()   ? "shrunk"
                                               : "kept";
      expected[p.sample_id] = o;
      ++counts[o];
    }
    const auto report = json::parse(read_file(w.file("cur.jsonl.report.json")));
    for (const auto& rec : report.at("records")) {
      CHECK_MESSAGE(rec.at("outcome") == expected.at(rec.at("sample_id")), rec.at("sample_id"));
    }
    const auto& f = report.at("funnel");
    for (const char* k : {"kept", "shrunk", "dropped", "confounded"}) CHECK(f.at(k).get<std::size_t>() == counts[k]);
    CHECK(f.at("quarantined") == 0);
    CHECK(read_lines(w.file("cur.jsonl")).size() == counts["kept"] + counts["shrunk"]);

    // rerunning gives byte-identical outputs
    REQUIRE(w.run("curate " + w.data + backends + " --out cur2.jsonl").code == 0);
    CHECK(read_file(w.file("cur.jsonl")) == read_file(w.file("cur2.jsonl")));

    REQUIRE(w.run("curate " + w.data + backends + " --theta 0 --no-uniqueness --out t0.jsonl").code == 0);
    const auto t0 = json::parse(read_file(w.file("t0.jsonl.report.json"))).at("funnel");
    CHECK(t0.at("kept") == 50);
    CHECK(t0.at("shrunk") == 0);

    REQUIRE(w.run("curate " + w.data + backends + " --max-redundant 0 --no-uniqueness --out m0.jsonl").code == 0);
    const auto m0 = json::parse(read_file(w.file("m0.jsonl.report.json"))).at("funnel");
    CHECK(m0.at("shrunk") == 0);
    std::size_t any_redundant = 0;
    for (const auto& p : planted) any_redundant += p.redundant.empty() ? 0 : 1;
    CHECK(m0.at("dropped").get<std::size_t>() == any_redundant);
  }

  TEST_CASE("export-sft: clean traces, empty dataset, missing augmenter") {
    Workspace w("cli-sft");
    const auto r = w.run("export-sft " + w.data + " --augmenter " + w.oracle + " --out sft.jsonl");
    REQUIRE(r.code == 0);
    CHECK(r.out.find("traces:50") != std::string::npos);
    CHECK(r.out.find("round_trip_failures:0") != std::string::npos);
    const auto lines = jsonl(w.file("sft.jsonl"));
    CHECK(lines.size() == 50);
    CHECK(lines[0].at("messages").at(0).at("role") == "system");

    write_file(w.file("empty.jsonl"), "");
    const auto e = w.run("export-sft --store store.jsonl --dataset empty.jsonl --augmenter " + w.oracle + " --out e.jsonl");
    CHECK(e.code == 0);
    CHECK(std::filesystem::exists(w.file("e.jsonl")));
    CHECK(read_file(w.file("e.jsonl")).empty());

    CHECK(w.run("export-sft " + w.data + " --out x.jsonl").code == 2);
  }

  TEST_CASE("configuration precedence and credential rejection") {
    Workspace w("cli-config", "--seed 7 --per-topology 1");
    write_file(w.file("cfg.json"), R"({"mode": "closed_book"})");
    auto mode_of = [&](const std::string& out) {
      return json::parse(read_lines(w.file(out)).at(0)).at("meta").at("mode").get<std::string>();
    };
    const std::string base = "run " + w.data + " --backend " + w.oracle;
    REQUIRE(w.run("--config cfg.json " + base + " --out a.jsonl").code == 0);
    CHECK(mode_of("a.jsonl") == "closed_book");
    REQUIRE(w.run("--config cfg.json " + base + " --mode golden --out b.jsonl").code == 0);
    CHECK(mode_of("b.jsonl") == "golden");
    REQUIRE(w.run("--config cfg.json " + base + " --out c.jsonl", "HOPTRACE_MODE=fixed1").code == 0);
    CHECK(mode_of("c.jsonl") == "closed_book");
    REQUIRE(w.run(base + " --out d.jsonl", "HOPTRACE_MODE=fixed1").code == 0);
    CHECK(mode_of("d.jsonl") == "fixed1");

    write_file(w.file("secret.json"), R"({"api_key": "sk-123"})");
    const auto s = w.run("--config secret.json " + base + " --out e.jsonl");
    CHECK(s.code == 2);
    CHECK(s.out.find("environment") != std::string::npos);
  }
}
