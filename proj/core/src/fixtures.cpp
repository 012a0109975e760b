#include "hoptrace/fixtures.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <random>
#include <set>

#include "hoptrace/error.hpp"
#include "hoptrace/jsonl.hpp"
#include "hoptrace/protocol.hpp"

namespace hoptrace {

using ojson = nlohmann::ordered_json;

int FixtureSpec::total() const {
  int n = 0;
  for (int c : per_topology) n += c;
  return n;
}

ojson FixtureSpec::to_json() const {
  ojson counts;
  for (std::size_t i = 0; i < per_topology.size(); ++i) {
    counts[std::string(to_string(kAllTopologies[i]))] = per_topology[i];
  }
  return ojson{{"seed", seed},
               {"per_topology", counts},
               {"min_hops", min_hops},
               {"max_hops", max_hops},
               {"redundancy_rate", redundancy_rate},
               {"navigational_rate", navigational_rate},
               {"confounder_rate", confounder_rate},
               {"near_duplicate_rate", near_duplicate_rate},
               {"distractors", distractors},
               {"dimension", dimension},
               {"near_duplicate_cosine", near_duplicate_cosine}};
}

ojson PlantedLabels::to_json() const {
  ojson j;
  j["sample_id"] = sample_id;
  j["topology"] = std::string(to_string(topology));
  j["structural"] = structural;
  j["redundant"] = redundant;
  j["navigational"] = navigational;
  ojson conf = ojson::array();
  for (const auto& c : confounders) conf.push_back(ojson{{"step", c.step}, {"item_id", c.item_id}});
  j["confounders"] = std::move(conf);
  ojson nd = ojson::array();
  for (const auto& n : near_duplicates) {
    nd.push_back(ojson{{"step", n.step}, {"gold_id", n.gold_id}, {"item_id", n.item_id}, {"cosine", n.cosine}});
  }
  j["near_duplicates"] = std::move(nd);
  j["distractors"] = distractors;
  return j;
}

PlantedLabels PlantedLabels::from_json(const ojson& j) {
  PlantedLabels p;
  p.sample_id = j.at("sample_id").get<std::string>();
  p.topology = parse_topology(j.at("topology").get<std::string>());
  p.structural = j.at("structural").get<std::vector<int>>();
  p.redundant = j.at("redundant").get<std::vector<int>>();
  p.navigational = j.at("navigational").get<std::vector<int>>();
  for (const auto& c : j.at("confounders")) {
    p.confounders.push_back({c.at("step").get<int>(), c.at("item_id").get<std::string>()});
  }
  for (const auto& n : j.at("near_duplicates")) {
    p.near_duplicates.push_back({n.at("step").get<int>(), n.at("gold_id").get<std::string>(),
                                 n.at("item_id").get<std::string>(), n.at("cosine").get<double>()});
  }
  p.distractors = j.at("distractors").get<std::vector<std::string>>();
  return p;
}

namespace {

// std distributions are implementation-defined; these mappings are not.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : g_(seed) {}
  int uniform(int lo, int hi) {
    return lo + static_cast<int>(g_() % static_cast<std::uint64_t>(hi - lo + 1));
  }
  double unit() { return static_cast<double>(g_() >> 11) * 0x1.0p-53; }
  bool chance(double p) { return unit() < p; }
  template <typename T>
  const T& pick(const std::vector<T>& v) {
    return v[static_cast<std::size_t>(uniform(0, static_cast<int>(v.size()) - 1))];
  }

 private:
  std::mt19937_64 g_;
};

const std::vector<std::string> kSyllables = {"ka", "ro", "vel", "mir", "tan", "sul", "den",
                                             "bra", "lio", "ner", "quo", "zan", "fis", "hol",
                                             "gar", "pem", "tov", "rin", "sab", "ul",  "dex",
                                             "wim", "or",  "ces", "lun", "pra", "thy", "mog"};

const std::vector<std::string> kRelations = {
    "river",   "founder",  "archive",  "bridge",   "festival",    "guild",   "harbor",
    "library", "monument", "orchard",  "palace",   "observatory", "quarry",  "school",
    "shrine",  "theater",  "tower",    "vineyard", "workshop",    "garden",  "canal",
    "academy", "lighthouse", "mill",   "chapel",   "market",      "fortress", "tavern"};

const std::vector<std::string> kNumberWords = {"zero", "one", "two", "three", "four", "five", "six"};

std::string make_word(Rng& rng) {
  std::string w;
  const int parts = rng.uniform(2, 3);
  for (int i = 0; i < parts; ++i) w += rng.pick(kSyllables);
  w[0] = static_cast<char>(w[0] - 'a' + 'A');
  return w;
}

std::string make_entity(Rng& rng, std::set<std::string>& used) {
  for (;;) {
    std::string e = make_word(rng);
    if (rng.chance(0.5)) e += " " + make_word(rng);
    if (used.insert(e).second) return e;
  }
}

std::string join_and(const std::vector<std::string>& parts) {
  std::string out;
  for (std::size_t i = 0; i < parts.size(); ++i) {
    if (i) out += " and ";
    out += parts[i];
  }
  return out;
}

std::string strip_question_mark(std::string s) {
  if (!s.empty() && s.back() == '?') s.pop_back();
  return s;
}

enum class HopRole { kStructural, kEssential, kRedundant, kNavigational };

bool essential(HopRole r) { return r == HopRole::kStructural || r == HopRole::kEssential; }

struct HopPlan {
  Modality modality = Modality::kText;
  bool input_image = false;
  HopRole role = HopRole::kEssential;
  std::optional<std::string> group;
  std::string relation;
  std::vector<std::string> mentions;
  std::string sub_question;
  std::string answer;
  std::string evidence_id;
  std::string code;
};

struct Built {
  Sample sample;
  PlantedLabels labels;
  std::vector<KnowledgeItem> items;
  std::vector<std::string> precomputed;
  std::vector<ScriptedBackend::Entry> script;
};

class Generator {
 public:
  explicit Generator(const FixtureSpec& spec)
      : spec_(spec),
        rng_(spec.seed),
        provider_(std::make_shared<HashEmbeddingProvider>(spec.dimension, 0)) {}

  const std::shared_ptr<HashEmbeddingProvider>& provider() const { return provider_; }

  Built sample(const std::string& id, Topology topology) {
    for (int attempt = 0; attempt < 200; ++attempt) {
      const int code_mark = code_counter_;
      Built b = draft(id, topology);
      if (retrievable(b)) return b;
      code_counter_ = code_mark;  // keep codes dense across retries
    }
    throw Error(ErrorCode::kInvalidArgument, "could not generate a retrievable fixture for " + id);
  }

 private:
  std::string next_code() {
    char buf[16];
    std::snprintf(buf, sizeof buf, "F%06d", ++code_counter_);
    return buf;
  }

  std::vector<Modality> pattern(Topology t, int n, std::vector<bool>& input) {
    std::vector<Modality> m(static_cast<std::size_t>(n), Modality::kText);
    input.assign(static_cast<std::size_t>(n), false);
    switch (t) {
      case Topology::kImageInitiatedChain:
      case Topology::kParallelImageTextFork:
        m[0] = Modality::kImage;
        input[0] = true;
        break;
      case Topology::kTextInitiatedChain:
        m.back() = Modality::kImage;
        break;
      case Topology::kMultiImagesFork:
        m[0] = m[1] = Modality::kImage;
        input[0] = input[1] = true;
        break;
      case Topology::kTextOnlyChain:
        break;
    }
    return m;
  }

  std::set<int> structural(Topology t, int n) {
    switch (t) {
      case Topology::kImageInitiatedChain:
      case Topology::kParallelImageTextFork:
      case Topology::kMultiImagesFork:
        return {1, 2};
      case Topology::kTextInitiatedChain:
        return {1, n};
      case Topology::kTextOnlyChain:
        return {1};
    }
    return {1};
  }

  Built draft(const std::string& id, Topology topology) {
    Built b;
    const std::string cluster = "c-" + id;
    std::set<std::string> names;
    int lo = std::max(2, spec_.min_hops);
    // two input images plus at least one text hop, when the range allows it
    if (topology == Topology::kMultiImagesFork && spec_.max_hops >= 3) lo = std::max(lo, 3);
    const int n = rng_.uniform(lo, std::max(2, spec_.max_hops));
    std::vector<bool> input;
    const auto modalities = pattern(topology, n, input);
    const auto fixed = structural(topology, n);

    std::vector<HopPlan> hops(static_cast<std::size_t>(n));
    for (int t = 1; t <= n; ++t) {
      auto& h = hops[static_cast<std::size_t>(t - 1)];
      h.modality = modalities[static_cast<std::size_t>(t - 1)];
      h.input_image = input[static_cast<std::size_t>(t - 1)];
      h.relation = rng_.pick(kRelations);
      if (fixed.count(t)) {
        h.role = HopRole::kStructural;
      } else if (rng_.chance(spec_.redundancy_rate)) {
        h.role = HopRole::kRedundant;
      } else if (rng_.chance(spec_.navigational_rate)) {
        h.role = HopRole::kNavigational;
      }
    }
    if (topology == Topology::kParallelImageTextFork) hops[0].group = hops[1].group = "p1";
    if (topology == Topology::kMultiImagesFork) hops[0].group = hops[1].group = "p1";

    // A navigational hop needs a later essential hop to mention its answer.
    std::vector<std::vector<int>> nav_for(static_cast<std::size_t>(n) + 1);
    for (int t = n; t >= 1; --t) {
      auto& h = hops[static_cast<std::size_t>(t - 1)];
      if (h.role != HopRole::kNavigational) continue;
      int target = 0;
      for (int u = t + 1; u <= n; ++u) {
        if (essential(hops[static_cast<std::size_t>(u - 1)].role)) {
          target = u;
          break;
        }
      }
      if (target == 0) {
        h.role = HopRole::kEssential;
      } else {
        nav_for[static_cast<std::size_t>(target)].push_back(t);
      }
    }

    const std::string anchor = make_entity(rng_, names);
    const bool image_start = input[0];

    // Answers first, so mentions can refer to them.
    for (auto& h : hops) {
      h.answer = h.role == HopRole::kRedundant ? (rng_.chance(0.5) ? "yes" : "confirmed")
                                             : make_entity(rng_, names);
    }

    int image_no = 0;
    int text_no = 0;
    for (int t = 1; t <= n; ++t) {
      auto& h = hops[static_cast<std::size_t>(t - 1)];
      char idbuf[64];
      if (h.modality == Modality::kImage) {
        std::snprintf(idbuf, sizeof idbuf, "%s-i%02d", id.c_str(), ++image_no);
      } else {
        std::snprintf(idbuf, sizeof idbuf, "%s-t%02d", id.c_str(), ++text_no);
      }
      h.evidence_id = idbuf;
      h.code = next_code();

      // Whom does this hop build on?
      if (h.input_image) {
        // no mentions
      } else if (t == 1 || (h.group && t == 2)) {
        h.mentions = {anchor};
      } else {
        int prev = 0;
        for (int u = t - 1; u >= 1; --u) {
          if (essential(hops[static_cast<std::size_t>(u - 1)].role)) {
            prev = u;
            break;
          }
        }
        const auto& p = hops[static_cast<std::size_t>(prev - 1)];
        if (p.group) {
          for (const auto& q : hops) {
            if (q.group == p.group) h.mentions.push_back(q.answer);
          }
        } else {
          h.mentions.push_back(p.answer);
        }
        for (int v : nav_for[static_cast<std::size_t>(t)]) {
          h.mentions.push_back(hops[static_cast<std::size_t>(v - 1)].answer);
        }
      }

      const std::string who = join_and(h.mentions);
      if (h.input_image) {
        h.sub_question = image_no == 1 ? "Which landmark is shown in the input image?"
                                       : "Which landmark is shown in the second input image?";
      } else if (h.role == HopRole::kRedundant) {
        h.sub_question = "Is " + who + " recorded in the " + h.relation + " register?";
      } else if (h.modality == Modality::kImage) {
        h.sub_question = "Which " + h.relation + " appears in the photograph linked to " + who + "?";
      } else {
        h.sub_question = "What " + h.relation + " is associated with " + who + "?";
      }
    }

    // Final answer: the last hop that carries the chain.
    std::string final_answer;
    std::string last_relation;
    for (const auto& h : hops) {
      if (essential(h.role)) {
        final_answer = h.answer;
        last_relation = h.relation;
      }
    }
    const std::string hop_words = kNumberWords[static_cast<std::size_t>(n)];
    std::string start = "Starting from " + anchor;
    if (topology == Topology::kParallelImageTextFork) {
      start = "Starting from the landmark in the image and from " + anchor;
    } else if (image_start) {
      start = "Starting from the landmarks in the images";
      if (image_no < 2) start = "Starting from the landmark in the image";
    }
    const std::string question = start + " and following " + hop_words + " linked records, which " +
                                 last_relation + " is reached?";

    // Knowledge items.
    auto add_item = [&](const std::string& item_id, Modality m, std::string payload) {
      KnowledgeItem it;
      it.id = item_id;
      it.modality = m;
      it.payload = std::move(payload);
      if (m == Modality::kImage) it.image_path = "images/" + item_id + ".png";
      it.cluster_id = cluster;
      it.embedding = provider_->embed(it.payload, m);
      b.items.push_back(std::move(it));
      return b.items.size() - 1;
    };
    for (const auto& h : hops) {
      if (h.input_image) {
        add_item(h.evidence_id, Modality::kImage, "Photograph of the " + h.answer + " landmark. Fact " + h.code + ".");
      } else if (h.modality == Modality::kImage) {
        add_item(h.evidence_id, Modality::kImage,
                 strip_question_mark(h.sub_question) + ". Photograph showing " + h.answer + ". Fact " + h.code + ".");
      } else {
        add_item(h.evidence_id, Modality::kText,
                 strip_question_mark(h.sub_question) + ". Answer: " + h.answer + ". Fact " + h.code + ".");
      }
    }

    PlantedLabels& lab = b.labels;
    lab.sample_id = id;
    lab.topology = topology;
    for (int t = 1; t <= n; ++t) {
      const auto r = hops[static_cast<std::size_t>(t - 1)].role;
      if (r == HopRole::kStructural) lab.structural.push_back(t);
      if (r == HopRole::kRedundant) lab.redundant.push_back(t);
      if (r == HopRole::kNavigational) lab.navigational.push_back(t);
    }

    std::vector<int> carrying_text;
    for (int t = 1; t <= n; ++t) {
      const auto& h = hops[static_cast<std::size_t>(t - 1)];
      if (h.modality == Modality::kText && h.role != HopRole::kRedundant) carrying_text.push_back(t);
    }

    for (int d = 0; d < spec_.distractors; ++d) {
      char idbuf[64];
      std::snprintf(idbuf, sizeof idbuf, "%s-d%02d", id.c_str(), d + 1);
      add_item(idbuf, Modality::kText,
               "Notes on " + make_entity(rng_, names) + " and the " + rng_.pick(kRelations) + " " +
                   rng_.pick(kRelations) + ". Fact " + next_code() + ".");
      lab.distractors.push_back(idbuf);
    }
    if (image_no > 0) {
      const std::string did = id + "-d99";
      add_item(did, Modality::kImage,
               "Photograph of the " + make_entity(rng_, names) + " " + rng_.pick(kRelations) + ". Fact " +
                   next_code() + ".");
      lab.distractors.push_back(did);
    }

    if (!carrying_text.empty() && rng_.chance(spec_.confounder_rate)) {
      const int t = rng_.pick(carrying_text);
      const auto& h = hops[static_cast<std::size_t>(t - 1)];
      const std::string cid = id + "-x01";
      add_item(cid, Modality::kText,
               "Another source states that " + h.answer + " fits the description. Fact " + next_code() + ".");
      lab.confounders.push_back({t, cid});
    }

    if (!carrying_text.empty() && rng_.chance(spec_.near_duplicate_rate)) {
      const int t = rng_.pick(carrying_text);
      const auto& h = hops[static_cast<std::size_t>(t - 1)];
      const std::string nid = id + "-n01";
      const std::string ncode = next_code();
      const Vector v = b.items[static_cast<std::size_t>(t - 1)].embedding;
      Vector u = provider_->embed("orthogonal direction " + ncode + " " + make_word(rng_));
      const double proj = dot(u, v);
      for (std::size_t i = 0; i < u.size(); ++i) u[i] -= proj * v[i];
      normalize_in_place(u);
      const double c = spec_.near_duplicate_cosine;
      const double s = std::sqrt(1.0 - c * c);
      Vector w(v.size());
      for (std::size_t i = 0; i < v.size(); ++i) w[i] = c * v[i] + s * u[i];
      normalize_in_place(w);
      const auto idx = add_item(nid, Modality::kText,
                                "Archived variant of the record about " + h.answer + ". Fact " + ncode + ".");
      b.items[idx].embedding = w;
      b.precomputed.push_back(nid);
      lab.near_duplicates.push_back({t, h.evidence_id, nid, dot(v, w)});
    }

    // The sample.
    Sample& s = b.sample;
    s.id = id;
    s.gold.question = question;
    s.gold.final_answer = final_answer;
    s.gold.topology = topology;
    for (const auto& h : hops) {
      if (h.input_image) s.gold.input_image_ids.push_back(h.evidence_id);
      ReasoningStep st;
      st.sub_question = h.sub_question;
      st.modality = h.modality;
      st.evidence_id = h.evidence_id;
      st.intermediate_answer = h.answer;
      st.parallel_group = h.group;
      s.gold.steps.push_back(std::move(st));
    }
    s.gold.renumber();
    for (const auto& it : b.items) s.kb_scope.push_back(it.id);

    // Script entries for this sample.
    auto entry = [&](std::optional<int> turn, std::string purpose, std::vector<std::string> contains,
                     std::string response) {
      ScriptedBackend::Entry e;
      e.sample = id;
      e.turn = turn;
      e.purpose = std::move(purpose);
      e.contains = std::move(contains);
      e.response = std::move(response);
      b.script.push_back(std::move(e));
    };
    std::string preamble;
    for (int t = 1; t <= n; ++t) {
      const auto& h = hops[static_cast<std::size_t>(t - 1)];
      const std::string thought = "Hop " + std::to_string(t) + " grounds the " + h.relation +
                                  " link before the next step.";
      ActionChoice action = ActionChoice::kTextRetrieval;
      std::string image_arg;
      if (h.modality == Modality::kImage) {
        action = h.input_image ? ActionChoice::kImageRetrievalInputImage
                               : ActionChoice::kImageRetrievalTextQuery;
        if (h.input_image && s.gold.input_image_ids.size() > 1) image_arg = h.evidence_id;
      }
      entry(t, "agent", {}, format_search_turn(preamble, thought, h.sub_question, action, image_arg));
      entry(t, "augment", {}, thought);
      preamble = h.answer;
    }
    entry(n + 1, "agent", {}, format_end_turn(preamble, final_answer));

    std::vector<std::string> needed;
    for (const auto& h : hops) {
      if (essential(h.role)) needed.push_back("Fact " + h.code + ".");
    }
    entry(std::nullopt, "golden", needed, final_answer);

    if (!lab.redundant.empty()) {
      ojson chain = ojson::array();
      for (const auto& st : s.gold.steps) {
        if (std::find(lab.redundant.begin(), lab.redundant.end(), st.index) != lab.redundant.end()) continue;
        ojson js = step_to_json(st);
        js.erase("parallel_group");
        chain.push_back(std::move(js));
      }
      entry(std::nullopt, "rewrite", {}, ojson{{"subqa_chain", chain}}.dump());
    }
    for (const auto& c : lab.confounders) {
      const auto& step = s.gold.steps[static_cast<std::size_t>(c.step - 1)];
      const auto& item = *std::find_if(b.items.begin(), b.items.end(),
                                       [&](const KnowledgeItem& it) { return it.id == c.item_id; });
      const std::string code = item.payload.substr(item.payload.rfind("Fact "));
      entry(std::nullopt, "verify", {"Sub-question: " + step.sub_question + "\n", code}, "yes");
    }
    return b;
  }

  // Every gold hop must be the top-1 hit for its own sub-question inside the
  // sample's scope, so a replayed agent recovers the gold chain exactly.
  bool retrievable(const Built& b) const {
    const KnowledgeStore store = KnowledgeStore::from_items(b.items, provider_);
    const Scope scope(b.sample.kb_scope.begin(), b.sample.kb_scope.end());
    const auto& inputs = b.sample.gold.input_image_ids;
    for (const auto& st : b.sample.gold.steps) {
      RetrievalAction a;
      if (st.modality == Modality::kText) {
        a = RetrievalAction::text_search(st.sub_question);
      } else if (std::find(inputs.begin(), inputs.end(), st.evidence_id) != inputs.end()) {
        a = RetrievalAction::image_search_image(st.evidence_id);
      } else {
        a = RetrievalAction::image_search_text(st.sub_question);
      }
      const auto hits = store.retrieve(a, 2, &scope);
      if (hits.empty() || hits[0].item_id != st.evidence_id) return false;
      // Leave a margin so rounding can never flip the order.
      if (hits.size() > 1 && hits[0].similarity - hits[1].similarity < 1e-6) return false;
    }
    return true;
  }

  FixtureSpec spec_;
  Rng rng_;
  std::shared_ptr<HashEmbeddingProvider> provider_;
  int code_counter_ = 0;
};

ScriptedBackend::Entry wildcard(std::string purpose, std::string response) {
  ScriptedBackend::Entry e;
  e.purpose = std::move(purpose);
  e.response = std::move(response);
  return e;
}

}  // namespace

FixtureSet generate_fixtures(const FixtureSpec& spec) {
  if (spec.min_hops < 2 || spec.max_hops > 5 || spec.min_hops > spec.max_hops) {
    throw Error(ErrorCode::kInvalidArgument, "hop range must lie within 2..5");
  }
  if (spec.dimension < 8) throw Error(ErrorCode::kInvalidArgument, "fixture dimension must be >= 8");
  for (int c : spec.per_topology) {
    if (c < 0) throw Error(ErrorCode::kInvalidArgument, "negative topology count");
  }

  FixtureSet set;
  set.spec = spec;
  Generator gen(spec);
  set.embedder = gen.provider()->describe();

  // Interleave topologies so any prefix of the dataset mixes all five.
  std::array<int, 5> left = spec.per_topology;
  int serial = 0;
  for (bool any = true; any;) {
    any = false;
    for (std::size_t k = 0; k < left.size(); ++k) {
      if (left[k] == 0) continue;
      --left[k];
      any = true;
      char idbuf[32];
      std::snprintf(idbuf, sizeof idbuf, "fx%04d", ++serial);
      Built b = gen.sample(idbuf, kAllTopologies[k]);
      set.samples.push_back(std::move(b.sample));
      set.labels.push_back(std::move(b.labels));
      for (auto& it : b.items) set.items.push_back(std::move(it));
      for (auto& p : b.precomputed) set.precomputed.push_back(std::move(p));
      for (auto& e : b.script) set.script.push_back(std::move(e));
    }
  }

  set.script.push_back(wildcard("golden", ""));
  set.script.push_back(wildcard("verify", "no"));
  set.script.push_back(wildcard("closed_book", "I cannot answer this question."));
  set.script.push_back(wildcard("fixed_rag", "I cannot answer this question."));
  set.script.push_back(wildcard("judge", R"({"scores":{"accuracy":4,"entities":4,"coherence":4,"alignment":4}})"));
  set.script.push_back(wildcard(
      "errors",
      R"({"errors":{"retrieval_failure":false,"hallucinated_entity_attribute":false,"step_omission":false,"modality_mismatch":false,"spurious_step":false,"order_dependency_error":false,"multi_hop_failure":false,"evidence_misinterpretation":false}})"));
  set.script.push_back(wildcard(
      "quality",
      R"({"factual_correctness":5,"step_necessity":5,"clarity":5,"multimodal_alignment":5})"));
  return set;
}

std::shared_ptr<const EmbeddingProvider> FixtureSet::provider() const {
  return make_embedding_provider(embedder);
}

KnowledgeStore FixtureSet::store() const { return KnowledgeStore::from_items(items, provider()); }

std::shared_ptr<ScriptedBackend> FixtureSet::oracle() const {
  return std::make_shared<ScriptedBackend>(script, "scripted:fixture-oracle");
}

void write_fixtures(const FixtureSet& set, const std::string& dir) {
  std::filesystem::create_directories(dir);
  const std::set<std::string> pre(set.precomputed.begin(), set.precomputed.end());

  std::string corpus;
  for (const auto& it : set.items) {
    ojson j = item_to_json(it);
    if (!pre.count(it.id)) j.erase("embedding");
    corpus += j.dump() + "\n";
  }
  write_file(dir + "/corpus.jsonl", corpus);

  std::string samples;
  for (const auto& s : set.samples) samples += serialize_sample(s) + "\n";
  write_file(dir + "/samples.jsonl", samples);

  std::string planted;
  for (const auto& l : set.labels) planted += l.to_json().dump() + "\n";
  write_file(dir + "/planted.jsonl", planted);

  std::string script;
  for (const auto& e : set.script) script += ScriptedBackend::entry_to_json(e).dump() + "\n";
  write_file(dir + "/oracle_script.jsonl", script);

  ojson meta;
  meta["generator"] = "hoptrace fixtures";
  meta["spec"] = set.spec.to_json();
  meta["embedder"] = set.embedder;
  meta["samples"] = set.samples.size();
  meta["items"] = set.items.size();
  write_file(dir + "/fixture.json", meta.dump(2) + "\n");
}

std::vector<PlantedLabels> read_planted(const std::string& path) {
  std::vector<PlantedLabels> out;
  for_each_line(path, [&](std::string_view line, std::size_t n) {
    try {
      out.push_back(PlantedLabels::from_json(ojson::parse(line)));
    } catch (const nlohmann::json::exception& e) {
      throw Error(ErrorCode::kParseError, path + ":" + std::to_string(n) + ": " + e.what());
    }
  });
  return out;
}

}  // namespace hoptrace
