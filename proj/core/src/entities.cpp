#include "hoptrace/entities.hpp"

#include <algorithm>
#include <cctype>
#include <unordered_set>

namespace hoptrace {

namespace {

const std::unordered_set<std::string> kInitialStopwords = {
    "what", "which", "who",  "whom",  "whose", "where", "when", "why",   "how",  "is",
    "are",  "was",   "were", "does",  "do",    "did",   "can",  "could", "in",   "on",
    "at",   "the",   "a",    "an",    "it",    "this",  "that", "these", "those", "yes",
    "no",   "its",   "his",  "her",   "their", "for",   "from", "to",    "of",   "and",
    "by",   "with",  "name", "identify", "according", "after", "before", "during", "there",
    "they", "he",    "she",  "we",    "i",     "true",  "false", "confirmed", "none"};

const std::unordered_set<std::string> kConnectors = {"of", "the", "de", "and", "von", "van",
                                                     "la", "le", "du", "del", "da", "di"};

struct Word {
  std::string raw;
  bool sentence_start = false;
};

std::string lower(std::string_view s) {
  std::string out(s);
  for (char& c : out) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return out;
}

std::string strip_punct(std::string_view s) {
  std::string out;
  for (unsigned char c : s) {
    if (c < 0x80 && std::ispunct(c)) continue;
    out.push_back(static_cast<char>(c < 0x80 ? std::tolower(c) : c));
  }
  return out;
}

Entity normalize(const std::vector<std::string>& raw) {
  Entity e;
  for (const auto& w : raw) {
    std::string t = strip_punct(w);
    if (t.empty() || t == "a" || t == "an" || t == "the") continue;
    e.push_back(std::move(t));
  }
  return e;
}

bool capitalized(const std::string& w) {
  for (unsigned char c : w) {
    if (std::isalpha(c)) return std::isupper(c) != 0;
    if (std::isdigit(c)) return false;
  }
  return false;
}

bool has_digit(const std::string& w) {
  return std::any_of(w.begin(), w.end(), [](unsigned char c) { return std::isdigit(c) != 0; });
}

// Does the word close a phrase? Abbreviations like "F.C." or "St." do not.
bool ends_phrase(const std::string& w) {
  if (w.empty()) return false;
  const char last = w.back();
  if (last == ',' || last == ';' || last == ':' || last == '?' || last == '!' || last == ')') {
    return true;
  }
  if (last != '.') return false;
  const std::string core = w.substr(0, w.size() - 1);
  return core.size() > 2 && core.find('.') == std::string::npos;
}

std::vector<Word> split_words(std::string_view text) {
  std::vector<Word> words;
  bool start = true;
  std::size_t i = 0;
  while (i < text.size()) {
    while (i < text.size() && std::isspace(static_cast<unsigned char>(text[i]))) ++i;
    std::size_t j = i;
    while (j < text.size() && !std::isspace(static_cast<unsigned char>(text[j]))) ++j;
    if (j > i) {
      Word w{std::string(text.substr(i, j - i)), start};
      const char last = w.raw.back();
      start = last == '.' || last == '?' || last == '!';
      if (last == '.' && !ends_phrase(w.raw)) start = false;
      words.push_back(std::move(w));
    }
    i = j;
  }
  return words;
}

void add(std::vector<Entity>& out, Entity e) {
  if (e.empty()) return;
  if (std::find(out.begin(), out.end(), e) == out.end()) out.push_back(std::move(e));
}

}  // namespace

std::string entity_text(const Entity& e) {
  std::string out;
  for (const auto& t : e) {
    if (!out.empty()) out += ' ';
    out += t;
  }
  return out;
}

std::vector<Entity> extract_entities(std::string_view text) {
  std::vector<Entity> out;

  // Quoted spans.
  for (std::size_t i = 0; i < text.size(); ++i) {
    if (text[i] != '"') continue;
    const auto close = text.find('"', i + 1);
    if (close == std::string_view::npos) break;
    std::vector<std::string> raw;
    for (const auto& w : split_words(text.substr(i + 1, close - i - 1))) raw.push_back(w.raw);
    add(out, normalize(raw));
    i = close;
  }

  const auto words = split_words(text);
  std::vector<std::string> run;
  std::size_t pending_connectors = 0;
  auto flush = [&] {
    run.resize(run.size() - pending_connectors);
    pending_connectors = 0;
    add(out, normalize(run));
    run.clear();
  };

  for (const auto& w : words) {
    if (has_digit(w.raw)) {
      flush();
      add(out, normalize({w.raw}));
      continue;
    }
    const std::string bare = strip_punct(w.raw);
    if (capitalized(w.raw)) {
      if (run.empty() && w.sentence_start && kInitialStopwords.count(bare)) {
        continue;
      }
      run.push_back(w.raw);
      pending_connectors = 0;
      if (ends_phrase(w.raw)) flush();
      continue;
    }
    if (!run.empty() && kConnectors.count(lower(w.raw))) {
      run.push_back(w.raw);
      ++pending_connectors;
      continue;
    }
    flush();
  }
  flush();
  return out;
}

bool same_entity(const Entity& a, const Entity& b) {
  if (a.empty() || b.empty()) return false;
  const Entity& shorter = a.size() <= b.size() ? a : b;
  const Entity& longer = a.size() <= b.size() ? b : a;
  return std::search(longer.begin(), longer.end(), shorter.begin(), shorter.end()) != longer.end();
}

bool entities_intersect(const std::vector<Entity>& a, const std::vector<Entity>& b) {
  for (const auto& x : a) {
    for (const auto& y : b) {
      if (same_entity(x, y)) return true;
    }
  }
  return false;
}

}  // namespace hoptrace
