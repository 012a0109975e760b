#include "hoptrace/protocol.hpp"

#include <algorithm>
#include <cctype>
#include <regex>
#include <vector>

namespace hoptrace {

const std::string_view kAgentSystemPrompt = R"(You answer questions by searching two local collections, one of text passages and one of images.
Do not rely on what you remember: every claim in your answer has to come from material the user returns to you.

Each of your turns is either a search turn or the final turn.

A search turn has three tagged lines:
<Thought> what is known so far and what single fact is missing next
<Sub-Question> a self-contained question for that fact; do not write "it" or "the above" for earlier results
<Search> exactly one of:
  Text Retrieval with a specific query
  Image Retrieval with Text Query
  Image Retrieval with Input Image
  No Retrieval
After a search turn the user replies with what was found. Start your next turn with a short answer to the previous sub-question, then continue.

The final turn is
<End> Final Answer: <one sentence>

Searches return one item at a time, so ask narrow questions and search again when a result is not enough.
No citations or links. When the retrieved material cannot settle the question, say in the final answer that it cannot be answered.)";

std::string agent_question_message(std::string_view question) {
  return "Input Question: " + std::string(question);
}

std::string_view action_label(ActionChoice choice) {
  switch (choice) {
    case ActionChoice::kTextRetrieval: return "Text Retrieval with a specific query";
    case ActionChoice::kImageRetrievalTextQuery: return "Image Retrieval with Text Query";
    case ActionChoice::kImageRetrievalInputImage: return "Image Retrieval with Input Image";
    case ActionChoice::kNoRetrieval: return "No Retrieval";
  }
  return "?";
}

std::string trim(std::string_view s) {
  auto is_space = [](unsigned char c) { return std::isspace(c) != 0; };
  auto b = std::find_if_not(s.begin(), s.end(), is_space);
  auto e = std::find_if_not(s.rbegin(), s.rend(), is_space).base();
  return b < e ? std::string(b, e) : std::string();
}

namespace {

std::string words_lower(std::string_view s) {
  std::string out;
  bool space = true;
  for (unsigned char c : s) {
    if (std::isalnum(c)) {
      out.push_back(static_cast<char>(std::tolower(c)));
      space = false;
    } else if (!space) {
      out.push_back(' ');
      space = true;
    }
  }
  if (!out.empty() && out.back() == ' ') out.pop_back();
  return out;
}

bool has(const std::string& hay, std::string_view needle) {
  return hay.find(needle) != std::string::npos;
}

enum class TagName { kThought, kSubQuestion, kSearch, kEnd };

struct Tag {
  TagName name;
  bool closing;
  std::size_t begin;  // position of '<'
  std::size_t end;    // one past '>'
};

std::vector<Tag> scan_tags(std::string_view text) {
  std::vector<Tag> tags;
  std::size_t pos = 0;
  while ((pos = text.find('<', pos)) != std::string_view::npos) {
    auto close = text.find('>', pos + 1);
    if (close == std::string_view::npos) break;
    std::string_view inner = text.substr(pos + 1, close - pos - 1);
    bool closing = false;
    std::string key;
    for (char ch : inner) {
      auto c = static_cast<unsigned char>(ch);
      if (c == '/' && key.empty()) {
        closing = true;
      } else if (std::isalpha(c)) {
        key.push_back(static_cast<char>(std::tolower(c)));
      } else if (c != '-' && c != '_' && !std::isspace(c)) {
        key = "#";  // not a protocol tag
        break;
      }
    }
    std::optional<TagName> name;
    if (key == "thought") name = TagName::kThought;
    if (key == "subquestion") name = TagName::kSubQuestion;
    if (key == "search") name = TagName::kSearch;
    if (key == "end") name = TagName::kEnd;
    if (name && inner.size() <= 32) {
      tags.push_back({*name, closing, pos, close + 1});
      pos = close + 1;
    } else {
      pos = pos + 1;
    }
  }
  return tags;
}

}  // namespace

std::optional<ActionChoice> match_action(std::string_view body) {
  const std::string w = words_lower(body);
  if (has(w, "no retrieval")) return ActionChoice::kNoRetrieval;
  if (has(w, "input image")) return ActionChoice::kImageRetrievalInputImage;
  if (has(w, "image")) return ActionChoice::kImageRetrievalTextQuery;
  if (has(w, "text")) return ActionChoice::kTextRetrieval;
  return std::nullopt;
}

std::optional<std::string> find_final_answer(std::string_view text) {
  static const std::regex re("final\\s*answer\\s*:", std::regex::icase);
  std::string s(text);
  std::smatch m;
  if (!std::regex_search(s, m, re)) return std::nullopt;
  return trim(s.substr(static_cast<std::size_t>(m.position(0) + m.length(0))));
}

ParsedTurn parse_agent_output(std::string_view text) {
  ParsedTurn out;
  const auto tags = scan_tags(text);
  if (tags.empty()) {
    out.error = "no protocol tags";
    return out;
  }
  out.preamble = trim(text.substr(0, tags.front().begin));

  // Body of an opening tag runs to the next tag of any kind.
  auto body = [&](std::size_t i) {
    const std::size_t from = tags[i].end;
    const std::size_t to = i + 1 < tags.size() ? tags[i + 1].begin : text.size();
    return trim(text.substr(from, to - from));
  };

  std::string thought;
  std::string sub_question;
  for (std::size_t i = 0; i < tags.size(); ++i) {
    if (tags[i].closing) continue;
    switch (tags[i].name) {
      case TagName::kThought:
        thought = body(i);
        break;
      case TagName::kSubQuestion:
        sub_question = body(i);
        break;
      case TagName::kEnd: {
        out.kind = ParsedTurn::Kind::kEnd;
        out.thought = thought;
        std::string b = body(i);
        auto fa = find_final_answer(b);
        out.final_answer = fa ? *fa : b;
        return out;
      }
      case TagName::kSearch: {
        std::string b = body(i);
        auto action = match_action(b);
        if (!action) {
          out.error = "unrecognized action '" + b + "'";
          continue;
        }
        if (*action != ActionChoice::kNoRetrieval && sub_question.empty()) {
          out.error = "search without a sub-question";
          continue;
        }
        out.kind = ParsedTurn::Kind::kSearch;
        out.thought = thought;
        out.sub_question = sub_question;
        out.action = *action;
        out.search_body = b;
        out.error.clear();
        return out;
      }
    }
  }
  if (out.error.empty()) out.error = "no <Search> or <End> block";
  return out;
}

std::string format_search_turn(std::string_view preamble, std::string_view thought,
                               std::string_view sub_question, ActionChoice action,
                               std::string_view image_id) {
  std::string out;
  if (!preamble.empty()) {
    out += preamble;
    out += '\n';
  }
  out += "<Thought> ";
  out += thought;
  out += "\n<Sub-Question> ";
  out += sub_question;
  out += "\n<Search> ";
  out += action_label(action);
  if (!image_id.empty()) {
    out += ' ';
    out += image_id;
  }
  return out;
}

std::string format_end_turn(std::string_view preamble, std::string_view final_answer) {
  std::string out;
  if (!preamble.empty()) {
    out += preamble;
    out += '\n';
  }
  out += "<End> Final Answer: ";
  out += final_answer;
  return out;
}

std::string protocol_reminder(std::string_view problem) {
  return "Your reply could not be processed (" + std::string(problem) +
         "). Reply with <Thought>, <Sub-Question> and <Search> naming one retrieval action, "
         "or finish with <End> Final Answer: ...";
}

std::string max_turns_message() {
  return "The maximum number of reasoning steps has been reached. Reply now with "
         "<End> Final Answer: followed by a one-sentence answer.";
}

}  // namespace hoptrace
