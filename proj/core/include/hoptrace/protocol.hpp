#pragma once

#include <optional>
#include <string>
#include <string_view>

namespace hoptrace {

/// System prompt of the plan/retrieve/reason protocol.
extern const std::string_view kAgentSystemPrompt;

std::string agent_question_message(std::string_view question);

enum class ActionChoice {
  kTextRetrieval,
  kImageRetrievalTextQuery,
  kImageRetrievalInputImage,
  kNoRetrieval,
};

/// The exact action names offered to the model.
std::string_view action_label(ActionChoice choice);

/// Normalized keyword match of a `<Search>` body against the action names.
std::optional<ActionChoice> match_action(std::string_view body);

struct ParsedTurn {
  enum class Kind { kSearch, kEnd, kInvalid };

  Kind kind = Kind::kInvalid;
  std::string preamble;  // text before the first protocol tag
  std::string thought;
  std::string sub_question;
  ActionChoice action = ActionChoice::kNoRetrieval;
  std::string search_body;
  std::string final_answer;
  std::string error;
};

/// Parses one assistant message. Tags are case-insensitive; the first
/// well-formed `<Search>` or `<End>` block decides the turn, and the
/// `<Thought>`/`<Sub-Question>` bodies nearest before it are attached.
ParsedTurn parse_agent_output(std::string_view text);

/// Text after "Final Answer:" (case-insensitive), if any.
std::optional<std::string> find_final_answer(std::string_view text);

/// `image_id` names which input image an input-image search refers to; the
/// loop picks the first input image when none is named.
std::string format_search_turn(std::string_view preamble, std::string_view thought,
                               std::string_view sub_question, ActionChoice action,
                               std::string_view image_id = {});
std::string format_end_turn(std::string_view preamble, std::string_view final_answer);

std::string protocol_reminder(std::string_view problem);
std::string max_turns_message();

std::string trim(std::string_view s);

}  // namespace hoptrace
