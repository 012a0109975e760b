#include "hoptrace/backend.hpp"

#include <algorithm>
#include <cstdlib>

#include "hoptrace/error.hpp"
#include "hoptrace/jsonl.hpp"
#include "http_post.hpp"

namespace hoptrace {

using ojson = nlohmann::ordered_json;

std::string_view to_string(Role role) {
  switch (role) {
    case Role::kSystem: return "system";
    case Role::kUser: return "user";
    case Role::kAssistant: return "assistant";
  }
  return "?";
}

Role parse_role(std::string_view s) {
  if (s == "system") return Role::kSystem;
  if (s == "user") return Role::kUser;
  if (s == "assistant") return Role::kAssistant;
  throw Error(ErrorCode::kParseError, "unknown role '" + std::string(s) + "'");
}

ojson message_to_json(const ChatMessage& m) {
  ojson j;
  j["role"] = std::string(to_string(m.role));
  j["content"] = m.text;
  if (!m.image_refs.empty()) j["images"] = m.image_refs;
  return j;
}

ChatMessage message_from_json(const ojson& j) {
  ChatMessage m;
  m.role = parse_role(j.at("role").get<std::string>());
  m.text = j.at("content").get<std::string>();
  if (j.contains("images")) m.image_refs = j["images"].get<std::vector<std::string>>();
  return m;
}

ojson BackendSpec::to_json() const {
  ojson j;
  j["name"] = name;
  j["endpoint"] = endpoint;
  j["temperature"] = temperature;
  j["max_output_tokens"] = max_output_tokens;
  j["budget"] = budget;
  j["accepts_images"] = accepts_images;
  return j;
}

// ---------------------------------------------------------------------------
// Scripted backend

ScriptedBackend::ScriptedBackend(std::vector<Entry> entries, std::string name)
    : entries_(std::move(entries)), name_(std::move(name)) {
  for (std::size_t i = 0; i < entries_.size(); ++i) {
    if (entries_[i].sample) {
      by_sample_[*entries_[i].sample].push_back(i);
    } else {
      any_sample_.push_back(i);
    }
  }
}

ojson ScriptedBackend::entry_to_json(const Entry& e) {
  ojson j;
  if (e.sample) j["sample"] = *e.sample;
  if (e.turn) j["turn"] = *e.turn;
  if (e.purpose) j["purpose"] = *e.purpose;
  if (e.cue) j["cue"] = *e.cue;
  if (!e.contains.empty()) j["contains"] = e.contains;
  j["response"] = e.response;
  return j;
}

ScriptedBackend::Entry ScriptedBackend::entry_from_json(const ojson& j) {
  Entry e;
  if (j.contains("sample")) e.sample = j["sample"].get<std::string>();
  if (j.contains("turn")) e.turn = j["turn"].get<int>();
  if (j.contains("purpose")) e.purpose = j["purpose"].get<std::string>();
  if (j.contains("cue")) e.cue = j["cue"].get<std::string>();
  if (j.contains("contains")) e.contains = j["contains"].get<std::vector<std::string>>();
  e.response = j.at("response").get<std::string>();
  return e;
}

std::shared_ptr<ScriptedBackend> ScriptedBackend::from_file(const std::string& path) {
  std::vector<Entry> entries;
  for_each_line(path, [&](std::string_view line, std::size_t n) {
    try {
      entries.push_back(entry_from_json(ojson::parse(line)));
    } catch (const nlohmann::json::exception& e) {
      throw Error(ErrorCode::kParseError, path + ":" + std::to_string(n) + ": " + e.what());
    }
  });
  return std::make_shared<ScriptedBackend>(std::move(entries), "scripted:" + path);
}

bool ScriptedBackend::matches(std::size_t idx, const CallContext& ctx, const std::string& last_user) {
  const Entry& e = entries_[idx];
  if (e.turn && *e.turn != ctx.turn) return false;
  if (e.purpose && *e.purpose != ctx.purpose) return false;
  for (const auto& needle : e.contains) {
    if (last_user.find(needle) == std::string::npos) return false;
  }
  if (e.cue) {
    std::lock_guard lock(regex_mu_);
    auto it = regex_cache_.find(idx);
    if (it == regex_cache_.end()) {
      try {
        it = regex_cache_.emplace(idx, std::regex(*e.cue, std::regex::ECMAScript)).first;
      } catch (const std::regex_error& err) {
        throw Error(ErrorCode::kParseError, "bad cue regex '" + *e.cue + "': " + err.what());
      }
    }
    if (!std::regex_search(last_user, it->second)) return false;
  }
  return true;
}

std::string ScriptedBackend::complete(const CallContext& ctx, const std::vector<ChatMessage>& messages) {
  std::string last_user;
  for (auto it = messages.rbegin(); it != messages.rend(); ++it) {
    if (it->role == Role::kUser) {
      last_user = it->text;
      break;
    }
  }
  // Merge the sample-specific and wildcard candidates in file order.
  static const std::vector<std::size_t> kNone;
  auto found = by_sample_.find(ctx.sample_id);
  const auto& specific = found == by_sample_.end() ? kNone : found->second;
  std::size_t a = 0, b = 0;
  while (a < specific.size() || b < any_sample_.size()) {
    std::size_t idx;
    if (b == any_sample_.size() || (a < specific.size() && specific[a] < any_sample_[b])) {
      idx = specific[a++];
    } else {
      idx = any_sample_[b++];
    }
    if (matches(idx, ctx, last_user)) return entries_[idx].response;
  }
  throw Error(ErrorCode::kScriptExhausted, name_ + ": no entry for sample '" + ctx.sample_id +
                                               "' purpose '" + ctx.purpose + "' turn " +
                                               std::to_string(ctx.turn));
}

// ---------------------------------------------------------------------------
// HTTP backend

HttpChatBackend::HttpChatBackend(BackendSpec spec) : spec_(std::move(spec)) {}

std::string HttpChatBackend::complete(const CallContext& /*ctx*/,
                                      const std::vector<ChatMessage>& messages) {
  nlohmann::json msgs = nlohmann::json::array();
  for (const auto& m : messages) {
    nlohmann::json jm;
    jm["role"] = std::string(to_string(m.role));
    if (m.image_refs.empty()) {
      jm["content"] = m.text;
    } else if (spec_.accepts_images) {
      nlohmann::json parts = nlohmann::json::array();
      parts.push_back({{"type", "text"}, {"text", m.text}});
      for (const auto& ref : m.image_refs) {
        parts.push_back({{"type", "image_url"}, {"image_url", {{"url", ref}}}});
      }
      jm["content"] = std::move(parts);
    } else {
      std::string text = m.text;
      for (const auto& ref : m.image_refs) text += "\n[image: " + ref + "]";
      jm["content"] = std::move(text);
    }
    msgs.push_back(std::move(jm));
  }
  nlohmann::json body = {{"model", spec_.name},
                         {"messages", std::move(msgs)},
                         {"temperature", spec_.temperature},
                         {"max_tokens", spec_.max_output_tokens}};
  std::vector<std::pair<std::string, std::string>> headers;
  if (const char* key = std::getenv("HOPTRACE_API_KEY"); key && *key) {
    headers.emplace_back("Authorization", std::string("Bearer ") + key);
  }

  nlohmann::json reply;
  if (spec_.serialize_egress) {
    std::lock_guard lock(egress_mu_);
    reply = detail::post_json(spec_.endpoint, body, spec_.timeout_seconds, spec_.retries, headers);
  } else {
    reply = detail::post_json(spec_.endpoint, body, spec_.timeout_seconds, spec_.retries, headers);
  }
  try {
    if (reply.contains("choices")) {
      const auto& content = reply["choices"].at(0).at("message").at("content");
      return content.is_null() ? std::string() : content.get<std::string>();
    }
    if (reply.contains("text")) return reply["text"].get<std::string>();
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::kTransportError, spec_.endpoint + ": unexpected reply shape: " + e.what());
  }
  throw Error(ErrorCode::kTransportError, spec_.endpoint + ": reply has no completion text");
}

std::shared_ptr<ModelBackend> make_backend(const BackendSpec& spec) {
  const std::string scripted = "scripted:";
  if (spec.endpoint.rfind(scripted, 0) == 0) {
    return ScriptedBackend::from_file(spec.endpoint.substr(scripted.size()));
  }
  if (spec.endpoint.rfind("http://", 0) == 0) return std::make_shared<HttpChatBackend>(spec);
  throw Error(ErrorCode::kInvalidArgument, "unsupported backend endpoint '" + spec.endpoint + "'");
}

Backend Backend::from_spec(BackendSpec spec) {
  auto client = make_backend(spec);
  return {std::move(spec), std::move(client)};
}

Backend Backend::scripted(std::shared_ptr<ScriptedBackend> client, int budget) {
  BackendSpec spec;
  spec.name = client->describe();
  spec.endpoint = client->describe();
  spec.budget = budget;
  return {std::move(spec), std::move(client)};
}

// ---------------------------------------------------------------------------
// Transcripts and sessions

ojson transcript_to_json(const std::vector<TranscriptEntry>& transcript) {
  ojson arr = ojson::array();
  for (const auto& t : transcript) {
    ojson j;
    j["purpose"] = t.purpose;
    j["turn"] = t.turn;
    ojson req = ojson::array();
    for (const auto& m : t.request) req.push_back(message_to_json(m));
    j["request"] = std::move(req);
    j["response"] = t.response;
    arr.push_back(std::move(j));
  }
  return arr;
}

std::vector<TranscriptEntry> transcript_from_json(const ojson& j) {
  std::vector<TranscriptEntry> out;
  for (const auto& e : j) {
    TranscriptEntry t;
    t.purpose = e.at("purpose").get<std::string>();
    t.turn = e.at("turn").get<int>();
    for (const auto& m : e.at("request")) t.request.push_back(message_from_json(m));
    t.response = e.at("response").get<std::string>();
    out.push_back(std::move(t));
  }
  return out;
}

std::shared_ptr<ScriptedBackend> replay_backend(
    const std::vector<std::pair<std::string, std::vector<TranscriptEntry>>>& per_sample) {
  std::vector<ScriptedBackend::Entry> entries;
  for (const auto& [sample, transcript] : per_sample) {
    for (const auto& t : transcript) {
      ScriptedBackend::Entry e;
      e.sample = sample;
      e.turn = t.turn;
      e.purpose = t.purpose;
      e.response = t.response;
      entries.push_back(std::move(e));
    }
  }
  return std::make_shared<ScriptedBackend>(std::move(entries), "replay");
}

Session::Session(std::shared_ptr<ModelBackend> backend, const BackendSpec& spec,
                 std::string sample_id, std::string purpose,
                 std::vector<TranscriptEntry>* transcript)
    : backend_(std::move(backend)),
      budget_(spec.budget),
      sample_id_(std::move(sample_id)),
      purpose_(std::move(purpose)),
      transcript_(transcript) {
  if (!backend_) throw Error(ErrorCode::kInvalidArgument, "session without a backend");
  if (budget_ <= 0) throw Error(ErrorCode::kInvalidArgument, "backend budget must be positive");
}

std::string Session::complete(const std::vector<ChatMessage>& messages) {
  for (std::size_t i = 1; i < messages.size(); ++i) {
    if (messages[i].role == Role::kSystem) {
      throw Error(ErrorCode::kInvalidArgument, "system message allowed only first");
    }
  }
  if (calls_ >= budget_) {
    throw Error(ErrorCode::kBudgetExhausted, purpose_ + " for sample '" + sample_id_ + "' used " +
                                                 std::to_string(budget_) + " calls");
  }
  ++calls_;
  CallContext ctx{sample_id_, calls_, purpose_};
  std::string response = backend_->complete(ctx, messages);
  if (transcript_) transcript_->push_back({purpose_, calls_, messages, response});
  return response;
}

}  // namespace hoptrace
