#pragma once

#include <memory>
#include <mutex>
#include <optional>
#include <regex>
#include <string>
#include <unordered_map>
#include <vector>

#include <nlohmann/json.hpp>

namespace hoptrace {

enum class Role { kSystem, kUser, kAssistant };

std::string_view to_string(Role role);
Role parse_role(std::string_view s);

struct ChatMessage {
  Role role = Role::kUser;
  std::string text;
  std::vector<std::string> image_refs;

  bool operator==(const ChatMessage&) const = default;
};

nlohmann::ordered_json message_to_json(const ChatMessage& m);
ChatMessage message_from_json(const nlohmann::ordered_json& j);

struct BackendSpec {
  std::string name = "default";
  // "scripted:<file>" or "http://host:port/path"
  std::string endpoint;
  double temperature = 0.0;
  int max_output_tokens = 1024;
  int budget = 64;  // completions per sample session
  bool accepts_images = false;
  int retries = 2;
  int timeout_seconds = 60;
  bool serialize_egress = false;

  nlohmann::ordered_json to_json() const;
};

/// Who is asking and at which point; scripted backends match on these.
struct CallContext {
  std::string sample_id;
  int turn = 1;  // 1-based within the session
  std::string purpose;
};

class ModelBackend {
 public:
  virtual ~ModelBackend() = default;

  virtual std::string complete(const CallContext& ctx, const std::vector<ChatMessage>& messages) = 0;
  /// Whether image pixels are actually transmitted with image_refs.
  virtual bool accepts_images() const = 0;
  virtual std::string describe() const = 0;
};

/// Deterministic stand-in for a model. Script files hold one JSON entry per
/// line; the first entry whose present fields all match answers the call:
///   {"sample": "s1", "turn": 2, "purpose": "agent",
///    "cue": "<ECMAScript regex searched in the last user message>",
///    "contains": ["literal", ...], "response": "..."}
/// An entry with no match fields is a catch-all.
class ScriptedBackend final : public ModelBackend {
 public:
  struct Entry {
    std::optional<std::string> sample;
    std::optional<int> turn;
    std::optional<std::string> purpose;
    std::optional<std::string> cue;
    std::vector<std::string> contains;
    std::string response;
  };

  explicit ScriptedBackend(std::vector<Entry> entries, std::string name = "scripted");
  static std::shared_ptr<ScriptedBackend> from_file(const std::string& path);

  std::string complete(const CallContext& ctx, const std::vector<ChatMessage>& messages) override;
  bool accepts_images() const override { return false; }
  std::string describe() const override { return name_; }

  static nlohmann::ordered_json entry_to_json(const Entry& e);
  static Entry entry_from_json(const nlohmann::ordered_json& j);

 private:
  bool matches(std::size_t idx, const CallContext& ctx, const std::string& last_user);

  std::vector<Entry> entries_;
  std::string name_;
  std::unordered_map<std::string, std::vector<std::size_t>> by_sample_;
  std::vector<std::size_t> any_sample_;
  std::mutex regex_mu_;
  std::unordered_map<std::size_t, std::regex> regex_cache_;
};

/// Chat-completion client over HTTP. Sends {"model","messages","temperature",
/// "max_tokens"}; reads choices[0].message.content or a top-level "text".
/// HOPTRACE_API_KEY, when set, is sent as a bearer token.
class HttpChatBackend final : public ModelBackend {
 public:
  explicit HttpChatBackend(BackendSpec spec);

  std::string complete(const CallContext& ctx, const std::vector<ChatMessage>& messages) override;
  bool accepts_images() const override { return spec_.accepts_images; }
  std::string describe() const override { return spec_.endpoint; }

 private:
  BackendSpec spec_;
  std::mutex egress_mu_;
};

std::shared_ptr<ModelBackend> make_backend(const BackendSpec& spec);

struct TranscriptEntry;

/// A configured model role: its spec plus the live client.
struct Backend {
  BackendSpec spec;
  std::shared_ptr<ModelBackend> client;

  static Backend from_spec(BackendSpec spec);
  static Backend scripted(std::shared_ptr<ScriptedBackend> client, int budget = 64);
};

struct TranscriptEntry {
  std::string purpose;
  int turn = 0;
  std::vector<ChatMessage> request;
  std::string response;

  bool operator==(const TranscriptEntry&) const = default;
};

nlohmann::ordered_json transcript_to_json(const std::vector<TranscriptEntry>& transcript);
std::vector<TranscriptEntry> transcript_from_json(const nlohmann::ordered_json& j);

/// Scripted backend that answers exactly what a logged transcript recorded,
/// keyed on (sample, purpose, turn).
std::shared_ptr<ScriptedBackend> replay_backend(
    const std::vector<std::pair<std::string, std::vector<TranscriptEntry>>>& per_sample);

/// One sample's conversation with one backend role. Enforces the per-sample
/// budget, numbers turns, and appends every exchange to the transcript.
class Session {
 public:
  Session(std::shared_ptr<ModelBackend> backend, const BackendSpec& spec, std::string sample_id,
          std::string purpose, std::vector<TranscriptEntry>* transcript);

  std::string complete(const std::vector<ChatMessage>& messages);
  int calls() const { return calls_; }
  bool accepts_images() const { return backend_->accepts_images(); }

 private:
  std::shared_ptr<ModelBackend> backend_;
  int budget_;
  std::string sample_id_;
  std::string purpose_;
  std::vector<TranscriptEntry>* transcript_;
  int calls_ = 0;
};

}  // namespace hoptrace
