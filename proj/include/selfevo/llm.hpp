#pragma once

#include <chrono>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "selfevo/dialogue.hpp"

namespace selfevo::llm {

enum class MessageRole { system, user, assistant };

std::string_view to_string(MessageRole role);

struct ChatMessage {
  MessageRole role = MessageRole::user;
  std::string content;

  friend bool operator==(const ChatMessage&, const ChatMessage&) = default;
};

/// Decoding parameters. `sample_index` selects an independent regeneration of
/// the same request; semantic retries bump it so a deterministic backend can
/// script a different answer per attempt.
struct GenerationParams {
  double temperature = 0.9;
  double top_p = 0.8;
  int top_k = 50;
  double repetition_penalty = 1.2;
  int max_tokens = 512;
  int sample_index = 0;

  /// Throws Errc::precondition when a field is outside its domain.
  void validate() const;

  /// Generation and evaluation decoding.
  static GenerationParams pipeline_defaults() { return {}; }
  /// Judge decoding: temperature 0.8, top-p 0.95, top-k 50.
  static GenerationParams judge_defaults();
};

/// A named prompt with an optional system part and an optional user part.
/// Slots are written `{name}`; `slots` lists every slot either part uses.
struct PromptTemplate {
  std::string name;
  std::string system_text;
  std::string user_text;
  std::vector<std::string> slots;

  /// Builds a template and derives its slot list from both parts.
  static PromptTemplate make(std::string name, std::string system_text, std::string user_text);
};

/// Slot names referenced by `text`, in order of first appearance.
std::vector<std::string> find_slots(std::string_view text);

/// Names of the templates shipped with the library.
std::vector<std::string> builtin_template_names();

/// Loads a shipped template by name (`vanilla`, `with_strategy`,
/// `with_self_reflection`, `reflection`, `refinement`, `refinement_guided`,
/// `judge_<dimension>`). Throws Errc::template_error for unknown names.
const PromptTemplate& builtin_template(std::string_view name);

/// Substitutes every slot. Unbound or empty bindings throw
/// Errc::template_error naming the slot.
std::vector<ChatMessage> render_prompt(const PromptTemplate& tmpl,
                                       const std::map<std::string, std::string>& bindings);

/// Stable hex key of a message list; the scripted backend is keyed by it.
std::string message_key(std::span<const ChatMessage> messages);

/// Seeker utterances become user turns, supporter utterances assistant turns.
std::vector<ChatMessage> to_chat(const std::vector<Utterance>& utterances);

/// Inverse of to_chat for the non-system messages.
std::vector<Utterance> from_chat(std::span<const ChatMessage> messages);

class ChatBackend {
 public:
  virtual ~ChatBackend() = default;
  virtual std::string complete(std::span<const ChatMessage> messages, const GenerationParams& params) = 0;
  virtual std::string describe() const = 0;
};

/// Deterministic backend. Lookup order: exact message key, then substring
/// rules against the last message, then a programmatic responder, then the
/// default response. Each entry holds a list of responses indexed by
/// `sample_index` (the last one repeats).
class ScriptedBackend : public ChatBackend {
 public:
  using Responder =
      std::function<std::optional<std::string>(std::span<const ChatMessage>, const GenerationParams&)>;

  ScriptedBackend() = default;
  explicit ScriptedBackend(Responder responder) : responder_(std::move(responder)) {}

  /// Script document: {"entries":[{"key":..,"responses":[..]}],
  /// "rules":[{"contains":..,"responses":[..]}], "default": ".."}.
  static std::shared_ptr<ScriptedBackend> from_json(const nlohmann::json& script);
  static std::shared_ptr<ScriptedBackend> from_file(const std::filesystem::path& path);

  void add(std::string key, std::vector<std::string> responses);
  void add(std::span<const ChatMessage> messages, std::vector<std::string> responses);
  void add_rule(std::string contains, std::vector<std::string> responses);
  void set_default(std::string response) { default_ = std::move(response); }

  std::string complete(std::span<const ChatMessage> messages, const GenerationParams& params) override;
  std::string describe() const override { return "scripted"; }

 private:
  static const std::string& pick(const std::vector<std::string>& responses, int index);

  std::map<std::string, std::vector<std::string>> entries_;
  std::vector<std::pair<std::string, std::vector<std::string>>> rules_;
  Responder responder_;
  std::optional<std::string> default_;
};

/// OpenAI-style chat-completion endpoint. The API key is read from the named
/// environment variable at call time and never stored.
class HttpChatBackend : public ChatBackend {
 public:
  struct Options {
    std::string url;  ///< e.g. http://localhost:8000/v1/chat/completions
    std::string model;
    std::string api_key_env;
    std::chrono::milliseconds timeout{60000};
  };

  explicit HttpChatBackend(Options options);

  std::string complete(std::span<const ChatMessage> messages, const GenerationParams& params) override;
  std::string describe() const override { return "http:" + options_.url; }

  /// Request body sent for `messages`/`params`.
  nlohmann::json request_body(std::span<const ChatMessage> messages, const GenerationParams& params) const;

 private:
  Options options_;
};

struct RetryPolicy {
  int max_attempts = 3;
  std::chrono::milliseconds initial_backoff{250};
  double multiplier = 2.0;
};

/// Immutable descriptor of a model: a backend plus default decoding. Calls
/// retry retryable transport failures with exponential backoff.
class ModelHandle {
 public:
  ModelHandle() = default;
  ModelHandle(std::string name, std::shared_ptr<ChatBackend> backend,
              GenerationParams defaults = GenerationParams::pipeline_defaults(), RetryPolicy retry = {});

  const std::string& name() const { return name_; }
  const GenerationParams& default_params() const { return defaults_; }
  const RetryPolicy& retry_policy() const { return retry_; }
  bool valid() const { return backend_ != nullptr; }

  std::string complete(std::span<const ChatMessage> messages, const GenerationParams& params) const;
  std::string complete(std::span<const ChatMessage> messages) const { return complete(messages, defaults_); }

 private:
  std::string name_;
  std::shared_ptr<ChatBackend> backend_;
  GenerationParams defaults_;
  RetryPolicy retry_;
};

/// Parses a handle spec: `scripted:<script.json>` or
/// `http:<url>[;model=<name>][;key_env=<VAR>][;timeout_ms=<n>]`.
ModelHandle make_handle(std::string_view spec, GenerationParams defaults = GenerationParams::pipeline_defaults());

/// Finds the first balanced `{...}` object in `text` (bare or inside a fenced
/// block) that parses as JSON, then checks `required_fields`. Objects written
/// with single-quoted keys/strings are accepted as a fallback.
nlohmann::json parse_json_block(std::string_view text, const std::vector<std::string>& required_fields = {});

}  // namespace selfevo::llm
