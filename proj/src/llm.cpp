#include "selfevo/llm.hpp"

#include <cctype>
#include <fstream>
#include <mutex>
#include <set>
#include <sstream>
#include <thread>

#include <spdlog/spdlog.h>

#include "prompt_data.hpp"
#include "selfevo/error.hpp"
#include "selfevo/text.hpp"

namespace selfevo::llm {
namespace {

using nlohmann::json;

bool is_slot_char(char c, bool first) {
  const auto u = static_cast<unsigned char>(c);
  if (first) return std::islower(u) || c == '_';
  return std::islower(u) || std::isdigit(u) || c == '_';
}

/// Calls `on_text(begin, end)` for literal runs and `on_slot(name)` for each
/// `{name}` occurrence.
template <typename TextFn, typename SlotFn>
void scan_slots(std::string_view text, TextFn&& on_text, SlotFn&& on_slot) {
  std::size_t literal_start = 0;
  std::size_t i = 0;
  while (i < text.size()) {
    if (text[i] == '{' && i + 1 < text.size() && is_slot_char(text[i + 1], true)) {
      std::size_t j = i + 1;
      while (j < text.size() && is_slot_char(text[j], false)) ++j;
      if (j < text.size() && text[j] == '}') {
        on_text(text.substr(literal_start, i - literal_start));
        on_slot(std::string(text.substr(i + 1, j - i - 1)));
        i = j + 1;
        literal_start = i;
        continue;
      }
    }
    ++i;
  }
  on_text(text.substr(literal_start));
}

std::string_view strip_final_newline(std::string_view s) {
  if (!s.empty() && s.back() == '\n') s.remove_suffix(1);
  return s;
}

std::optional<std::string_view> embedded(std::string_view file_name) {
  for (const auto& p : detail::embedded_prompts()) {
    if (p.file_name == file_name) return strip_final_newline(p.content);
  }
  return std::nullopt;
}

std::string substitute(std::string_view text, const std::map<std::string, std::string>& bindings,
                       const std::string& template_name) {
  std::string out;
  scan_slots(
      text, [&](std::string_view literal) { out += literal; },
      [&](const std::string& slot) {
        auto it = bindings.find(slot);
        if (it == bindings.end()) {
          throw Error(Errc::template_error, "template '" + template_name + "': slot '" + slot + "' is unbound");
        }
        if (it->second.empty()) {
          throw Error(Errc::template_error, "template '" + template_name + "': slot '" + slot + "' is empty");
        }
        out += it->second;
      });
  return out;
}

// Rewrites single-quoted keys/strings as JSON strings. A closing quote is one
// followed (after spaces) by a structural character, so apostrophes inside
// words survive.
std::string requote(std::string_view s) {
  std::string out;
  out.reserve(s.size() + 16);
  bool in_double = false;
  for (std::size_t i = 0; i < s.size(); ++i) {
    const char c = s[i];
    if (in_double) {
      out.push_back(c);
      if (c == '\\' && i + 1 < s.size()) {
        out.push_back(s[++i]);
      } else if (c == '"') {
        in_double = false;
      }
      continue;
    }
    if (c == '"') {
      in_double = true;
      out.push_back(c);
      continue;
    }
    if (c != '\'') {
      out.push_back(c);
      continue;
    }
    std::size_t j = i + 1;
    std::size_t close = std::string_view::npos;
    for (; j < s.size(); ++j) {
      if (s[j] == '\\') {
        ++j;
        continue;
      }
      if (s[j] != '\'') continue;
      std::size_t k = j + 1;
      while (k < s.size() && std::isspace(static_cast<unsigned char>(s[k]))) ++k;
      if (k == s.size() || s[k] == ':' || s[k] == ',' || s[k] == '}' || s[k] == ']') {
        close = j;
        break;
      }
    }
    if (close == std::string_view::npos) {
      out.push_back(c);
      continue;
    }
    out.push_back('"');
    for (std::size_t k = i + 1; k < close; ++k) {
      if (s[k] == '"') {
        out += "\\\"";
      } else if (s[k] == '\\' && k + 1 < close && s[k + 1] == '\'') {
        out.push_back('\'');
        ++k;
      } else {
        out.push_back(s[k]);
      }
    }
    out.push_back('"');
    i = close;
  }
  return out;
}

std::size_t matching_brace(std::string_view text, std::size_t open) {
  int depth = 0;
  bool in_string = false;
  for (std::size_t i = open; i < text.size(); ++i) {
    const char c = text[i];
    if (in_string) {
      if (c == '\\') {
        ++i;
      } else if (c == '"') {
        in_string = false;
      }
      continue;
    }
    if (c == '"') {
      in_string = true;
    } else if (c == '{') {
      ++depth;
    } else if (c == '}') {
      if (--depth == 0) return i;
    }
  }
  return std::string_view::npos;
}

}  // namespace

std::string_view to_string(MessageRole role) {
  switch (role) {
    case MessageRole::system: return "system";
    case MessageRole::user: return "user";
    case MessageRole::assistant: return "assistant";
  }
  return "user";
}

void GenerationParams::validate() const {
  if (!(temperature >= 0.0)) throw Error(Errc::precondition, "temperature must be >= 0");
  if (!(top_p > 0.0 && top_p <= 1.0)) throw Error(Errc::precondition, "top_p must lie in (0, 1]");
  if (top_k <= 0) throw Error(Errc::precondition, "top_k must be positive");
  if (!(repetition_penalty >= 1.0)) throw Error(Errc::precondition, "repetition_penalty must be >= 1");
  if (max_tokens <= 0) throw Error(Errc::precondition, "max_tokens must be positive");
  if (sample_index < 0) throw Error(Errc::precondition, "sample_index must be >= 0");
}

GenerationParams GenerationParams::judge_defaults() {
  GenerationParams p;
  p.temperature = 0.8;
  p.top_p = 0.95;
  p.top_k = 50;
  p.repetition_penalty = 1.0;
  return p;
}

std::vector<std::string> find_slots(std::string_view text) {
  std::vector<std::string> slots;
  scan_slots(
      text, [](std::string_view) {},
      [&](const std::string& slot) {
        if (std::find(slots.begin(), slots.end(), slot) == slots.end()) slots.push_back(slot);
      });
  return slots;
}

PromptTemplate PromptTemplate::make(std::string name, std::string system_text, std::string user_text) {
  PromptTemplate t;
  t.name = std::move(name);
  t.system_text = std::move(system_text);
  t.user_text = std::move(user_text);
  t.slots = find_slots(t.system_text);
  for (auto& s : find_slots(t.user_text)) {
    if (std::find(t.slots.begin(), t.slots.end(), s) == t.slots.end()) t.slots.push_back(std::move(s));
  }
  return t;
}

std::vector<std::string> builtin_template_names() {
  std::set<std::string> names;
  for (const auto& p : detail::embedded_prompts()) {
    std::string_view f = p.file_name;
    f = f.substr(0, f.find('.'));
    names.emplace(f);
  }
  return {names.begin(), names.end()};
}

const PromptTemplate& builtin_template(std::string_view name) {
  static std::mutex mutex;
  static std::map<std::string, PromptTemplate, std::less<>> cache;
  std::lock_guard lock(mutex);
  if (auto it = cache.find(name); it != cache.end()) return it->second;

  const std::string key(name);
  auto system = embedded(key + ".system.txt");
  if (!system && key == "refinement_guided") system = embedded("refinement.system.txt");
  auto user = embedded(key + ".user.txt");
  if (!system && !user) throw Error(Errc::template_error, "unknown prompt template '" + key + "'");

  auto [it, _] = cache.emplace(
      key, PromptTemplate::make(key, std::string(system.value_or("")), std::string(user.value_or(""))));
  return it->second;
}

std::vector<ChatMessage> render_prompt(const PromptTemplate& tmpl, const std::map<std::string, std::string>& bindings) {
  for (const auto& slot : tmpl.slots) {
    auto it = bindings.find(slot);
    if (it == bindings.end()) {
      throw Error(Errc::template_error, "template '" + tmpl.name + "': slot '" + slot + "' is unbound");
    }
    if (it->second.empty()) {
      throw Error(Errc::template_error, "template '" + tmpl.name + "': slot '" + slot + "' is empty");
    }
  }
  std::vector<ChatMessage> out;
  if (!tmpl.system_text.empty()) {
    out.push_back({MessageRole::system, substitute(tmpl.system_text, bindings, tmpl.name)});
  }
  if (!tmpl.user_text.empty()) {
    out.push_back({MessageRole::user, substitute(tmpl.user_text, bindings, tmpl.name)});
  }
  return out;
}

std::string message_key(std::span<const ChatMessage> messages) {
  std::uint64_t h = text::fnv1a("");
  for (const auto& m : messages) {
    h = text::fnv1a(to_string(m.role), h);
    h = text::fnv1a("\x1f", h);
    h = text::fnv1a(m.content, h);
    h = text::fnv1a("\x1e", h);
  }
  return text::hex64(h);
}

std::vector<ChatMessage> to_chat(const std::vector<Utterance>& utterances) {
  std::vector<ChatMessage> out;
  out.reserve(utterances.size());
  for (const auto& u : utterances) {
    out.push_back({u.role == Role::seeker ? MessageRole::user : MessageRole::assistant, u.text});
  }
  return out;
}

std::vector<Utterance> from_chat(std::span<const ChatMessage> messages) {
  std::vector<Utterance> out;
  for (const auto& m : messages) {
    if (m.role == MessageRole::system) continue;
    Utterance u;
    u.role = m.role == MessageRole::user ? Role::seeker : Role::supporter;
    u.text = m.content;
    u.turn_index = out.size();
    out.push_back(std::move(u));
  }
  return out;
}

// --- scripted backend -------------------------------------------------------

std::shared_ptr<ScriptedBackend> ScriptedBackend::from_json(const json& script) {
  auto backend = std::make_shared<ScriptedBackend>();
  auto responses_of = [](const json& entry) {
    std::vector<std::string> out;
    if (auto it = entry.find("responses"); it != entry.end()) {
      for (const auto& r : *it) out.push_back(r.get<std::string>());
    } else if (auto r = entry.find("response"); r != entry.end()) {
      out.push_back(r->get<std::string>());
    }
    if (out.empty()) throw Error(Errc::fixture, "script entry without responses");
    return out;
  };
  try {
    for (const auto& e : script.value("entries", json::array())) {
      backend->add(e.at("key").get<std::string>(), responses_of(e));
    }
    for (const auto& r : script.value("rules", json::array())) {
      backend->add_rule(r.at("contains").get<std::string>(), responses_of(r));
    }
    if (auto d = script.find("default"); d != script.end()) backend->set_default(d->get<std::string>());
  } catch (const json::exception& e) {
    throw Error(Errc::fixture, std::string("malformed script: ") + e.what());
  }
  return backend;
}

std::shared_ptr<ScriptedBackend> ScriptedBackend::from_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(Errc::path, "cannot open script " + path.string());
  try {
    return from_json(json::parse(in));
  } catch (const json::parse_error& e) {
    throw Error(Errc::fixture, path.string() + ": " + e.what());
  }
}

void ScriptedBackend::add(std::string key, std::vector<std::string> responses) {
  entries_[std::move(key)] = std::move(responses);
}

void ScriptedBackend::add(std::span<const ChatMessage> messages, std::vector<std::string> responses) {
  add(message_key(messages), std::move(responses));
}

void ScriptedBackend::add_rule(std::string contains, std::vector<std::string> responses) {
  rules_.emplace_back(std::move(contains), std::move(responses));
}

const std::string& ScriptedBackend::pick(const std::vector<std::string>& responses, int index) {
  const auto i = std::min<std::size_t>(static_cast<std::size_t>(std::max(index, 0)), responses.size() - 1);
  return responses[i];
}

std::string ScriptedBackend::complete(std::span<const ChatMessage> messages, const GenerationParams& params) {
  const std::string key = message_key(messages);
  if (auto it = entries_.find(key); it != entries_.end()) return pick(it->second, params.sample_index);
  if (!messages.empty()) {
    const std::string& last = messages.back().content;
    for (const auto& [needle, responses] : rules_) {
      if (last.find(needle) != std::string::npos) return pick(responses, params.sample_index);
    }
  }
  if (responder_) {
    if (auto r = responder_(messages, params)) return *r;
  }
  if (default_) return *default_;
  throw Error(Errc::fixture, "scripted backend has no response for key " + key);
}

// --- handle -----------------------------------------------------------------

ModelHandle::ModelHandle(std::string name, std::shared_ptr<ChatBackend> backend, GenerationParams defaults,
                         RetryPolicy retry)
    : name_(std::move(name)), backend_(std::move(backend)), defaults_(defaults), retry_(retry) {
  defaults_.validate();
}

std::string ModelHandle::complete(std::span<const ChatMessage> messages, const GenerationParams& params) const {
  if (!backend_) throw Error(Errc::precondition, "model handle has no backend");
  if (messages.empty()) throw Error(Errc::precondition, "message list is empty");
  for (const auto& m : messages) {
    if (m.content.empty()) throw Error(Errc::precondition, "chat message content is empty");
  }
  params.validate();

  auto delay = retry_.initial_backoff;
  for (int attempt = 1;; ++attempt) {
    try {
      return backend_->complete(messages, params);
    } catch (const BackendError& e) {
      if (!e.retryable() || attempt >= retry_.max_attempts) throw;
      spdlog::warn("{}: attempt {}/{} failed: {}", name_, attempt, retry_.max_attempts, e.what());
      std::this_thread::sleep_for(delay);
      delay = std::chrono::milliseconds(static_cast<long long>(static_cast<double>(delay.count()) * retry_.multiplier));
    }
  }
}

ModelHandle make_handle(std::string_view spec, GenerationParams defaults) {
  auto colon = spec.find(':');
  if (colon == std::string_view::npos) throw Error(Errc::precondition, "model handle must be <kind>:<target>");
  const std::string_view kind = spec.substr(0, colon);
  std::string_view rest = spec.substr(colon + 1);

  if (kind == "scripted") {
    return ModelHandle(std::string(spec), ScriptedBackend::from_file(std::filesystem::path(std::string(rest))), defaults);
  }
  if (kind == "http" || kind == "https") {
    HttpChatBackend::Options opt;
    std::vector<std::string> parts;
    std::string cur;
    for (char c : rest) {
      if (c == ';') {
        parts.push_back(cur);
        cur.clear();
      } else {
        cur.push_back(c);
      }
    }
    parts.push_back(cur);
    opt.url = parts.front();
    if (kind == "https" && opt.url.rfind("https://", 0) != 0) opt.url = "https:" + opt.url;
    for (std::size_t i = 1; i < parts.size(); ++i) {
      auto eq = parts[i].find('=');
      if (eq == std::string::npos) throw Error(Errc::precondition, "bad handle option '" + parts[i] + "'");
      const std::string k = parts[i].substr(0, eq);
      const std::string v = parts[i].substr(eq + 1);
      if (k == "model") {
        opt.model = v;
      } else if (k == "key_env") {
        opt.api_key_env = v;
      } else if (k == "timeout_ms") {
        opt.timeout = std::chrono::milliseconds(std::stoll(v));
      } else {
        throw Error(Errc::precondition, "unknown handle option '" + k + "'");
      }
    }
    return ModelHandle(std::string(spec), std::make_shared<HttpChatBackend>(opt), defaults);
  }
  throw Error(Errc::precondition, "unknown model backend '" + std::string(kind) + "'");
}

// --- JSON extraction --------------------------------------------------------

json parse_json_block(std::string_view text, const std::vector<std::string>& required_fields) {
  std::optional<json> found;
  for (std::size_t open = text.find('{'); open != std::string_view::npos && !found; open = text.find('{', open + 1)) {
    const std::size_t close = matching_brace(text, open);
    if (close == std::string_view::npos) continue;
    const std::string_view candidate = text.substr(open, close - open + 1);
    for (const std::string& attempt : {std::string(candidate), requote(candidate)}) {
      try {
        json parsed = json::parse(attempt);
        if (parsed.is_object()) {
          found = std::move(parsed);
          break;
        }
      } catch (const json::parse_error&) {
      }
    }
  }
  if (!found) throw Error(Errc::parse, "no parseable JSON object in model output");

  std::vector<std::string> missing;
  for (const auto& f : required_fields) {
    if (!found->contains(f)) missing.push_back(f);
  }
  if (!missing.empty()) {
    throw Error(Errc::schema, "JSON object is missing field(s): " + text::join(missing, ", "));
  }
  return *found;
}

}  // namespace selfevo::llm
