#include "selfevo/dialogue.hpp"

#include <algorithm>
#include <array>
#include <cctype>

#include "selfevo/error.hpp"

namespace selfevo {
namespace {

constexpr std::array<std::string_view, 8> kStrategyNames = {
    "Question",
    "Affirmation and Reassurance",
    "Reflection of Feelings",
    "Information",
    "Providing Suggestions",
    "Restatement or Paraphrasing",
    "Self-disclosure",
    "Others",
};

std::string fold(std::string_view s) {
  std::string out;
  for (char c : s) {
    if (c == ' ' || c == '-' || c == '_') {
      out.push_back('_');
    } else {
      out.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(c))));
    }
  }
  return out;
}

}  // namespace

std::string_view to_string(Errc code) {
  switch (code) {
    case Errc::schema: return "schema";
    case Errc::empty_session: return "empty_session";
    case Errc::unnormalizable_session: return "unnormalizable_session";
    case Errc::empty_corpus: return "empty_corpus";
    case Errc::range: return "range";
    case Errc::precondition: return "precondition";
    case Errc::template_error: return "template";
    case Errc::backend: return "backend";
    case Errc::fixture: return "fixture";
    case Errc::parse: return "parse";
    case Errc::vocabulary: return "vocabulary";
    case Errc::numerical: return "numerical";
    case Errc::path: return "path";
    case Errc::alignment: return "alignment";
    case Errc::unavailable: return "unavailable";
    case Errc::undefined_correlation: return "undefined_correlation";
    case Errc::protocol: return "protocol";
    case Errc::validation: return "validation";
    case Errc::pool: return "pool";
    case Errc::minimum_turns: return "minimum_turns";
    case Errc::not_found: return "not_found";
  }
  return "unknown";
}

std::string_view to_string(Role role) { return role == Role::seeker ? "seeker" : "supporter"; }

std::string_view to_string(Strategy strategy) { return kStrategyNames[static_cast<std::size_t>(strategy)]; }

std::string_view to_string(Source source) {
  switch (source) {
    case Source::esconv: return "esconv";
    case Source::extes: return "extes";
    case Source::serveforemo: return "serveforemo";
    case Source::fixture: return "fixture";
  }
  return "fixture";
}

std::optional<Role> parse_role(std::string_view name) {
  if (name == "seeker") return Role::seeker;
  if (name == "supporter") return Role::supporter;
  return std::nullopt;
}

std::optional<Strategy> parse_strategy(std::string_view name) {
  const std::string key = fold(name);
  for (std::size_t i = 0; i < kStrategyNames.size(); ++i) {
    if (fold(kStrategyNames[i]) == key) return static_cast<Strategy>(i);
  }
  return std::nullopt;
}

std::optional<Source> parse_source(std::string_view name) {
  const std::string key = fold(name);
  if (key == "esconv") return Source::esconv;
  if (key == "extes") return Source::extes;
  if (key == "serveforemo") return Source::serveforemo;
  if (key == "fixture") return Source::fixture;
  return std::nullopt;
}

std::string render_dialogue(const std::vector<Utterance>& utterances) {
  std::string out;
  for (const auto& u : utterances) {
    if (!out.empty()) out += '\n';
    out += u.role == Role::seeker ? "Seeker: " : "Supporter: ";
    out += u.text;
  }
  return out;
}

std::string seeker_text(const DialogueContext& context) {
  std::string out;
  for (const auto& u : context.utterances) {
    if (u.role != Role::seeker) continue;
    if (!out.empty()) out += ' ';
    out += u.text;
  }
  return out;
}

}  // namespace selfevo
