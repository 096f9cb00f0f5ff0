#pragma once

#include <cstddef>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace selfevo {

enum class Role { seeker, supporter };

/// The eight labelled support strategies.
enum class Strategy {
  question,
  affirmation_and_reassurance,
  reflection_of_feelings,
  information,
  providing_suggestions,
  restatement_or_paraphrasing,
  self_disclosure,
  others,
};

enum class Source { esconv, extes, serveforemo, fixture };

std::string_view to_string(Role role);
std::string_view to_string(Strategy strategy);
std::string_view to_string(Source source);

std::optional<Role> parse_role(std::string_view name);
/// Accepts the display names ("Affirmation and Reassurance") as well as the
/// snake_case spelling.
std::optional<Strategy> parse_strategy(std::string_view name);
std::optional<Source> parse_source(std::string_view name);

struct Utterance {
  Role role = Role::seeker;
  std::string text;
  std::optional<Strategy> strategy;
  std::size_t turn_index = 0;

  friend bool operator==(const Utterance&, const Utterance&) = default;
};

struct DialogueSession {
  std::string session_id;
  Source source = Source::fixture;
  std::map<std::string, std::string> metadata;
  std::vector<Utterance> utterances;

  friend bool operator==(const DialogueSession&, const DialogueSession&) = default;
};

/// A session prefix ending with a seeker utterance. `turn` is 1-based: the
/// context of turn n holds (q1, r1, ..., q_n).
struct DialogueContext {
  std::string session_id;
  std::size_t turn = 1;
  std::vector<Utterance> utterances;

  friend bool operator==(const DialogueContext&, const DialogueContext&) = default;
};

/// "Seeker: ...\nSupporter: ..." rendering used by the prompt slots.
std::string render_dialogue(const std::vector<Utterance>& utterances);

/// All seeker texts joined by a single space.
std::string seeker_text(const DialogueContext& context);

}  // namespace selfevo
