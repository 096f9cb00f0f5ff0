#pragma once

#include <cstdint>
#include <filesystem>
#include <set>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "selfevo/dialogue.hpp"

namespace selfevo::corpus {

/// Unit of the greeting exclusion rule. An exchange is one seeker utterance
/// plus the supporter reply that follows it.
enum class TurnUnit { exchange, utterance };

struct CorpusStats {
  std::size_t session_count = 0;
  double avg_session_len = 0.0;
  double avg_utter_len = 0.0;
  double avg_seeker_utter_len = 0.0;
  double avg_supporter_utter_len = 0.0;
};

/// What normalize_session removed.
struct NormalizeReport {
  std::size_t dropped_leading_utterances = 0;
  std::size_t dropped_leading_tokens = 0;
  std::size_t dropped_empty_utterances = 0;
  std::size_t merged_utterances = 0;
};

/// Builds a session from one structured record. Accepts `dialog` entries with
/// `role`/`text` (or the ESConv spellings `speaker`/`content`, with the
/// strategy under `annotation.strategy`). No normalization is applied.
DialogueSession parse_session(const nlohmann::json& record);

nlohmann::json to_json(const DialogueSession& session);

/// Drops leading supporter utterances, merges consecutive same-role
/// utterances with a single space, NFC-normalizes and trims text, and
/// renumbers turn indices.
DialogueSession normalize_session(const DialogueSession& session, NormalizeReport* report = nullptr);

/// Number of seeker utterances in a normalized session.
std::size_t exchange_count(const DialogueSession& session);

/// 0-based exchange indices usable as context endpoints after removing the
/// first turn and the last two turns.
std::set<std::size_t> eligible_turn_indices(const DialogueSession& session,
                                            TurnUnit unit = TurnUnit::exchange);

/// One context per exchange index, each ending with that exchange's seeker
/// utterance, ordered by index.
std::vector<DialogueContext> extract_contexts(const DialogueSession& session,
                                              const std::set<std::size_t>& indices);

/// The supporter reply to exchange `index`, if the session has one.
std::optional<std::string> golden_response(const DialogueSession& session, std::size_t index);

CorpusStats compute_stats(const std::vector<DialogueSession>& sessions);

/// Flat `key = value` document using the dataset table's row names, values
/// rounded to two decimals.
std::string format_stats(const CorpusStats& stats);

std::pair<std::vector<DialogueSession>, std::vector<DialogueSession>> split_corpus(
    const std::vector<DialogueSession>& sessions, double ratio, std::uint64_t seed);

/// Reads a corpus file. Line-delimited records by default; a file whose first
/// non-blank byte is `[` is read as one JSON array (the ESConv release
/// format). Parse failures report the 1-based line or record number.
std::vector<DialogueSession> read_corpus(const std::filesystem::path& path);

void write_corpus(const std::filesystem::path& path, const std::vector<DialogueSession>& sessions);

}  // namespace selfevo::corpus
