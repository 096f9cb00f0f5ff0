#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "selfevo/dialogue.hpp"
#include "selfevo/llm.hpp"

namespace selfevo::judge {

enum class Dimension { coherence, understanding, empathy, engagement, informativeness, helpfulness, overall };

inline constexpr std::array<Dimension, 7> kDimensions = {
    Dimension::coherence,       Dimension::understanding, Dimension::empathy, Dimension::engagement,
    Dimension::informativeness, Dimension::helpfulness,   Dimension::overall,
};

std::string_view to_string(Dimension dimension);
std::optional<Dimension> parse_dimension(std::string_view name);

struct JudgeVerdict {
  Dimension dimension = Dimension::coherence;
  double score = 0.0;
  std::string explanation;
  std::string raw;
  int attempts = 0;
  /// The last attempt's score was outside [0, 5] and was clamped.
  bool clamped = false;
};

/// A judge call. `verdict` is empty when no attempt yielded a score.
struct JudgeResult {
  Dimension dimension = Dimension::coherence;
  std::optional<JudgeVerdict> verdict;
  int attempts = 0;
  std::string last_raw;
};

/// Renders the dimension's prompt with the dialogue history and the response.
/// Throws Errc::precondition for an empty response.
std::vector<llm::ChatMessage> render_judge_prompt(Dimension dimension, const DialogueContext& conversation,
                                                  const std::string& response);

struct ParsedJudgement {
  std::optional<double> score;
  std::string explanation;
};

/// Reads {Explanation, Score} from a JSON object or from
/// "Explanation: ..." / "Score: ..." lines. `score` is empty when no number
/// can be read.
ParsedJudgement parse_judgement(std::string_view text);

/// Retries up to `max_attempts` times while the score is missing or outside
/// [0, 5]. When attempts run out, the most recent out-of-range score is
/// clamped; with no numeric score at all the verdict is unavailable.
JudgeResult judge_response(const llm::ModelHandle& judge_model, Dimension dimension,
                           const DialogueContext& conversation, const std::string& response,
                           const llm::GenerationParams& params = llm::GenerationParams::judge_defaults(),
                           int max_attempts = 3);

struct DimensionAggregate {
  double mean = 0.0;
  std::size_t count = 0;
  std::size_t unavailable = 0;
};

/// Per-dimension means over available verdicts. Throws Errc::precondition for
/// an empty list and Errc::unavailable when no verdict is usable.
std::map<Dimension, DimensionAggregate> aggregate_judgments(const std::vector<JudgeResult>& results);

/// Sample Pearson r. Throws Errc::precondition for mismatched or short input
/// and Errc::undefined_correlation for zero variance.
double pearson(std::span<const double> xs, std::span<const double> ys);

/// An item to judge.
struct JudgeItem {
  std::string item_id;
  DialogueContext conversation;
  std::string response;
};

std::vector<JudgeItem> read_items(const std::filesystem::path& path);

/// `count` items drawn without replacement under `seed`, in input order. All
/// items when `count` is at least the input size.
std::vector<JudgeItem> sample_items(const std::vector<JudgeItem>& items, std::size_t count, std::uint64_t seed);

nlohmann::json to_json(const std::string& item_id, const JudgeResult& result);

std::string format_aggregate(const std::map<Dimension, DimensionAggregate>& table);

/// Human scores keyed by (item_id, dimension).
std::map<std::pair<std::string, Dimension>, double> read_human_scores(const std::filesystem::path& path);

}  // namespace selfevo::judge
