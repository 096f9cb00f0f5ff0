#include "selfevo/judge.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <random>
#include <regex>

#include <spdlog/fmt/fmt.h>
#include <spdlog/spdlog.h>

#include "selfevo/error.hpp"
#include "selfevo/text.hpp"

namespace selfevo::judge {
namespace {

using nlohmann::json;

std::optional<double> number_from(const json& value) {
  if (value.is_number()) return value.get<double>();
  if (!value.is_string()) return std::nullopt;
  static const std::regex leading_number(R"(^\s*([-+]?\d+(?:\.\d+)?))");
  std::smatch m;
  const std::string s = value.get<std::string>();
  if (std::regex_search(s, m, leading_number)) return std::stod(m[1].str());
  return std::nullopt;
}

const json* find_ci(const json& object, std::string_view key) {
  for (auto it = object.begin(); it != object.end(); ++it) {
    const std::string& k = it.key();
    if (k.size() == key.size() &&
        std::equal(k.begin(), k.end(), key.begin(), [](char a, char b) { return std::tolower(a) == std::tolower(b); })) {
      return &*it;
    }
  }
  return nullptr;
}

std::vector<std::string> split_lines(std::istream& in) {
  std::vector<std::string> out;
  std::string line;
  while (std::getline(in, line)) out.push_back(line);
  return out;
}

}  // namespace

std::string_view to_string(Dimension d) {
  switch (d) {
    case Dimension::coherence: return "coherence";
    case Dimension::understanding: return "understanding";
    case Dimension::empathy: return "empathy";
    case Dimension::engagement: return "engagement";
    case Dimension::informativeness: return "informativeness";
    case Dimension::helpfulness: return "helpfulness";
    case Dimension::overall: return "overall";
  }
  return "overall";
}

std::optional<Dimension> parse_dimension(std::string_view name) {
  for (auto d : kDimensions) {
    if (to_string(d) == name) return d;
  }
  return std::nullopt;
}

std::vector<llm::ChatMessage> render_judge_prompt(Dimension dimension, const DialogueContext& conversation,
                                                  const std::string& response) {
  if (text::trim(response).empty()) throw Error(Errc::precondition, "response to judge is empty");
  const auto& tmpl = llm::builtin_template("judge_" + std::string(to_string(dimension)));
  return llm::render_prompt(tmpl, {{"conversation", render_dialogue(conversation.utterances)}, {"response", response}});
}

ParsedJudgement parse_judgement(std::string_view text) {
  ParsedJudgement out;
  try {
    const json j = llm::parse_json_block(text);
    const json* score = find_ci(j, "score");
    const json* explanation = find_ci(j, "explanation");
    if (score) {
      out.score = number_from(*score);
      if (explanation && explanation->is_string()) out.explanation = text::trim(explanation->get<std::string>());
      if (out.score) return out;
    }
  } catch (const Error&) {
  }

  static const std::regex score_line(R"((?:^|\n)[ \t*#]*score[ \t*]*[:=][ \t*]*([-+]?\d+(?:\.\d+)?))",
                                     std::regex::icase);
  static const std::regex explanation_line(R"((?:^|\n)[ \t*#]*explanation[ \t*]*[:=][ \t*]*([^\n]*))",
                                           std::regex::icase);
  const std::string s(text);
  std::smatch m;
  if (std::regex_search(s, m, score_line)) out.score = std::stod(m[1].str());
  if (std::regex_search(s, m, explanation_line)) out.explanation = text::trim(m[1].str());
  return out;
}

JudgeResult judge_response(const llm::ModelHandle& judge_model, Dimension dimension,
                           const DialogueContext& conversation, const std::string& response,
                           const llm::GenerationParams& params, int max_attempts) {
  const auto messages = render_judge_prompt(dimension, conversation, response);
  JudgeResult result;
  result.dimension = dimension;
  std::optional<JudgeVerdict> out_of_range;
  llm::GenerationParams p = params;
  for (int attempt = 1; attempt <= max_attempts; ++attempt) {
    p.sample_index = params.sample_index + attempt - 1;
    result.attempts = attempt;
    result.last_raw = judge_model.complete(messages, p);
    const auto parsed = parse_judgement(result.last_raw);
    if (!parsed.score || !std::isfinite(*parsed.score)) continue;
    JudgeVerdict v{dimension, *parsed.score, parsed.explanation, result.last_raw, attempt, false};
    if (v.explanation.empty()) v.explanation = "(no explanation given)";
    if (v.score >= 0.0 && v.score <= 5.0) {
      result.verdict = std::move(v);
      return result;
    }
    out_of_range = std::move(v);
  }
  if (out_of_range) {
    out_of_range->score = std::clamp(out_of_range->score, 0.0, 5.0);
    out_of_range->clamped = true;
    out_of_range->attempts = result.attempts;
    result.verdict = std::move(out_of_range);
  }
  return result;
}

std::map<Dimension, DimensionAggregate> aggregate_judgments(const std::vector<JudgeResult>& results) {
  if (results.empty()) throw Error(Errc::precondition, "no verdicts to aggregate");
  std::map<Dimension, DimensionAggregate> table;
  std::size_t usable = 0;
  for (const auto& r : results) {
    auto& row = table[r.dimension];
    if (!r.verdict) {
      ++row.unavailable;
      continue;
    }
    row.mean += r.verdict->score;
    ++row.count;
    ++usable;
  }
  if (usable == 0) throw Error(Errc::unavailable, "zero usable verdicts out of " + std::to_string(results.size()));
  for (auto& [_, row] : table) {
    if (row.count > 0) row.mean /= static_cast<double>(row.count);
  }
  return table;
}

double pearson(std::span<const double> xs, std::span<const double> ys) {
  if (xs.size() != ys.size()) throw Error(Errc::precondition, "pearson needs equal-length inputs");
  if (xs.size() < 2) throw Error(Errc::precondition, "pearson needs at least two points");
  const double n = static_cast<double>(xs.size());
  const double mx = std::accumulate(xs.begin(), xs.end(), 0.0) / n;
  const double my = std::accumulate(ys.begin(), ys.end(), 0.0) / n;
  double sxx = 0.0, syy = 0.0, sxy = 0.0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    const double dx = xs[i] - mx;
    const double dy = ys[i] - my;
    sxx += dx * dx;
    syy += dy * dy;
    sxy += dx * dy;
  }
  if (sxx == 0.0 || syy == 0.0) throw Error(Errc::undefined_correlation, "correlation undefined for zero variance");
  return std::clamp(sxy / std::sqrt(sxx * syy), -1.0, 1.0);
}

std::vector<JudgeItem> read_items(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(Errc::path, "cannot open " + path.string());
  std::vector<JudgeItem> items;
  const auto lines = split_lines(in);
  for (std::size_t i = 0; i < lines.size(); ++i) {
    if (text::trim(lines[i]).empty()) continue;
    try {
      const json j = json::parse(lines[i]);
      JudgeItem item;
      item.item_id = j.contains("item_id") ? j["item_id"].get<std::string>() : std::to_string(i + 1);
      item.conversation.session_id = item.item_id;
      const json& conv = j.at("conversation");
      for (const auto& u : conv) {
        const std::string role_name = u.contains("role") ? u["role"].get<std::string>() : u.at("speaker").get<std::string>();
        auto role = parse_role(role_name);
        if (!role) throw Error(Errc::schema, "unknown role '" + role_name + "'");
        Utterance utt;
        utt.role = *role;
        utt.text = u.contains("text") ? u["text"].get<std::string>() : u.at("content").get<std::string>();
        utt.turn_index = item.conversation.utterances.size();
        item.conversation.utterances.push_back(std::move(utt));
      }
      item.conversation.turn = static_cast<std::size_t>(std::count_if(
          item.conversation.utterances.begin(), item.conversation.utterances.end(),
          [](const Utterance& u) { return u.role == Role::seeker; }));
      item.response = j.at("response").get<std::string>();
      items.push_back(std::move(item));
    } catch (const json::exception& e) {
      throw Error(Errc::schema, fmt::format("{}:{}: {}", path.string(), i + 1, e.what()));
    } catch (const Error& e) {
      throw Error(e.code(), fmt::format("{}:{}: {}", path.string(), i + 1, e.what()));
    }
  }
  return items;
}

std::vector<JudgeItem> sample_items(const std::vector<JudgeItem>& items, std::size_t count, std::uint64_t seed) {
  if (count >= items.size()) return items;
  std::vector<std::size_t> idx(items.size());
  std::iota(idx.begin(), idx.end(), 0);
  std::mt19937_64 rng(seed);
  std::shuffle(idx.begin(), idx.end(), rng);
  idx.resize(count);
  std::sort(idx.begin(), idx.end());
  std::vector<JudgeItem> out;
  for (auto i : idx) out.push_back(items[i]);
  return out;
}

json to_json(const std::string& item_id, const JudgeResult& r) {
  json j = {{"item_id", item_id},
            {"dimension", to_string(r.dimension)},
            {"attempts", r.attempts},
            {"available", r.verdict.has_value()}};
  if (r.verdict) {
    j["score"] = r.verdict->score;
    j["explanation"] = r.verdict->explanation;
    j["clamped"] = r.verdict->clamped;
    j["raw"] = r.verdict->raw;
  } else {
    j["raw"] = r.last_raw;
  }
  return j;
}

std::string format_aggregate(const std::map<Dimension, DimensionAggregate>& table) {
  std::string out;
  for (auto d : kDimensions) {
    auto it = table.find(d);
    if (it == table.end()) continue;
    const auto& row = it->second;
    out += row.count ? fmt::format("{} = {:.2f}\n", to_string(d), row.mean) : fmt::format("{} = absent\n", to_string(d));
    out += fmt::format("{}.count = {}\n", to_string(d), row.count);
    out += fmt::format("{}.unavailable = {}\n", to_string(d), row.unavailable);
  }
  return out;
}

std::map<std::pair<std::string, Dimension>, double> read_human_scores(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(Errc::path, "cannot open " + path.string());
  std::map<std::pair<std::string, Dimension>, double> out;
  const auto lines = split_lines(in);
  for (std::size_t i = 0; i < lines.size(); ++i) {
    if (text::trim(lines[i]).empty()) continue;
    try {
      const json j = json::parse(lines[i]);
      auto dim = parse_dimension(j.at("dimension").get<std::string>());
      if (!dim) throw Error(Errc::schema, "unknown dimension");
      out[{j.at("item_id").get<std::string>(), *dim}] = j.at("score").get<double>();
    } catch (const json::exception& e) {
      throw Error(Errc::schema, fmt::format("{}:{}: {}", path.string(), i + 1, e.what()));
    }
  }
  return out;
}

}  // namespace selfevo::judge
