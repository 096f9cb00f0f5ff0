#include "selfevo/corpus.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <random>
#include <sstream>

#include <spdlog/spdlog.h>

#include "selfevo/error.hpp"
#include "selfevo/text.hpp"

namespace selfevo::corpus {
namespace {

using nlohmann::json;

const json* find_field(const json& obj, std::initializer_list<const char*> names) {
  for (const char* name : names) {
    auto it = obj.find(name);
    if (it != obj.end()) return &*it;
  }
  return nullptr;
}

std::string schema_at(std::size_t index, const std::string& what) {
  return "utterance " + std::to_string(index) + ": " + what;
}

}  // namespace

DialogueSession parse_session(const json& record) {
  if (!record.is_object()) throw Error(Errc::schema, "record is not an object");

  DialogueSession session;
  if (auto* id = find_field(record, {"session_id", "id"})) {
    session.session_id = id->is_string() ? id->get<std::string>() : id->dump();
  }
  if (auto* src = find_field(record, {"source"})) {
    if (!src->is_string()) throw Error(Errc::schema, "source must be a string");
    auto parsed = parse_source(src->get<std::string>());
    if (!parsed) throw Error(Errc::schema, "unknown source '" + src->get<std::string>() + "'");
    session.source = *parsed;
  }
  for (const char* key : {"situation", "problem_type", "emotion_type", "experience_type"}) {
    auto it = record.find(key);
    if (it != record.end() && it->is_string()) session.metadata[key] = it->get<std::string>();
  }
  if (auto it = record.find("metadata"); it != record.end() && it->is_object()) {
    for (const auto& [k, v] : it->items()) {
      session.metadata[k] = v.is_string() ? v.get<std::string>() : v.dump();
    }
  }

  const json* dialog = find_field(record, {"dialog", "utterances"});
  if (dialog == nullptr || !dialog->is_array()) {
    throw Error(Errc::schema, "record has no dialog array");
  }
  if (dialog->empty()) throw Error(Errc::empty_session, "session '" + session.session_id + "' has no utterances");

  for (std::size_t i = 0; i < dialog->size(); ++i) {
    const json& u = (*dialog)[i];
    if (!u.is_object()) throw Error(Errc::schema, schema_at(i, "not an object"));
    const json* role = find_field(u, {"role", "speaker"});
    if (role == nullptr || !role->is_string()) throw Error(Errc::schema, schema_at(i, "missing role"));
    auto parsed_role = parse_role(role->get<std::string>());
    if (!parsed_role) {
      throw Error(Errc::schema, schema_at(i, "unknown role '" + role->get<std::string>() + "'"));
    }
    const json* content = find_field(u, {"text", "content"});
    if (content == nullptr || !content->is_string()) throw Error(Errc::schema, schema_at(i, "missing text"));

    Utterance utt;
    utt.role = *parsed_role;
    utt.text = content->get<std::string>();
    utt.turn_index = i;

    const json* strategy = find_field(u, {"strategy"});
    if (strategy == nullptr) {
      if (auto ann = u.find("annotation"); ann != u.end() && ann->is_object()) {
        strategy = find_field(*ann, {"strategy"});
      }
    }
    if (strategy != nullptr && !strategy->is_null() && utt.role == Role::supporter) {
      if (!strategy->is_string()) throw Error(Errc::schema, schema_at(i, "strategy must be a string"));
      auto parsed = parse_strategy(strategy->get<std::string>());
      if (!parsed) {
        throw Error(Errc::schema, schema_at(i, "unknown strategy '" + strategy->get<std::string>() + "'"));
      }
      utt.strategy = *parsed;
    }
    session.utterances.push_back(std::move(utt));
  }
  return session;
}

json to_json(const DialogueSession& session) {
  json dialog = json::array();
  for (const auto& u : session.utterances) {
    json entry = {{"role", to_string(u.role)}, {"text", u.text}};
    if (u.strategy) entry["strategy"] = to_string(*u.strategy);
    dialog.push_back(std::move(entry));
  }
  json record = {{"session_id", session.session_id}, {"source", to_string(session.source)}};
  if (!session.metadata.empty()) record["metadata"] = session.metadata;
  record["dialog"] = std::move(dialog);
  return record;
}

DialogueSession normalize_session(const DialogueSession& session, NormalizeReport* report) {
  if (session.utterances.empty()) {
    throw Error(Errc::empty_session, "session '" + session.session_id + "' has no utterances");
  }
  NormalizeReport local;

  std::vector<Utterance> cleaned;
  cleaned.reserve(session.utterances.size());
  for (const auto& u : session.utterances) {
    Utterance c = u;
    c.text = text::trim(text::nfc(u.text));
    if (c.text.empty()) {
      ++local.dropped_empty_utterances;
      continue;
    }
    if (c.role == Role::seeker) c.strategy.reset();
    cleaned.push_back(std::move(c));
  }

  auto first_seeker = std::find_if(cleaned.begin(), cleaned.end(),
                                   [](const Utterance& u) { return u.role == Role::seeker; });
  if (first_seeker == cleaned.end()) {
    throw Error(Errc::unnormalizable_session,
                "session '" + session.session_id + "' contains no seeker utterance");
  }
  for (auto it = cleaned.begin(); it != first_seeker; ++it) {
    ++local.dropped_leading_utterances;
    local.dropped_leading_tokens += text::token_length(it->text);
  }

  DialogueSession out;
  out.session_id = session.session_id;
  out.source = session.source;
  out.metadata = session.metadata;
  for (auto it = first_seeker; it != cleaned.end(); ++it) {
    if (!out.utterances.empty() && out.utterances.back().role == it->role) {
      Utterance& last = out.utterances.back();
      last.text += ' ';
      last.text += it->text;
      if (!last.strategy) last.strategy = it->strategy;
      ++local.merged_utterances;
    } else {
      out.utterances.push_back(*it);
    }
  }
  for (std::size_t i = 0; i < out.utterances.size(); ++i) out.utterances[i].turn_index = i;

  if (local.dropped_leading_utterances > 0) {
    spdlog::debug("session {}: dropped {} leading supporter utterance(s), {} token(s)", session.session_id,
                  local.dropped_leading_utterances, local.dropped_leading_tokens);
  }
  if (report != nullptr) *report = local;
  return out;
}

std::size_t exchange_count(const DialogueSession& session) {
  return static_cast<std::size_t>(std::count_if(session.utterances.begin(), session.utterances.end(),
                                                [](const Utterance& u) { return u.role == Role::seeker; }));
}

std::set<std::size_t> eligible_turn_indices(const DialogueSession& session, TurnUnit unit) {
  std::set<std::size_t> out;
  const std::size_t exchanges = exchange_count(session);
  if (unit == TurnUnit::exchange) {
    if (exchanges <= 3) return out;
    for (std::size_t k = 1; k + 2 < exchanges; ++k) out.insert(k);
    return out;
  }
  // Utterance unit: drop exchanges whose seeker utterance is the first
  // utterance or one of the last two.
  const std::size_t n = session.utterances.size();
  for (std::size_t k = 0; k < exchanges; ++k) {
    const std::size_t pos = 2 * k;
    if (pos == 0 || pos + 2 >= n) continue;
    out.insert(k);
  }
  return out;
}

std::vector<DialogueContext> extract_contexts(const DialogueSession& session,
                                              const std::set<std::size_t>& indices) {
  const std::size_t exchanges = exchange_count(session);
  std::vector<DialogueContext> out;
  out.reserve(indices.size());
  for (std::size_t k : indices) {
    if (k >= exchanges) {
      throw Error(Errc::range, "exchange index " + std::to_string(k) + " out of range for session '" +
                                   session.session_id + "' with " + std::to_string(exchanges) + " exchanges");
    }
    const std::size_t end = 2 * k + 1;
    if (end > session.utterances.size() || session.utterances[end - 1].role != Role::seeker) {
      throw Error(Errc::precondition, "session '" + session.session_id + "' is not normalized");
    }
    DialogueContext ctx;
    ctx.session_id = session.session_id;
    ctx.turn = k + 1;
    ctx.utterances.assign(session.utterances.begin(), session.utterances.begin() + static_cast<std::ptrdiff_t>(end));
    out.push_back(std::move(ctx));
  }
  return out;
}

std::optional<std::string> golden_response(const DialogueSession& session, std::size_t index) {
  const std::size_t pos = 2 * index + 1;
  if (pos >= session.utterances.size() || session.utterances[pos].role != Role::supporter) return std::nullopt;
  return session.utterances[pos].text;
}

CorpusStats compute_stats(const std::vector<DialogueSession>& sessions) {
  if (sessions.empty()) throw Error(Errc::empty_corpus, "cannot compute statistics of an empty corpus");
  std::size_t utterances = 0;
  std::size_t tokens = 0;
  std::size_t seeker_utts = 0;
  std::size_t seeker_tokens = 0;
  std::size_t supporter_utts = 0;
  std::size_t supporter_tokens = 0;
  for (const auto& s : sessions) {
    for (const auto& u : s.utterances) {
      const std::size_t n = text::token_length(u.text);
      ++utterances;
      tokens += n;
      if (u.role == Role::seeker) {
        ++seeker_utts;
        seeker_tokens += n;
      } else {
        ++supporter_utts;
        supporter_tokens += n;
      }
    }
  }
  auto ratio = [](std::size_t num, std::size_t den) {
    return den == 0 ? 0.0 : static_cast<double>(num) / static_cast<double>(den);
  };
  CorpusStats stats;
  stats.session_count = sessions.size();
  stats.avg_session_len = ratio(utterances, sessions.size());
  stats.avg_utter_len = ratio(tokens, utterances);
  stats.avg_seeker_utter_len = ratio(seeker_tokens, seeker_utts);
  stats.avg_supporter_utter_len = ratio(supporter_tokens, supporter_utts);
  return stats;
}

std::string format_stats(const CorpusStats& stats) {
  std::ostringstream out;
  out << std::fixed << std::setprecision(2);
  out << "# Session = " << stats.session_count << '\n';
  out << "Avg Session Len = " << stats.avg_session_len << '\n';
  out << "Avg Utter. Len = " << stats.avg_utter_len << '\n';
  out << "Avg Seeker Utter. Len = " << stats.avg_seeker_utter_len << '\n';
  out << "Avg Supporter Utter. Len = " << stats.avg_supporter_utter_len << '\n';
  return out.str();
}

std::pair<std::vector<DialogueSession>, std::vector<DialogueSession>> split_corpus(
    const std::vector<DialogueSession>& sessions, double ratio, std::uint64_t seed) {
  if (!(ratio > 0.0 && ratio < 1.0)) {
    throw Error(Errc::precondition, "split ratio must lie in (0, 1)");
  }
  if (sessions.empty()) throw Error(Errc::empty_corpus, "cannot split an empty corpus");

  std::vector<std::size_t> order(sessions.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::mt19937_64 rng(seed);
  std::shuffle(order.begin(), order.end(), rng);

  auto n_train = static_cast<std::size_t>(std::llround(ratio * static_cast<double>(sessions.size())));
  // Both sides stay non-empty whenever there are two sessions to share.
  if (sessions.size() >= 2) n_train = std::clamp<std::size_t>(n_train, 1, sessions.size() - 1);
  std::pair<std::vector<DialogueSession>, std::vector<DialogueSession>> out;
  for (std::size_t i = 0; i < order.size(); ++i) {
    (i < n_train ? out.first : out.second).push_back(sessions[order[i]]);
  }
  return out;
}

std::vector<DialogueSession> read_corpus(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(Errc::path, "cannot open corpus file " + path.string());
  std::stringstream buffer;
  buffer << in.rdbuf();
  const std::string content = buffer.str();

  std::vector<DialogueSession> sessions;
  const auto first = content.find_first_not_of(" \t\r\n");
  if (first != std::string::npos && content[first] == '[') {
    json doc;
    try {
      doc = json::parse(content);
    } catch (const json::parse_error& e) {
      throw Error(Errc::parse, path.string() + ": " + e.what());
    }
    for (std::size_t i = 0; i < doc.size(); ++i) {
      try {
        DialogueSession s = parse_session(doc[i]);
        if (s.session_id.empty()) s.session_id = "esconv-" + std::to_string(i);
        if (!doc[i].contains("source")) s.source = Source::esconv;
        sessions.push_back(std::move(s));
      } catch (const Error& e) {
        throw Error(e.code(), path.string() + ": record " + std::to_string(i + 1) + ": " + e.what());
      }
    }
    return sessions;
  }

  std::istringstream lines(content);
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(lines, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      DialogueSession s = parse_session(json::parse(line));
      if (s.session_id.empty()) s.session_id = path.stem().string() + "-" + std::to_string(line_no);
      sessions.push_back(std::move(s));
    } catch (const json::parse_error& e) {
      throw Error(Errc::parse, path.string() + ": line " + std::to_string(line_no) + ": " + e.what());
    } catch (const Error& e) {
      throw Error(e.code(), path.string() + ": line " + std::to_string(line_no) + ": " + e.what());
    }
  }
  return sessions;
}

void write_corpus(const std::filesystem::path& path, const std::vector<DialogueSession>& sessions) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(Errc::path, "cannot write " + path.string());
  for (const auto& s : sessions) out << to_json(s).dump() << '\n';
}

}  // namespace selfevo::corpus
