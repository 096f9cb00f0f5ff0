#include "selfevo/arena.hpp"

#include <algorithm>
#include <chrono>
#include <future>
#include <random>

#include <spdlog/fmt/fmt.h>
#include <spdlog/spdlog.h>

#include "selfevo/error.hpp"
#include "selfevo/text.hpp"

namespace selfevo::arena {
namespace {

using nlohmann::json;

std::int64_t wall_clock_ms() {
  return std::chrono::duration_cast<std::chrono::milliseconds>(std::chrono::system_clock::now().time_since_epoch())
      .count();
}

json responses_json(const std::vector<SlotResponse>& responses) {
  json out = json::array();
  for (const auto& r : responses) out.push_back({{"slot", to_string(r.slot)}, {"text", r.text}});
  return out;
}

std::vector<SlotResponse> responses_from(const json& j) {
  std::vector<SlotResponse> out;
  for (const auto& r : j) {
    auto slot = parse_slot(r.at("slot").get<std::string>());
    if (!slot) throw Error(Errc::schema, "bad slot in event");
    out.push_back({*slot, r.at("text").get<std::string>()});
  }
  return out;
}

json ratings_json(const RatingForm& form) {
  json j = json::object();
  for (std::size_t i = 0; i < judge::kDimensions.size(); ++i) j[std::string(judge::to_string(judge::kDimensions[i]))] = form.values[i];
  return j;
}

RatingForm ratings_from(const json& j) {
  RatingForm f;
  for (std::size_t i = 0; i < judge::kDimensions.size(); ++i) {
    f.values[i] = j.at(std::string(judge::to_string(judge::kDimensions[i]))).get<int>();
  }
  return f;
}

}  // namespace

std::string_view to_string(Mode mode) { return mode == Mode::pointwise ? "pointwise" : "pairwise"; }

std::string_view to_string(Status status) {
  switch (status) {
    case Status::active: return "active";
    case Status::awaiting_choice: return "awaiting_choice";
    case Status::completed: return "completed";
  }
  return "active";
}

std::string_view to_string(Slot slot) { return slot == Slot::A ? "A" : "B"; }

std::string_view to_string(Choice choice) {
  switch (choice) {
    case Choice::A: return "A";
    case Choice::B: return "B";
    case Choice::tie: return "tie";
  }
  return "tie";
}

std::optional<Mode> parse_mode(std::string_view name) {
  if (name == "pointwise") return Mode::pointwise;
  if (name == "pairwise") return Mode::pairwise;
  return std::nullopt;
}

std::optional<Slot> parse_slot(std::string_view name) {
  if (name == "A") return Slot::A;
  if (name == "B") return Slot::B;
  return std::nullopt;
}

std::optional<Choice> parse_choice(std::string_view name) {
  if (name == "A") return Choice::A;
  if (name == "B") return Choice::B;
  if (name == "tie") return Choice::tie;
  return std::nullopt;
}

void RatingForm::validate() const {
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (values[i] < 1 || values[i] > 5) {
      throw Error(Errc::validation, fmt::format("rating for {} must lie in 1..5, got {}",
                                                judge::to_string(judge::kDimensions[i]), values[i]));
    }
  }
}

int EvalSession::adjudicated_turns() const {
  return static_cast<int>(std::count_if(turns.begin(), turns.end(), [](const TurnRecord& t) { return t.choice.has_value(); }));
}

int EvalSession::completed_turns() const {
  if (mode == Mode::pairwise) return adjudicated_turns();
  return static_cast<int>(turns.size());
}

json to_json(const PairwiseOutcome& o) { return {{"wins_A", o.wins_a}, {"ties", o.ties}, {"wins_B", o.wins_b}}; }

json to_json(const Leaderboard& board) {
  json pointwise = json::object();
  for (const auto& [model, row] : board.pointwise) {
    json means = json::object();
    for (std::size_t i = 0; i < judge::kDimensions.size(); ++i) {
      means[std::string(judge::to_string(judge::kDimensions[i]))] = row.means[i];
    }
    pointwise[model] = {{"sessions", row.sessions}, {"means", std::move(means)}};
  }
  json pairwise = json::array();
  for (const auto& [key, o] : board.pairwise) {
    json row = to_json(o);
    row["model_A"] = key.first;
    row["model_B"] = key.second;
    pairwise.push_back(std::move(row));
  }
  return {{"pointwise", std::move(pointwise)}, {"pairwise", std::move(pairwise)}};
}

// --- event sinks ---------------------------------------------------------------

void MemoryEventSink::append(const json& event) {
  std::lock_guard lock(mutex_);
  events_.push_back(event);
}

std::vector<json> MemoryEventSink::events() const {
  std::lock_guard lock(mutex_);
  return events_;
}

FileEventSink::FileEventSink(const std::filesystem::path& path) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  out_.open(path, std::ios::app | std::ios::binary);
  if (!out_) throw Error(Errc::path, "cannot open event log " + path.string());
}

void FileEventSink::append(const json& event) {
  std::lock_guard lock(mutex_);
  out_ << event.dump() << '\n';
  out_.flush();
}

std::vector<json> read_events(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(Errc::path, "cannot open event log " + path.string());
  std::vector<json> out;
  std::string line;
  for (std::size_t n = 1; std::getline(in, line); ++n) {
    if (text::trim(line).empty()) continue;
    try {
      out.push_back(json::parse(line));
    } catch (const json::parse_error& e) {
      throw Error(Errc::schema, fmt::format("{}:{}: {}", path.string(), n, e.what()));
    }
  }
  return out;
}

// --- store -----------------------------------------------------------------------

EvalStore::EvalStore(std::map<std::string, llm::ModelHandle> pool, std::shared_ptr<EventSink> sink, Clock clock)
    : pool_(std::move(pool)), sink_(std::move(sink)), clock_(clock ? std::move(clock) : Clock(wall_clock_ms)) {}

std::shared_ptr<EvalStore::Entry> EvalStore::find(const std::string& session_id) const {
  std::shared_lock lock(sessions_mutex_);
  auto it = sessions_.find(session_id);
  if (it == sessions_.end()) throw Error(Errc::not_found, "unknown session '" + session_id + "'");
  return it->second;
}

void EvalStore::emit(Entry& entry, std::string_view type, json payload, std::optional<std::int64_t> timestamp) {
  const std::uint64_t seq = entry.seq++;
  if (!sink_) return;
  sink_->append({{"session_id", entry.session.session_id},
                 {"seq", seq},
                 {"event_type", type},
                 {"payload", std::move(payload)},
                 {"timestamp", timestamp ? *timestamp : clock_()}});
}

std::string EvalStore::generate(const std::string& model, const std::vector<Utterance>& history) {
  auto messages = llm::render_prompt(llm::builtin_template("vanilla"), {});
  for (auto& m : llm::to_chat(history)) messages.push_back(std::move(m));
  return text::trim(pool_.at(model).complete(messages));
}

std::string EvalStore::create_session(Mode mode, std::uint64_t seed) {
  const std::size_t need = mode == Mode::pointwise ? 1 : 2;
  if (pool_.size() < need) {
    throw Error(Errc::pool, fmt::format("{} evaluation needs {} model(s), pool has {}", to_string(mode), need,
                                        pool_.size()));
  }
  std::vector<std::string> names;
  for (const auto& [name, _] : pool_) names.push_back(name);
  std::mt19937_64 rng(seed);
  std::shuffle(names.begin(), names.end(), rng);
  names.resize(need);

  auto entry = std::make_shared<Entry>();
  entry->session.mode = mode;
  entry->session.models = names;
  entry->session.created_at = clock_();
  {
    std::unique_lock lock(sessions_mutex_);
    entry->session.session_id = fmt::format("s{:06}-{:04x}", next_id_++, seed & 0xffff);
    sessions_[entry->session.session_id] = entry;
  }
  std::lock_guard lock(entry->mutex);
  emit(*entry, "session_created", {{"mode", to_string(mode)}, {"models", names}, {"seed", seed}},
       entry->session.created_at);
  return entry->session.session_id;
}

void EvalStore::apply_message(EvalSession& s, const std::string& text, std::vector<SlotResponse> responses) {
  Utterance user{Role::seeker, text, std::nullopt, s.history.size()};
  s.history.push_back(std::move(user));
  TurnRecord turn;
  turn.user_text = text;
  turn.responses = std::move(responses);
  if (s.mode == Mode::pointwise) {
    s.history.push_back({Role::supporter, turn.responses.front().text, std::nullopt, s.history.size()});
  } else {
    s.status = Status::awaiting_choice;
  }
  s.turns.push_back(std::move(turn));
}

TurnRecord EvalStore::post_user_message(const std::string& session_id, const std::string& raw_text) {
  const std::string text = text::trim(raw_text);
  auto entry = find(session_id);
  std::lock_guard lock(entry->mutex);
  EvalSession& s = entry->session;
  if (text.empty()) throw Error(Errc::validation, "message text is empty");
  if (s.status == Status::completed) throw Error(Errc::protocol, "session is completed");
  if (s.status == Status::awaiting_choice) throw Error(Errc::protocol, "a choice is pending for the previous turn");

  std::vector<Utterance> prompt_history = s.history;
  prompt_history.push_back({Role::seeker, text, std::nullopt, prompt_history.size()});
  std::vector<SlotResponse> responses;
  if (s.mode == Mode::pointwise) {
    responses.push_back({Slot::A, generate(s.models[0], prompt_history)});
  } else {
    auto b = std::async(std::launch::async, [&] { return generate(s.models[1], prompt_history); });
    std::string a = generate(s.models[0], prompt_history);
    responses.push_back({Slot::A, std::move(a)});
    responses.push_back({Slot::B, b.get()});
  }
  for (const auto& r : responses) {
    if (r.text.empty()) throw Error(Errc::backend, "model returned an empty response");
  }
  emit(*entry, "message", {{"user_text", text}, {"responses", responses_json(responses)}});
  apply_message(s, text, responses);
  return s.turns.back();
}

void EvalStore::apply_choice(EvalSession& s, Choice choice, std::optional<Slot> continued_with) {
  if (s.mode != Mode::pairwise) throw Error(Errc::protocol, "choices apply to pairwise sessions only");
  if (s.status != Status::awaiting_choice) throw Error(Errc::protocol, "no turn is awaiting a choice");
  if (choice == Choice::tie && !continued_with) throw Error(Errc::validation, "a tie needs continued_with");
  if (choice != Choice::tie) {
    const Slot winner = choice == Choice::A ? Slot::A : Slot::B;
    if (continued_with && *continued_with != winner) {
      throw Error(Errc::validation, "continued_with must equal the chosen slot");
    }
    continued_with = winner;
  }
  TurnRecord& turn = s.turns.back();
  turn.choice = choice;
  turn.continued_with = continued_with;
  const auto& text = turn.responses[*continued_with == Slot::A ? 0 : 1].text;
  s.history.push_back({Role::supporter, text, std::nullopt, s.history.size()});
  s.status = Status::active;
}

Status EvalStore::record_choice(const std::string& session_id, Choice choice, std::optional<Slot> continued_with) {
  auto entry = find(session_id);
  std::lock_guard lock(entry->mutex);
  EvalSession& s = entry->session;
  apply_choice(s, choice, continued_with);
  json payload = {{"choice", to_string(choice)}, {"continued_with", to_string(*s.turns.back().continued_with)}};
  emit(*entry, "choice", std::move(payload));
  return s.status;
}

void EvalStore::apply_ratings(EvalSession& s, const RatingForm& form) {
  if (s.mode != Mode::pointwise) throw Error(Errc::protocol, "ratings apply to pointwise sessions only");
  if (s.status == Status::completed) throw Error(Errc::protocol, "session already rated");
  const int done = s.completed_turns();
  if (done < kPointwiseMinTurns) {
    const int remaining = kPointwiseMinTurns - done;
    throw MinimumTurnsError(fmt::format("{} more turn(s) needed before rating", remaining), remaining);
  }
  form.validate();
  s.ratings = form;
  s.status = Status::completed;
}

Status EvalStore::submit_ratings(const std::string& session_id, const RatingForm& form) {
  auto entry = find(session_id);
  std::lock_guard lock(entry->mutex);
  apply_ratings(entry->session, form);
  emit(*entry, "ratings", ratings_json(form));
  return entry->session.status;
}

PairwiseOutcome EvalStore::apply_finalize(EvalSession& s) {
  if (s.mode != Mode::pairwise) throw Error(Errc::protocol, "finalize applies to pairwise sessions only");
  const int done = s.adjudicated_turns();
  if (done < kPairwiseMinTurns) {
    const int remaining = kPairwiseMinTurns - done;
    throw MinimumTurnsError(fmt::format("{} more adjudicated turn(s) needed before finalizing", remaining),
                            remaining);
  }
  if (s.status == Status::awaiting_choice) throw Error(Errc::protocol, "a choice is pending for the last turn");
  PairwiseOutcome o;
  for (const auto& t : s.turns) {
    if (!t.choice) continue;
    switch (*t.choice) {
      case Choice::A: ++o.wins_a; break;
      case Choice::B: ++o.wins_b; break;
      case Choice::tie: ++o.ties; break;
    }
  }
  s.outcome = o;
  s.status = Status::completed;
  return o;
}

PairwiseOutcome EvalStore::finalize_pairwise(const std::string& session_id) {
  auto entry = find(session_id);
  std::lock_guard lock(entry->mutex);
  EvalSession& s = entry->session;
  if (s.mode == Mode::pairwise && s.status == Status::completed && s.outcome) return *s.outcome;
  const PairwiseOutcome o = apply_finalize(s);
  emit(*entry, "finalized", to_json(o));
  return o;
}

Leaderboard EvalStore::aggregate_results() const {
  std::shared_lock lock(sessions_mutex_);
  std::vector<std::unique_lock<std::mutex>> held;
  held.reserve(sessions_.size());
  for (const auto& [_, entry] : sessions_) held.emplace_back(entry->mutex);

  Leaderboard board;
  std::map<std::string, std::array<double, 7>> sums;
  for (const auto& [_, entry] : sessions_) {
    const EvalSession& s = entry->session;
    if (s.status != Status::completed) continue;
    if (s.mode == Mode::pointwise && s.ratings) {
      auto& sum = sums[s.models[0]];
      for (std::size_t i = 0; i < sum.size(); ++i) sum[i] += s.ratings->values[i];
      ++board.pointwise[s.models[0]].sessions;
    } else if (s.mode == Mode::pairwise && s.outcome) {
      auto& o = board.pairwise[{s.models[0], s.models[1]}];
      o.wins_a += s.outcome->wins_a;
      o.ties += s.outcome->ties;
      o.wins_b += s.outcome->wins_b;
    }
  }
  for (auto& [model, row] : board.pointwise) {
    for (std::size_t i = 0; i < row.means.size(); ++i) row.means[i] = sums[model][i] / static_cast<double>(row.sessions);
  }
  return board;
}

EvalSession EvalStore::snapshot(const std::string& session_id) const {
  auto entry = find(session_id);
  std::lock_guard lock(entry->mutex);
  return entry->session;
}

std::vector<std::string> EvalStore::session_ids() const {
  std::shared_lock lock(sessions_mutex_);
  std::vector<std::string> out;
  for (const auto& [id, _] : sessions_) out.push_back(id);
  return out;
}

json EvalStore::rater_view(const std::string& session_id) const {
  const EvalSession s = snapshot(session_id);
  json turns = json::array();
  for (const auto& t : s.turns) {
    json turn = {{"user_text", t.user_text}, {"responses", responses_json(t.responses)}};
    if (t.choice) turn["choice"] = to_string(*t.choice);
    if (t.continued_with) turn["continued_with"] = to_string(*t.continued_with);
    turns.push_back(std::move(turn));
  }
  json transcript = json::array();
  for (const auto& u : s.history) transcript.push_back({{"role", to_string(u.role)}, {"text", u.text}});
  json view = {{"session_id", s.session_id},
               {"mode", to_string(s.mode)},
               {"status", to_string(s.status)},
               {"turns", std::move(turns)},
               {"transcript", std::move(transcript)},
               {"completed_turns", s.completed_turns()},
               {"required_turns", s.mode == Mode::pointwise ? kPointwiseMinTurns : kPairwiseMinTurns}};
  if (s.status == Status::awaiting_choice) view["pending"] = responses_json(s.turns.back().responses);
  if (s.outcome) view["outcome"] = to_json(*s.outcome);
  return view;
}

std::unique_ptr<EvalStore> EvalStore::replay(const std::vector<json>& events) {
  std::unique_ptr<EvalStore> owner(new EvalStore());
  EvalStore& store = *owner;
  store.clock_ = [] { return std::int64_t{0}; };
  for (const auto& e : events) {
    try {
      const std::string id = e.at("session_id").get<std::string>();
      const std::string type = e.at("event_type").get<std::string>();
      const json& p = e.at("payload");
      if (type == "session_created") {
        auto entry = std::make_shared<Entry>();
        auto mode = parse_mode(p.at("mode").get<std::string>());
        if (!mode) throw Error(Errc::schema, "bad mode");
        entry->session.session_id = id;
        entry->session.mode = *mode;
        entry->session.models = p.at("models").get<std::vector<std::string>>();
        entry->session.created_at = e.at("timestamp").get<std::int64_t>();
        store.sessions_[id] = std::move(entry);
        continue;
      }
      auto it = store.sessions_.find(id);
      if (it == store.sessions_.end()) throw Error(Errc::schema, "event for unknown session " + id);
      EvalSession& s = it->second->session;
      ++it->second->seq;
      if (type == "message") {
        apply_message(s, p.at("user_text").get<std::string>(), responses_from(p.at("responses")));
      } else if (type == "choice") {
        auto choice = parse_choice(p.at("choice").get<std::string>());
        if (!choice) throw Error(Errc::schema, "bad choice");
        std::optional<Slot> cont;
        if (p.contains("continued_with")) cont = parse_slot(p["continued_with"].get<std::string>());
        apply_choice(s, *choice, cont);
      } else if (type == "ratings") {
        apply_ratings(s, ratings_from(p));
      } else if (type == "finalized") {
        apply_finalize(s);
      } else {
        throw Error(Errc::schema, "unknown event type " + type);
      }
    } catch (const json::exception& ex) {
      throw Error(Errc::schema, std::string("malformed event: ") + ex.what());
    }
  }
  return owner;
}

std::map<std::string, llm::ModelHandle> read_pool(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(Errc::path, "cannot open pool file " + path.string());
  std::map<std::string, llm::ModelHandle> pool;
  try {
    const json j = json::parse(in);
    for (const auto& [name, spec] : j.at("models").items()) {
      std::string s = spec.get<std::string>();
      // Relative scripted paths resolve against the pool file.
      if (s.rfind("scripted:", 0) == 0) {
        std::filesystem::path p = s.substr(9);
        if (p.is_relative()) s = "scripted:" + (path.parent_path() / p).string();
      }
      pool.emplace(name, llm::make_handle(s));
    }
  } catch (const json::exception& e) {
    throw Error(Errc::schema, path.string() + ": " + e.what());
  }
  return pool;
}

}  // namespace selfevo::arena
