#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <shared_mutex>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "selfevo/dialogue.hpp"
#include "selfevo/judge.hpp"
#include "selfevo/llm.hpp"

namespace selfevo::arena {

enum class Mode { pointwise, pairwise };
enum class Status { active, awaiting_choice, completed };
enum class Slot { A, B };
enum class Choice { A, B, tie };

std::string_view to_string(Mode mode);
std::string_view to_string(Status status);
std::string_view to_string(Slot slot);
std::string_view to_string(Choice choice);
std::optional<Mode> parse_mode(std::string_view name);
std::optional<Slot> parse_slot(std::string_view name);
std::optional<Choice> parse_choice(std::string_view name);

inline constexpr int kPointwiseMinTurns = 8;
inline constexpr int kPairwiseMinTurns = 10;

struct SlotResponse {
  Slot slot = Slot::A;
  std::string text;
  friend bool operator==(const SlotResponse&, const SlotResponse&) = default;
};

struct TurnRecord {
  std::string user_text;
  std::vector<SlotResponse> responses;
  std::optional<Choice> choice;
  std::optional<Slot> continued_with;
  friend bool operator==(const TurnRecord&, const TurnRecord&) = default;
};

/// One 1-5 value per judge dimension, in judge::kDimensions order.
struct RatingForm {
  std::array<int, 7> values{};
  void validate() const;
  friend bool operator==(const RatingForm&, const RatingForm&) = default;
};

struct PairwiseOutcome {
  int wins_a = 0;
  int ties = 0;
  int wins_b = 0;
  friend bool operator==(const PairwiseOutcome&, const PairwiseOutcome&) = default;
};

struct EvalSession {
  std::string session_id;
  Mode mode = Mode::pointwise;
  /// models[0] sits in slot A, models[1] in slot B.
  std::vector<std::string> models;
  std::vector<TurnRecord> turns;
  Status status = Status::active;
  /// Canonical dialogue: user turns plus the continued supporter turns.
  std::vector<Utterance> history;
  std::int64_t created_at = 0;
  std::optional<RatingForm> ratings;
  std::optional<PairwiseOutcome> outcome;

  int adjudicated_turns() const;
  int completed_turns() const;
  friend bool operator==(const EvalSession&, const EvalSession&) = default;
};

struct PointwiseRow {
  std::array<double, 7> means{};
  std::size_t sessions = 0;
  friend bool operator==(const PointwiseRow&, const PointwiseRow&) = default;
};

struct Leaderboard {
  std::map<std::string, PointwiseRow> pointwise;
  std::map<std::pair<std::string, std::string>, PairwiseOutcome> pairwise;
  friend bool operator==(const Leaderboard&, const Leaderboard&) = default;
};

nlohmann::json to_json(const Leaderboard& board);
nlohmann::json to_json(const PairwiseOutcome& outcome);

/// Destination for the append-only event log. Each event is
/// {session_id, seq, event_type, payload, timestamp}.
class EventSink {
 public:
  virtual ~EventSink() = default;
  virtual void append(const nlohmann::json& event) = 0;
};

class MemoryEventSink : public EventSink {
 public:
  void append(const nlohmann::json& event) override;
  std::vector<nlohmann::json> events() const;

 private:
  mutable std::mutex mutex_;
  std::vector<nlohmann::json> events_;
};

/// One JSON line per event, flushed on every append.
class FileEventSink : public EventSink {
 public:
  explicit FileEventSink(const std::filesystem::path& path);
  void append(const nlohmann::json& event) override;

 private:
  std::mutex mutex_;
  std::ofstream out_;
};

std::vector<nlohmann::json> read_events(const std::filesystem::path& path);

using Clock = std::function<std::int64_t()>;

/// Session store for both protocols. Operations on one session are
/// serialized; different sessions proceed in parallel.
class EvalStore {
 public:
  EvalStore(std::map<std::string, llm::ModelHandle> pool, std::shared_ptr<EventSink> sink = nullptr,
            Clock clock = nullptr);

  /// Draws models uniformly without replacement and randomizes the slots.
  std::string create_session(Mode mode, std::uint64_t seed);
  TurnRecord post_user_message(const std::string& session_id, const std::string& text);
  Status record_choice(const std::string& session_id, Choice choice, std::optional<Slot> continued_with);
  Status submit_ratings(const std::string& session_id, const RatingForm& form);
  PairwiseOutcome finalize_pairwise(const std::string& session_id);

  Leaderboard aggregate_results() const;
  EvalSession snapshot(const std::string& session_id) const;
  std::vector<std::string> session_ids() const;

  /// Rater-facing view: transcript, status and turn counters, no model names.
  nlohmann::json rater_view(const std::string& session_id) const;

  /// Rebuilds sessions from an event log by re-running the state machine
  /// with the recorded responses.
  static std::unique_ptr<EvalStore> replay(const std::vector<nlohmann::json>& events);

 private:
  struct Entry {
    std::mutex mutex;
    EvalSession session;
    std::uint64_t seq = 0;
  };

  EvalStore() = default;
  std::shared_ptr<Entry> find(const std::string& session_id) const;
  void emit(Entry& entry, std::string_view type, nlohmann::json payload,
            std::optional<std::int64_t> timestamp = std::nullopt);
  std::string generate(const std::string& model, const std::vector<Utterance>& history);

  // Pure transitions shared by the live path and replay.
  static void apply_message(EvalSession& s, const std::string& text, std::vector<SlotResponse> responses);
  static void apply_choice(EvalSession& s, Choice choice, std::optional<Slot> continued_with);
  static void apply_ratings(EvalSession& s, const RatingForm& form);
  static PairwiseOutcome apply_finalize(EvalSession& s);

  std::map<std::string, llm::ModelHandle> pool_;
  std::shared_ptr<EventSink> sink_;
  Clock clock_;
  mutable std::shared_mutex sessions_mutex_;
  std::map<std::string, std::shared_ptr<Entry>> sessions_;
  std::uint64_t next_id_ = 1;
};

/// Pool file: {"models": {"<name>": "<handle spec>", ...}}.
std::map<std::string, llm::ModelHandle> read_pool(const std::filesystem::path& path);

/// HTTP front end for an EvalStore.
class ArenaServer {
 public:
  explicit ArenaServer(EvalStore& store);
  ~ArenaServer();

  ArenaServer(const ArenaServer&) = delete;
  ArenaServer& operator=(const ArenaServer&) = delete;

  /// Binds to `port` (0 picks a free one) and returns the bound port.
  int bind(const std::string& host, int port);
  /// Serves until stop() is called. Call after bind().
  void run();
  void stop();
  void wait_until_ready() const;

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

}  // namespace selfevo::arena
