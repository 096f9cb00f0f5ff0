#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "selfevo/corpus.hpp"
#include "selfevo/dialogue.hpp"
#include "selfevo/llm.hpp"

namespace selfevo::synth {

/// The `understanding` object of the refinement output.
struct ReflectionRecord {
  std::string user_profile;
  std::string user_emotion;
  std::string user_personality;
  std::string user_intention;
  std::size_t turn = 0;

  friend bool operator==(const ReflectionRecord&, const ReflectionRecord&) = default;
};

struct RefinementRecord {
  ReflectionRecord understanding;
  int evaluation_score = 0;
  std::string feedback;
  std::string refined_response;
};

enum class Provenance { self_refined, golden_substitution };

std::string_view to_string(Provenance provenance);
std::optional<Provenance> parse_provenance(std::string_view name);

struct PreferencePair {
  DialogueContext context;
  std::string rejected;
  std::string chosen;
  /// The dataset's supporter reply at this turn; kept so the length bound can
  /// be re-checked from the pair file alone.
  std::string golden;
  std::optional<ReflectionRecord> reflection;
  int iteration = 0;
  Provenance chosen_provenance = Provenance::self_refined;
  std::optional<std::string> feedback;
  std::optional<int> evaluation_score;

  friend bool operator==(const PreferencePair&, const PreferencePair&) = default;
};

struct SynthesisReport {
  std::size_t attempted = 0;
  std::size_t pairs_emitted = 0;
  std::size_t parse_fallbacks = 0;
  std::size_t length_substitutions = 0;
  std::size_t greeting_skips = 0;
  std::size_t dropped = 0;

  bool reconciles() const { return pairs_emitted + dropped == attempted; }
};

/// How reflection and refinement are issued. `bundled` sends one refinement request
/// whose JSON carries both the understanding and the refined response;
/// `two_stage` calls reflect() first and feeds its record to refinement.
enum class SynthesisMode { bundled, two_stage };

struct SynthesisOptions {
  llm::GenerationParams params = llm::GenerationParams::pipeline_defaults();
  SynthesisMode mode = SynthesisMode::bundled;
  /// Template used for the rejected response: vanilla, with_strategy or
  /// with_self_reflection.
  std::string rejected_template = "vanilla";
  int max_attempts = 3;
  /// In two-stage mode, refine without a scaffold when reflection fails
  /// instead of falling back to the golden response.
  bool allow_unscaffolded = false;
  corpus::TurnUnit turn_unit = corpus::TurnUnit::exchange;
  std::size_t jobs = 1;
};

/// The model's direct answer to the bare context.
std::string generate_rejected(const llm::ModelHandle& model, const DialogueContext& context,
                              const llm::GenerationParams& params, const std::string& template_name = "vanilla");

/// Validates an `understanding` object. Throws Errc::schema when a field is
/// missing, not a string, or empty.
ReflectionRecord parse_reflection(const nlohmann::json& understanding, std::size_t turn);

/// Parses a full refinement answer. Throws Errc::parse or Errc::schema.
RefinementRecord parse_refinement(std::string_view text, std::size_t turn);

/// Summarizes the seeker's profile, emotion, personality and intention.
/// Returns nullopt after `max_attempts` failed parses.
std::optional<ReflectionRecord> reflect(const llm::ModelHandle& model, const DialogueContext& context,
                                        const llm::GenerationParams& params, int max_attempts = 3);

/// Rewrites `rejected`. With a reflection record the guided template is used; without one
/// the bundled refinement template is. Returns nullopt after `max_attempts`
/// failed parses.
std::optional<RefinementRecord> refine(const llm::ModelHandle& model, const DialogueContext& context,
                                       const ReflectionRecord* reflection, const std::string& rejected,
                                       const llm::GenerationParams& params, int max_attempts = 3);

/// Golden substitution when `chosen` has strictly more than twice the
/// whitespace tokens of `rejected`.
std::pair<std::string, Provenance> length_normalize(const std::string& chosen, const std::string& rejected,
                                                    const std::string& golden);

/// True when `pair` satisfies every PreferencePair invariant.
bool satisfies_invariants(const PreferencePair& pair);

struct SynthesisResult {
  std::vector<PreferencePair> pairs;
  SynthesisReport report;
};

/// Generates, refines and filters on every eligible context of `sessions`.
/// `generator` produces rejected responses; `refiner` reflects and refines.
SynthesisResult build_pairs(const std::vector<DialogueSession>& sessions, const llm::ModelHandle& generator,
                            const llm::ModelHandle& refiner, int iteration, const SynthesisOptions& options = {});

inline SynthesisResult build_pairs(const std::vector<DialogueSession>& sessions, const llm::ModelHandle& model,
                                   int iteration, const SynthesisOptions& options = {}) {
  return build_pairs(sessions, model, model, iteration, options);
}

nlohmann::json to_json(const PreferencePair& pair);
PreferencePair pair_from_json(const nlohmann::json& record);
nlohmann::json to_json(const SynthesisReport& report);

void write_pairs(const std::filesystem::path& path, const std::vector<PreferencePair>& pairs);
std::vector<PreferencePair> read_pairs(const std::filesystem::path& path);

}  // namespace selfevo::synth
