#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "selfevo/dialogue.hpp"
#include "selfevo/llm.hpp"
#include "selfevo/synthesis.hpp"

namespace selfevo::train {

/// Maps response text to policy symbols. `vocabulary` keeps whitespace tokens
/// as symbols (unknown tokens are a vocabulary error); `hash_buckets` maps
/// each metric token to one of `buckets` symbols named h0..h{buckets-1}.
struct Symbolizer {
  enum class Mode { vocabulary, hash_buckets };
  Mode mode = Mode::hash_buckets;
  std::size_t buckets = 256;

  std::vector<std::string> to_symbols(const std::string& text) const;
  /// Symbol list for hash mode.
  std::vector<std::string> bucket_vocabulary() const;
};

/// Categorical sequence policy: one logit row per (context class, position).
/// Positions past the table reuse the last row.
class ToyPolicy {
 public:
  ToyPolicy() = default;
  ToyPolicy(std::vector<std::string> vocabulary, std::size_t classes, std::size_t positions);

  const std::vector<std::string>& vocabulary() const { return vocab_; }
  std::size_t vocab_size() const { return vocab_.size(); }
  std::size_t classes() const { return classes_; }
  std::size_t positions() const { return positions_; }

  std::span<double> params() { return theta_; }
  std::span<const double> params() const { return theta_; }

  std::size_t offset(std::size_t cls, std::size_t position) const;
  double& logit(std::size_t cls, std::size_t position, std::size_t symbol);
  double logit(std::size_t cls, std::size_t position, std::size_t symbol) const;

  /// fnv1a of the last seeker utterance, modulo the class count.
  std::size_t classify(const DialogueContext& context) const;
  std::size_t symbol_index(std::string_view symbol) const;
  std::vector<std::size_t> encode(const std::vector<std::string>& symbols) const;

  /// log-softmax of the row for (cls, position).
  std::vector<double> log_probs(std::size_t cls, std::size_t position) const;
  double seq_logprob(std::size_t cls, std::span<const std::size_t> sequence) const;
  double seq_logprob(const DialogueContext& context, const std::vector<std::string>& response) const;
  std::vector<std::size_t> greedy(std::size_t cls, std::size_t length) const;

  /// fnv1a over the shape and the IEEE bytes of every parameter.
  std::uint64_t hash() const;

  friend bool operator==(const ToyPolicy&, const ToyPolicy&) = default;

 private:
  std::vector<std::string> vocab_;
  std::map<std::string, std::size_t, std::less<>> index_;
  std::size_t classes_ = 0;
  std::size_t positions_ = 0;
  std::vector<double> theta_;
};

/// Frozen reference policy.
class PolicySnapshot {
 public:
  explicit PolicySnapshot(const ToyPolicy& policy) : policy_(std::make_shared<const ToyPolicy>(policy)), hash_(policy.hash()) {}

  const ToyPolicy& policy() const { return *policy_; }
  std::uint64_t hash() const { return hash_; }
  /// Recomputes the parameter hash and compares it with the creation-time value.
  bool intact() const { return policy_->hash() == hash_; }

 private:
  std::shared_ptr<const ToyPolicy> policy_;
  std::uint64_t hash_;
};

struct TrainingConfig {
  double beta = 0.1;
  double gamma = 1.0;
  double learning_rate = 5e-6;
  double warmup_fraction = 0.01;
  int batch_size = 4;
  int grad_accum = 2;
  int epochs = 2;
  int early_stop_patience = 3;
  int lora_rank = 8;
  int lora_alpha = 16;
  int replay_samples = 500;
  std::uint64_t seed = 0;
  llm::GenerationParams decoding = llm::GenerationParams::pipeline_defaults();

  void validate() const;
};

struct LossBreakdown {
  double dpo = 0.0;
  double sft = 0.0;
  double total = 0.0;
  double margin = 0.0;
};

/// A preference pair in symbol space.
struct EncodedPair {
  std::size_t cls = 0;
  std::vector<std::size_t> chosen;
  std::vector<std::size_t> rejected;
};

EncodedPair encode_pair(const ToyPolicy& policy, const Symbolizer& symbolizer, const synth::PreferencePair& pair);

double dpo_loss(const ToyPolicy& policy, const PolicySnapshot& ref, const EncodedPair& pair, double beta);
double sft_loss(const ToyPolicy& policy, const EncodedPair& pair);
LossBreakdown combined_loss(const ToyPolicy& policy, const PolicySnapshot& ref, const EncodedPair& pair,
                            const TrainingConfig& config);
/// Analytic gradient of combined_loss().total, laid out like params().
std::vector<double> loss_gradient(const ToyPolicy& policy, const PolicySnapshot& ref, const EncodedPair& pair,
                                  const TrainingConfig& config);

struct LogEntry {
  std::size_t step = 0;
  double lr = 0.0;
  LossBreakdown loss;  ///< means over the pairs of the step
};

struct TrainResult {
  ToyPolicy policy;
  std::vector<LogEntry> log;
  std::vector<double> heldout_losses;  ///< one per epoch
  std::size_t steps = 0;
  bool early_stopped = false;
  std::uint64_t reference_hash = 0;
};

/// Mini-batch gradient descent on the combined loss against a snapshot of
/// `policy` taken before the first update. The last 10% of pairs are held out
/// for early stopping; the best held-out policy is returned when it stops.
TrainResult train_iteration(const ToyPolicy& policy, const std::vector<EncodedPair>& pairs,
                            const TrainingConfig& config);

/// Chat backend that answers with a sample from a toy policy. The context is
/// rebuilt from the non-system messages; sampling is seeded by the message key,
/// `seed` and the sample index.
class PolicyBackend : public llm::ChatBackend {
 public:
  PolicyBackend(ToyPolicy policy, std::size_t response_length, std::uint64_t seed = 0)
      : policy_(std::move(policy)), length_(response_length), seed_(seed) {}

  std::string complete(std::span<const llm::ChatMessage> messages, const llm::GenerationParams& params) override;
  std::string describe() const override { return "toy-policy"; }

 private:
  ToyPolicy policy_;
  std::size_t length_;
  std::uint64_t seed_;
};

/// Mean over contexts of log pi(preferred) - log pi(other) for single-symbol
/// responses.
double preference_margin(const ToyPolicy& policy, const std::vector<DialogueContext>& contexts,
                         const std::vector<std::string>& preferred, const std::vector<std::string>& other);

struct LoopOptions {
  synth::SynthesisOptions synthesis;
  Symbolizer symbolizer{Symbolizer::Mode::vocabulary, 0};
  std::size_t response_length = 1;
  std::uint64_t sample_seed = 0;
  /// When set, iteration artifacts go to <run_dir>/iter-<t>/.
  std::optional<std::filesystem::path> run_dir;
};

struct IterationRecord {
  synth::SynthesisReport report;
  std::vector<synth::PreferencePair> pairs;
  TrainResult training;
};

struct LoopResult {
  std::vector<ToyPolicy> policies;  ///< M0 .. M_t for every completed t
  std::vector<IterationRecord> iterations;
  std::optional<std::string> failure;
};

/// Iterated synthesize-then-train. Iteration t samples rejected responses
/// from M(t-1), refines them with `refiner`, and trains M(t) from M(t-1).
LoopResult self_evolution_loop(const ToyPolicy& initial, const std::vector<DialogueSession>& sessions,
                               const llm::ModelHandle& refiner, const TrainingConfig& config, int iterations,
                               const LoopOptions& options = {});

/// Flat `key = value` configuration for an external fine-tuning run. Every
/// dataset path must exist.
std::string emit_training_config(const TrainingConfig& config,
                                 const std::map<std::string, std::filesystem::path>& datasets);

/// Textual parameter table, sorted keys, 17 significant digits.
std::string format_params(const ToyPolicy& policy);
ToyPolicy parse_params(const std::string& document);

std::string format_train_log(const std::vector<LogEntry>& log);

/// Synthetic A/B preference task: vocabulary {A, B}, one position,
/// `sessions` sessions of seven exchanges. The refiner prefers A for even
/// context classes and B for odd ones.
struct SyntheticTask {
  std::vector<DialogueSession> sessions;
  std::vector<DialogueContext> contexts;  ///< every eligible context
  std::vector<std::string> preferred;     ///< per context
  std::vector<std::string> other;         ///< per context
  ToyPolicy initial;
  std::shared_ptr<llm::ScriptedBackend> refiner;
};

/// Learning rate for the synthetic task. Small enough that M1 still samples
/// the dispreferred symbol under top-p 0.8, so iteration 2 has pairs to learn
/// from.
inline constexpr double kSyntheticLearningRate = 0.2;

SyntheticTask make_synthetic_ab_task(std::size_t sessions = 48, std::size_t classes = 8, std::uint64_t seed = 0);

}  // namespace selfevo::train
