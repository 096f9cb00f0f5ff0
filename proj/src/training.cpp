#include "selfevo/training.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstring>
#include <fstream>
#include <numeric>
#include <random>
#include <sstream>

#include <spdlog/fmt/fmt.h>
#include <spdlog/spdlog.h>

#include "selfevo/embedding.hpp"
#include "selfevo/error.hpp"
#include "selfevo/text.hpp"

namespace selfevo::train {
namespace {

double softplus(double x) { return std::max(x, 0.0) + std::log1p(std::exp(-std::abs(x))); }

double sigmoid(double x) {
  if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

void check_finite(double v, const char* what) {
  if (!std::isfinite(v)) throw Error(Errc::numerical, std::string(what) + " is not finite");
}

/// Adds scale * d/dtheta log P(sequence | cls) to `grad`.
void add_logprob_gradient(const ToyPolicy& policy, std::size_t cls, std::span<const std::size_t> seq, double scale,
                          std::vector<double>& grad) {
  if (scale == 0.0) return;
  for (std::size_t i = 0; i < seq.size(); ++i) {
    const std::size_t pos = std::min(i, policy.positions() - 1);
    const auto lp = policy.log_probs(cls, pos);
    const std::size_t base = policy.offset(cls, pos);
    for (std::size_t k = 0; k < lp.size(); ++k) {
      grad[base + k] += scale * ((k == seq[i] ? 1.0 : 0.0) - std::exp(lp[k]));
    }
  }
}

std::string format_real(double v) {
  char buf[64];
  auto [end, ec] = std::to_chars(buf, buf + sizeof buf, v);
  std::string s(buf, end);
  if (s.find_first_of(".e") == std::string::npos) s += ".0";
  return s;
}

double uniform01(std::uint64_t& state) { return static_cast<double>(metrics::splitmix64(state) >> 11) * 0x1.0p-53; }

std::size_t sample_row(const std::vector<double>& log_probs, const llm::GenerationParams& params,
                       std::uint64_t& state) {
  const std::size_t n = log_probs.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return log_probs[a] > log_probs[b]; });
  if (params.temperature == 0.0) return order.front();

  std::vector<double> w(n);
  const double top = log_probs[order.front()];
  for (std::size_t k = 0; k < n; ++k) w[k] = std::exp((log_probs[k] - top) / params.temperature);
  const std::size_t keep_k = std::min<std::size_t>(n, static_cast<std::size_t>(params.top_k));
  double total = 0.0;
  for (std::size_t i = 0; i < keep_k; ++i) total += w[order[i]];
  // Nucleus: smallest prefix whose mass reaches top_p.
  std::size_t keep = 0;
  double mass = 0.0;
  while (keep < keep_k) {
    mass += w[order[keep]];
    ++keep;
    if (mass >= params.top_p * total) break;
  }
  double u = uniform01(state) * mass;
  for (std::size_t i = 0; i < keep; ++i) {
    u -= w[order[i]];
    if (u < 0.0) return order[i];
  }
  return order[keep - 1];
}

}  // namespace

// --- symbolizer --------------------------------------------------------------

std::vector<std::string> Symbolizer::to_symbols(const std::string& text) const {
  if (mode == Mode::vocabulary) return text::whitespace_tokens(text);
  if (buckets == 0) throw Error(Errc::precondition, "bucket count must be positive");
  std::vector<std::string> out;
  for (const auto& tok : text::metric_tokens(text)) out.push_back("h" + std::to_string(text::fnv1a(tok) % buckets));
  return out;
}

std::vector<std::string> Symbolizer::bucket_vocabulary() const {
  std::vector<std::string> out;
  out.reserve(buckets);
  for (std::size_t i = 0; i < buckets; ++i) out.push_back("h" + std::to_string(i));
  return out;
}

// --- policy ------------------------------------------------------------------

ToyPolicy::ToyPolicy(std::vector<std::string> vocabulary, std::size_t classes, std::size_t positions)
    : vocab_(std::move(vocabulary)), classes_(classes), positions_(positions) {
  if (vocab_.empty() || classes_ == 0 || positions_ == 0) {
    throw Error(Errc::precondition, "policy needs a vocabulary, classes and positions");
  }
  for (std::size_t i = 0; i < vocab_.size(); ++i) {
    if (!index_.emplace(vocab_[i], i).second) throw Error(Errc::vocabulary, "duplicate symbol '" + vocab_[i] + "'");
  }
  theta_.assign(classes_ * positions_ * vocab_.size(), 0.0);
}

std::size_t ToyPolicy::offset(std::size_t cls, std::size_t position) const {
  if (cls >= classes_ || position >= positions_) throw Error(Errc::range, "policy row out of range");
  return (cls * positions_ + position) * vocab_.size();
}

double& ToyPolicy::logit(std::size_t cls, std::size_t position, std::size_t symbol) {
  if (symbol >= vocab_.size()) throw Error(Errc::range, "symbol index out of range");
  return theta_[offset(cls, position) + symbol];
}

double ToyPolicy::logit(std::size_t cls, std::size_t position, std::size_t symbol) const {
  if (symbol >= vocab_.size()) throw Error(Errc::range, "symbol index out of range");
  return theta_[offset(cls, position) + symbol];
}

std::size_t ToyPolicy::classify(const DialogueContext& context) const {
  std::string_view last;
  for (const auto& u : context.utterances) {
    if (u.role == Role::seeker) last = u.text;
  }
  return static_cast<std::size_t>(text::fnv1a(last) % classes_);
}

std::size_t ToyPolicy::symbol_index(std::string_view symbol) const {
  auto it = index_.find(symbol);
  if (it == index_.end()) throw Error(Errc::vocabulary, "symbol '" + std::string(symbol) + "' is not in the vocabulary");
  return it->second;
}

std::vector<std::size_t> ToyPolicy::encode(const std::vector<std::string>& symbols) const {
  std::vector<std::size_t> out;
  out.reserve(symbols.size());
  for (const auto& s : symbols) out.push_back(symbol_index(s));
  return out;
}

std::vector<double> ToyPolicy::log_probs(std::size_t cls, std::size_t position) const {
  const std::size_t base = offset(cls, position);
  const double* row = theta_.data() + base;
  const double top = *std::max_element(row, row + vocab_.size());
  double sum = 0.0;
  for (std::size_t k = 0; k < vocab_.size(); ++k) sum += std::exp(row[k] - top);
  const double lse = top + std::log(sum);
  std::vector<double> out(vocab_.size());
  for (std::size_t k = 0; k < vocab_.size(); ++k) out[k] = row[k] - lse;
  return out;
}

double ToyPolicy::seq_logprob(std::size_t cls, std::span<const std::size_t> sequence) const {
  double total = 0.0;
  for (std::size_t i = 0; i < sequence.size(); ++i) {
    if (sequence[i] >= vocab_.size()) throw Error(Errc::vocabulary, "symbol index out of range");
    total += log_probs(cls, std::min(i, positions_ - 1))[sequence[i]];
  }
  return total;
}

double ToyPolicy::seq_logprob(const DialogueContext& context, const std::vector<std::string>& response) const {
  const auto seq = encode(response);
  return seq_logprob(classify(context), seq);
}

std::vector<std::size_t> ToyPolicy::greedy(std::size_t cls, std::size_t length) const {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < length; ++i) {
    const auto lp = log_probs(cls, std::min(i, positions_ - 1));
    out.push_back(static_cast<std::size_t>(std::max_element(lp.begin(), lp.end()) - lp.begin()));
  }
  return out;
}

std::uint64_t ToyPolicy::hash() const {
  std::uint64_t h = text::fnv1a(fmt::format("{}:{}:{}", classes_, positions_, vocab_.size()));
  for (const auto& s : vocab_) h = text::fnv1a(s + '\x1f', h);
  for (double v : theta_) {
    char bytes[sizeof(double)];
    std::memcpy(bytes, &v, sizeof v);
    h = text::fnv1a(std::string_view(bytes, sizeof bytes), h);
  }
  return h;
}

// --- losses ------------------------------------------------------------------

void TrainingConfig::validate() const {
  if (!(beta > 0.0)) throw Error(Errc::precondition, "beta must be > 0");
  if (!(gamma >= 0.0)) throw Error(Errc::precondition, "gamma must be >= 0");
  if (!(learning_rate >= 0.0)) throw Error(Errc::precondition, "learning_rate must be >= 0");
  if (!(warmup_fraction >= 0.0 && warmup_fraction <= 1.0)) {
    throw Error(Errc::precondition, "warmup_fraction must lie in [0, 1]");
  }
  if (batch_size <= 0 || grad_accum <= 0 || epochs <= 0 || early_stop_patience <= 0 || lora_rank <= 0 ||
      lora_alpha <= 0 || replay_samples <= 0) {
    throw Error(Errc::precondition, "training counts must be positive");
  }
  decoding.validate();
}

EncodedPair encode_pair(const ToyPolicy& policy, const Symbolizer& symbolizer, const synth::PreferencePair& pair) {
  EncodedPair e;
  e.cls = policy.classify(pair.context);
  e.chosen = policy.encode(symbolizer.to_symbols(pair.chosen));
  e.rejected = policy.encode(symbolizer.to_symbols(pair.rejected));
  return e;
}

namespace {

struct Terms {
  double lc, lr, lc_ref, lr_ref;
};

Terms terms(const ToyPolicy& policy, const PolicySnapshot& ref, const EncodedPair& pair) {
  return {policy.seq_logprob(pair.cls, pair.chosen), policy.seq_logprob(pair.cls, pair.rejected),
          ref.policy().seq_logprob(pair.cls, pair.chosen), ref.policy().seq_logprob(pair.cls, pair.rejected)};
}

double margin_of(const Terms& t, double beta) { return beta * ((t.lc - t.lc_ref) - (t.lr - t.lr_ref)); }

}  // namespace

double dpo_loss(const ToyPolicy& policy, const PolicySnapshot& ref, const EncodedPair& pair, double beta) {
  const double m = margin_of(terms(policy, ref, pair), beta);
  check_finite(m, "DPO margin");
  const double loss = softplus(-m);
  check_finite(loss, "DPO loss");
  return loss;
}

double sft_loss(const ToyPolicy& policy, const EncodedPair& pair) {
  const double loss = -policy.seq_logprob(pair.cls, pair.chosen);
  check_finite(loss, "SFT loss");
  return loss;
}

LossBreakdown combined_loss(const ToyPolicy& policy, const PolicySnapshot& ref, const EncodedPair& pair,
                            const TrainingConfig& config) {
  const Terms t = terms(policy, ref, pair);
  LossBreakdown b;
  b.margin = margin_of(t, config.beta);
  check_finite(b.margin, "DPO margin");
  b.dpo = softplus(-b.margin);
  b.sft = -t.lc;
  b.total = b.dpo + config.gamma * b.sft;
  check_finite(b.total, "combined loss");
  return b;
}

std::vector<double> loss_gradient(const ToyPolicy& policy, const PolicySnapshot& ref, const EncodedPair& pair,
                                  const TrainingConfig& config) {
  const double m = margin_of(terms(policy, ref, pair), config.beta);
  check_finite(m, "DPO margin");
  // dL/dm = -sigmoid(-m); dm/dtheta = beta (grad lc - grad lr).
  const double dm = -sigmoid(-m) * config.beta;
  std::vector<double> grad(policy.params().size(), 0.0);
  add_logprob_gradient(policy, pair.cls, pair.chosen, dm - config.gamma, grad);
  add_logprob_gradient(policy, pair.cls, pair.rejected, -dm, grad);
  for (double g : grad) check_finite(g, "gradient");
  return grad;
}

// --- training loop -----------------------------------------------------------

TrainResult train_iteration(const ToyPolicy& policy, const std::vector<EncodedPair>& pairs,
                            const TrainingConfig& config) {
  config.validate();
  if (pairs.empty()) throw Error(Errc::precondition, "no preference pairs to train on");

  const PolicySnapshot ref(policy);
  TrainResult result;
  result.policy = policy;
  result.reference_hash = ref.hash();

  const std::size_t held = pairs.size() / 10;
  const std::size_t n_train = pairs.size() - held;
  const std::size_t micro_per_epoch = (n_train + config.batch_size - 1) / config.batch_size;
  const std::size_t steps_per_epoch = (micro_per_epoch + config.grad_accum - 1) / config.grad_accum;
  const std::size_t total_steps = steps_per_epoch * static_cast<std::size_t>(config.epochs);
  const auto warmup = static_cast<std::size_t>(std::ceil(config.warmup_fraction * static_cast<double>(total_steps)));
  const std::size_t per_step = static_cast<std::size_t>(config.batch_size) * config.grad_accum;

  std::mt19937_64 rng(config.seed);
  std::vector<std::size_t> order(n_train);
  std::vector<double> grad(policy.params().size());

  auto heldout_loss = [&](const ToyPolicy& p) {
    double sum = 0.0;
    for (std::size_t i = n_train; i < pairs.size(); ++i) sum += combined_loss(p, ref, pairs[i], config).total;
    return sum / static_cast<double>(held);
  };

  double best = std::numeric_limits<double>::infinity();
  ToyPolicy best_policy = policy;
  int bad_epochs = 0;
  std::size_t step = 0;

  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    std::iota(order.begin(), order.end(), 0);
    std::shuffle(order.begin(), order.end(), rng);
    for (std::size_t start = 0; start < n_train; start += per_step) {
      const std::size_t end = std::min(n_train, start + per_step);
      std::fill(grad.begin(), grad.end(), 0.0);
      LogEntry entry;
      entry.step = step;
      for (std::size_t i = start; i < end; ++i) {
        const auto& pair = pairs[order[i]];
        const auto loss = combined_loss(result.policy, ref, pair, config);
        entry.loss.dpo += loss.dpo;
        entry.loss.sft += loss.sft;
        entry.loss.total += loss.total;
        entry.loss.margin += loss.margin;
        const auto g = loss_gradient(result.policy, ref, pair, config);
        for (std::size_t k = 0; k < g.size(); ++k) grad[k] += g[k];
      }
      const double count = static_cast<double>(end - start);
      entry.loss.dpo /= count;
      entry.loss.sft /= count;
      entry.loss.total /= count;
      entry.loss.margin /= count;
      entry.lr = step < warmup ? config.learning_rate * static_cast<double>(step + 1) / static_cast<double>(warmup)
                               : config.learning_rate;
      auto theta = result.policy.params();
      for (std::size_t k = 0; k < theta.size(); ++k) {
        theta[k] -= entry.lr * grad[k] / count;
        check_finite(theta[k], "parameter");
      }
      result.log.push_back(entry);
      ++step;
    }

    if (held == 0) continue;
    const double loss = heldout_loss(result.policy);
    result.heldout_losses.push_back(loss);
    if (loss < best) {
      best = loss;
      best_policy = result.policy;
      bad_epochs = 0;
    } else if (++bad_epochs >= config.early_stop_patience) {
      result.policy = best_policy;
      result.early_stopped = true;
      break;
    }
  }
  result.steps = step;
  if (!ref.intact() || ref.hash() != result.reference_hash) {
    throw Error(Errc::numerical, "reference snapshot changed during training");
  }
  return result;
}

// --- policy backend ----------------------------------------------------------

std::string PolicyBackend::complete(std::span<const llm::ChatMessage> messages, const llm::GenerationParams& params) {
  DialogueContext ctx;
  ctx.utterances = llm::from_chat(messages);
  const std::size_t cls = policy_.classify(ctx);
  std::uint64_t state = text::fnv1a(llm::message_key(messages)) ^ seed_ ^
                        (static_cast<std::uint64_t>(params.sample_index) * 0x9e3779b97f4a7c15ULL);
  std::vector<std::string> out;
  for (std::size_t i = 0; i < length_; ++i) {
    const auto lp = policy_.log_probs(cls, std::min(i, policy_.positions() - 1));
    out.push_back(policy_.vocabulary()[sample_row(lp, params, state)]);
  }
  return text::join(out);
}

double preference_margin(const ToyPolicy& policy, const std::vector<DialogueContext>& contexts,
                         const std::vector<std::string>& preferred, const std::vector<std::string>& other) {
  if (contexts.empty() || contexts.size() != preferred.size() || contexts.size() != other.size()) {
    throw Error(Errc::alignment, "contexts and preferences must be non-empty and aligned");
  }
  double sum = 0.0;
  for (std::size_t i = 0; i < contexts.size(); ++i) {
    const auto lp = policy.log_probs(policy.classify(contexts[i]), 0);
    sum += lp[policy.symbol_index(preferred[i])] - lp[policy.symbol_index(other[i])];
  }
  return sum / static_cast<double>(contexts.size());
}

// --- loop ----------------------------------------------------------------------

namespace {

void write_text(const std::filesystem::path& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(Errc::path, "cannot write " + path.string());
  out << content;
}

}  // namespace

LoopResult self_evolution_loop(const ToyPolicy& initial, const std::vector<DialogueSession>& sessions,
                               const llm::ModelHandle& refiner, const TrainingConfig& config, int iterations,
                               const LoopOptions& options) {
  if (iterations < 1) throw Error(Errc::precondition, "at least one iteration is required");
  config.validate();

  LoopResult result;
  result.policies.push_back(initial);
  for (int t = 1; t <= iterations; ++t) {
    try {
      const llm::ModelHandle generator(
          "M" + std::to_string(t - 1),
          std::make_shared<PolicyBackend>(result.policies.back(), options.response_length, options.sample_seed + t),
          options.synthesis.params);
      IterationRecord record;
      auto synth_result = synth::build_pairs(sessions, generator, refiner, t - 1, options.synthesis);
      record.report = synth_result.report;
      record.pairs = std::move(synth_result.pairs);
      spdlog::info("iteration {}: {} pairs ({} dropped)", t, record.report.pairs_emitted, record.report.dropped);
      if (record.pairs.empty()) throw Error(Errc::precondition, "synthesis produced no pairs");

      std::vector<EncodedPair> encoded;
      encoded.reserve(record.pairs.size());
      for (const auto& p : record.pairs) encoded.push_back(encode_pair(result.policies.back(), options.symbolizer, p));
      record.training = train_iteration(result.policies.back(), encoded, config);

      if (options.run_dir) {
        const auto dir = *options.run_dir / ("iter-" + std::to_string(t));
        std::filesystem::create_directories(dir);
        synth::write_pairs(dir / "pairs.jsonl", record.pairs);
        write_text(dir / "policy.params", format_params(record.training.policy));
        write_text(dir / "train.log", format_train_log(record.training.log));
        write_text(dir / "synthesis_report.json", synth::to_json(record.report).dump(2) + "\n");
      }
      result.policies.push_back(record.training.policy);
      result.iterations.push_back(std::move(record));
    } catch (const Error& e) {
      result.failure = "iteration " + std::to_string(t) + ": " + e.what();
      spdlog::error("{}", *result.failure);
      break;
    }
  }
  return result;
}

std::string emit_training_config(const TrainingConfig& config,
                                 const std::map<std::string, std::filesystem::path>& datasets) {
  config.validate();
  for (const auto& [name, path] : datasets) {
    if (!std::filesystem::exists(path)) throw Error(Errc::path, "dataset '" + name + "' not found: " + path.string());
  }
  std::ostringstream out;
  out << "lora_rank = " << config.lora_rank << '\n'
      << "lora_alpha = " << config.lora_alpha << '\n'
      << "learning_rate = " << format_real(config.learning_rate) << '\n'
      << "warmup_fraction = " << format_real(config.warmup_fraction) << '\n'
      << "batch_size = " << config.batch_size << '\n'
      << "grad_accum = " << config.grad_accum << '\n'
      << "epochs = " << config.epochs << '\n'
      << "early_stop_patience = " << config.early_stop_patience << '\n'
      << "beta = " << format_real(config.beta) << '\n'
      << "gamma = " << format_real(config.gamma) << '\n'
      << "decoding.temperature = " << format_real(config.decoding.temperature) << '\n'
      << "decoding.top_p = " << format_real(config.decoding.top_p) << '\n'
      << "decoding.top_k = " << config.decoding.top_k << '\n'
      << "decoding.repetition_penalty = " << format_real(config.decoding.repetition_penalty) << '\n'
      << "replay_samples = " << config.replay_samples << '\n';
  for (const auto& [name, path] : datasets) out << "dataset." << name << " = " << path.string() << '\n';
  return out.str();
}

std::string format_params(const ToyPolicy& policy) {
  std::map<std::string, std::string> entries;
  entries["classes"] = std::to_string(policy.classes());
  entries["positions"] = std::to_string(policy.positions());
  for (std::size_t s = 0; s < policy.vocab_size(); ++s) {
    entries[fmt::format("vocab.{:06}", s)] = policy.vocabulary()[s];
  }
  for (std::size_t c = 0; c < policy.classes(); ++c) {
    for (std::size_t p = 0; p < policy.positions(); ++p) {
      for (std::size_t s = 0; s < policy.vocab_size(); ++s) {
        entries[fmt::format("logit.{:06}.{:06}.{:06}", c, p, s)] = fmt::format("{:.17g}", policy.logit(c, p, s));
      }
    }
  }
  std::string out;
  for (const auto& [k, v] : entries) out += k + " = " + v + "\n";
  return out;
}

ToyPolicy parse_params(const std::string& document) {
  std::map<std::string, std::string> entries;
  std::istringstream in(document);
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto eq = line.find(" = ");
    if (eq == std::string::npos) throw Error(Errc::schema, "malformed parameter line: " + line);
    entries[line.substr(0, eq)] = line.substr(eq + 3);
  }
  try {
    std::vector<std::string> vocab;
    for (const auto& [k, v] : entries) {
      if (k.rfind("vocab.", 0) == 0) vocab.push_back(v);
    }
    ToyPolicy policy(vocab, std::stoul(entries.at("classes")), std::stoul(entries.at("positions")));
    for (std::size_t c = 0; c < policy.classes(); ++c) {
      for (std::size_t p = 0; p < policy.positions(); ++p) {
        for (std::size_t s = 0; s < policy.vocab_size(); ++s) {
          policy.logit(c, p, s) = std::stod(entries.at(fmt::format("logit.{:06}.{:06}.{:06}", c, p, s)));
        }
      }
    }
    return policy;
  } catch (const std::out_of_range&) {
    throw Error(Errc::schema, "parameter document is incomplete");
  } catch (const std::invalid_argument&) {
    throw Error(Errc::schema, "parameter document has a non-numeric value");
  }
}

std::string format_train_log(const std::vector<LogEntry>& log) {
  std::string out = "step\tlr\tdpo\tsft\ttotal\tmargin\n";
  for (const auto& e : log) {
    out += fmt::format("{}\t{:.17g}\t{:.17g}\t{:.17g}\t{:.17g}\t{:.17g}\n", e.step, e.lr, e.loss.dpo, e.loss.sft,
                       e.loss.total, e.loss.margin);
  }
  return out;
}

// --- synthetic task ------------------------------------------------------------

SyntheticTask make_synthetic_ab_task(std::size_t sessions, std::size_t classes, std::uint64_t seed) {
  SyntheticTask task;
  task.initial = ToyPolicy({"A", "B"}, classes, 1);
  auto preferred_for = [classes](const std::string& seeker) {
    return (text::fnv1a(seeker) % classes) % 2 == 0 ? std::string("A") : std::string("B");
  };

  std::uint64_t state = seed;
  for (std::size_t s = 0; s < sessions; ++s) {
    DialogueSession session;
    session.session_id = fmt::format("ab-{:04}", s);
    for (std::size_t k = 0; k < 7; ++k) {
      const std::string seeker = fmt::format("seeker {} turn {} note {:x}", s, k, metrics::splitmix64(state) & 0xffff);
      Utterance q{Role::seeker, seeker, std::nullopt, 2 * k};
      Utterance r{Role::supporter, preferred_for(seeker), std::nullopt, 2 * k + 1};
      session.utterances.push_back(std::move(q));
      session.utterances.push_back(std::move(r));
    }
    for (auto& ctx : corpus::extract_contexts(session, corpus::eligible_turn_indices(session))) {
      const std::string pref = preferred_for(ctx.utterances.back().text);
      task.preferred.push_back(pref);
      task.other.push_back(pref == "A" ? "B" : "A");
      task.contexts.push_back(std::move(ctx));
    }
    task.sessions.push_back(std::move(session));
  }

  task.refiner = std::make_shared<llm::ScriptedBackend>(
      [preferred_for](std::span<const llm::ChatMessage> messages,
                      const llm::GenerationParams&) -> std::optional<std::string> {
        const std::string& content = messages.back().content;
        const auto end = content.find("\n\n[Target sys's response]");
        const auto pos = content.rfind("Seeker: ", end);
        if (end == std::string::npos || pos == std::string::npos) return std::nullopt;
        const auto eol = content.find('\n', pos);
        const std::string seeker = content.substr(pos + 8, std::min(eol, end) - pos - 8);
        nlohmann::json answer = {
            {"understanding",
             {{"user_profile", "synthetic seeker"},
              {"user_emotion", "neutral"},
              {"user_personality", "consistent"},
              {"user_intention", "prefers one symbol"}}},
            {"evaluation_score", 2},
            {"feedback", "use the preferred symbol"},
            {"refined_response", preferred_for(seeker)}};
        return "```json\n" + answer.dump(2) + "\n```";
      });
  return task;
}

}  // namespace selfevo::train
