#include <gmock/gmock.h>
#include <gtest/gtest.h>

#include <cmath>
#include <numbers>

#include "gradcheck.hpp"
#include "selfevo/error.hpp"
#include "selfevo/text.hpp"
#include "selfevo/training.hpp"
#include "test_util.hpp"

using namespace selfevo;
using namespace selfevo::train;
using selfevo::testing::Gen;

namespace {

const double kLn2 = std::numbers::ln2;

Errc code_of(const std::function<void()>& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  ADD_FAILURE() << "no error thrown";
  return Errc::schema;
}

ToyPolicy uniform4(std::size_t positions = 3) { return ToyPolicy({"a", "b", "c", "d"}, 1, positions); }

DialogueContext any_context() {
  DialogueContext c;
  c.session_id = "x";
  c.utterances = {{Role::seeker, "hello", std::nullopt, 0}};
  return c;
}

/// Pairs where chosen = "A" and rejected = "B" under one context.
std::vector<EncodedPair> ab_pairs(const ToyPolicy& p, std::size_t n) {
  return std::vector<EncodedPair>(n, EncodedPair{0, {p.symbol_index("A")}, {p.symbol_index("B")}});
}

double ab_margin(const ToyPolicy& p) {
  const auto lp = p.log_probs(0, 0);
  return lp[p.symbol_index("A")] - lp[p.symbol_index("B")];
}

TrainingConfig toy_config(double lr = 0.5) {
  TrainingConfig c;
  c.learning_rate = lr;
  c.batch_size = 2;
  c.grad_accum = 1;
  c.epochs = 3;
  return c;
}

}  // namespace

TEST(SeqLogprob, UniformClosedForm) {
  const auto p = uniform4();
  EXPECT_NEAR(p.seq_logprob(any_context(), {"a", "b"}), -2.772588722239781, 1e-12);
}

TEST(SeqLogprob, DominantLogitIsNearZero) {
  auto p = uniform4(1);
  p.logit(0, 0, 2) = 1e3;
  EXPECT_NEAR(p.seq_logprob(any_context(), {"c"}), 0.0, 1e-12);
  EXPECT_LE(p.seq_logprob(any_context(), {"a"}), 0.0);
}

TEST(SeqLogprob, UnknownSymbol) {
  const auto p = uniform4();
  EXPECT_EQ(code_of([&] { p.seq_logprob(any_context(), {"zzz"}); }), Errc::vocabulary);
}

TEST(SeqLogprob, PositionsPastTableReuseLastRow) {
  auto p = uniform4(2);
  p.logit(0, 1, 0) = 2.0;
  const std::vector<std::size_t> seq = {0, 0, 0};
  EXPECT_NEAR(p.seq_logprob(0, seq), p.log_probs(0, 0)[0] + 2 * p.log_probs(0, 1)[0], 1e-12);
}

TEST(SeqLogprob, SoftmaxRowsNormalize) {
  std::mt19937_64 rng(3);
  for (int i = 0; i < 50; ++i) {
    const auto g = selfevo::testing::random_instance(rng);
    for (std::size_t c = 0; c < g.policy.classes(); ++c) {
      for (std::size_t k = 0; k < g.policy.positions(); ++k) {
        double s = 0.0;
        for (double lp : g.policy.log_probs(c, k)) s += std::exp(lp);
        ASSERT_NEAR(s, 1.0, 1e-12);
      }
    }
  }
}

TEST(DpoLoss, ZeroMarginIsLn2) {
  const auto p = uniform4();
  const PolicySnapshot ref(p);
  const EncodedPair pair{0, {0, 1}, {2}};
  EXPECT_NEAR(dpo_loss(p, ref, pair, 0.1), kLn2, 1e-15);
}

TEST(DpoLoss, BetaZeroIsLn2) {
  std::mt19937_64 rng(1);
  const auto g = selfevo::testing::random_instance(rng);
  EXPECT_NEAR(dpo_loss(g.policy, PolicySnapshot(g.reference), g.pair, 0.0), kLn2, 1e-15);
}

TEST(DpoLoss, HandComputedMargin) {
  // Reference logits (0, 0, 2); policy raises the chosen logit by one and
  // moves the third so the log-partition is unchanged: the chosen
  // log-ratio is 1 and the rejected one is 0.
  ToyPolicy ref({"a", "b", "c"}, 1, 1);
  ref.logit(0, 0, 2) = 2.0;
  ToyPolicy pol = ref;
  pol.logit(0, 0, 0) = 1.0;
  pol.logit(0, 0, 2) = std::log(1.0 + std::exp(2.0) - std::exp(1.0));
  const EncodedPair pair{0, {0}, {1}};
  const PolicySnapshot snap(ref);
  EXPECT_NEAR(pol.seq_logprob(0, pair.chosen) - ref.seq_logprob(0, pair.chosen), 1.0, 1e-12);
  EXPECT_NEAR(pol.seq_logprob(0, pair.rejected) - ref.seq_logprob(0, pair.rejected), 0.0, 1e-12);
  EXPECT_NEAR(dpo_loss(pol, snap, pair, 0.1), 0.644396660073571, 1e-12);
}

TEST(DpoLoss, PropertyStrictlyDecreasingInMargin) {
  // Two-symbol single row: the margin is a strictly increasing function of
  // the chosen logit.
  ToyPolicy ref({"a", "b"}, 1, 1);
  const PolicySnapshot snap(ref);
  const EncodedPair pair{0, {0}, {1}};
  Gen gen(8);
  std::vector<double> xs;
  for (int i = 0; i < 200; ++i) xs.push_back(gen.real(-30.0, 30.0));
  std::sort(xs.begin(), xs.end());
  double prev = std::numeric_limits<double>::infinity();
  for (double x : xs) {
    ToyPolicy p = ref;
    p.logit(0, 0, 0) = x;
    const double l = dpo_loss(p, snap, pair, 1.0);
    ASSERT_GT(l, 0.0);
    ASSERT_LT(l, prev);
    prev = l;
  }
}

TEST(SftLoss, ClosedForms) {
  const auto p = uniform4();
  EXPECT_NEAR(sft_loss(p, {0, {0, 1, 2}, {3}}), 4.1588830833596715, 1e-12);
  auto q = uniform4(1);
  q.logit(0, 0, 1) = 1e3;
  EXPECT_NEAR(sft_loss(q, {0, {1}, {0}}), 0.0, 1e-12);
}

TEST(SftLoss, OovChosenIsVocabularyError) {
  const auto p = uniform4();
  Symbolizer vocab{Symbolizer::Mode::vocabulary, 0};
  synth::PreferencePair pair;
  pair.context = any_context();
  pair.chosen = "a oops";
  pair.rejected = "b";
  EXPECT_EQ(code_of([&] { encode_pair(p, vocab, pair); }), Errc::vocabulary);
}

TEST(CombinedLoss, UniformClosedForm) {
  const auto p = uniform4();
  const auto b = combined_loss(p, PolicySnapshot(p), {0, {0}, {1}}, TrainingConfig{});
  EXPECT_NEAR(b.dpo, kLn2, 1e-12);
  EXPECT_NEAR(b.sft, std::log(4.0), 1e-12);
  EXPECT_NEAR(b.total, 2.0794415416798357, 1e-12);
  EXPECT_EQ(b.margin, 0.0);
}

TEST(CombinedLoss, GammaZeroIsDpo) {
  std::mt19937_64 rng(5);
  const auto g = selfevo::testing::random_instance(rng);
  TrainingConfig c;
  c.gamma = 0.0;
  const auto b = combined_loss(g.policy, PolicySnapshot(g.reference), g.pair, c);
  EXPECT_EQ(b.total, b.dpo);
}

TEST(CombinedLoss, Defaults) {
  const TrainingConfig c;
  EXPECT_EQ(c.beta, 0.1);
  EXPECT_EQ(c.gamma, 1.0);
}

TEST(CombinedLoss, PropertyTotalIsDpoPlusGammaSft) {
  std::mt19937_64 rng(6);
  Gen gen(6);
  for (int i = 0; i < 200; ++i) {
    const auto g = selfevo::testing::random_instance(rng);
    TrainingConfig c;
    c.beta = gen.real(0.01, 2.0);
    c.gamma = gen.real(0.0, 3.0);
    const auto b = combined_loss(g.policy, PolicySnapshot(g.reference), g.pair, c);
    ASSERT_NEAR(b.total, b.dpo + c.gamma * b.sft, 1e-12);
    ASSERT_NEAR(b.dpo, dpo_loss(g.policy, PolicySnapshot(g.reference), g.pair, c.beta), 1e-12);
  }
}

TEST(Gradient, AtReferenceIsHalfBetaLogRatioGradient) {
  std::mt19937_64 rng(7);
  for (int i = 0; i < 20; ++i) {
    auto g = selfevo::testing::random_instance(rng);
    TrainingConfig c;
    c.gamma = 0.0;
    const auto grad = loss_gradient(g.policy, PolicySnapshot(g.policy), g.pair, c);
    // Central differences of log pi(chosen) - log pi(rejected).
    ToyPolicy probe = g.policy;
    for (std::size_t k = 0; k < grad.size(); ++k) {
      const double saved = probe.params()[k];
      auto diff = [&](double v) {
        probe.params()[k] = v;
        return probe.seq_logprob(g.pair.cls, g.pair.chosen) - probe.seq_logprob(g.pair.cls, g.pair.rejected);
      };
      const double d = (diff(saved + 1e-6) - diff(saved - 1e-6)) / 2e-6;
      probe.params()[k] = saved;
      ASSERT_NEAR(grad[k], -c.beta / 2.0 * d, 1e-8);
    }
  }
}

TEST(Gradient, IdenticalSequencesCancelDpoTerm) {
  std::mt19937_64 rng(9);
  auto g = selfevo::testing::random_instance(rng);
  g.pair.rejected = g.pair.chosen;
  TrainingConfig c;
  c.gamma = 0.0;
  for (double x : loss_gradient(g.policy, PolicySnapshot(g.reference), g.pair, c)) EXPECT_NEAR(x, 0.0, 1e-15);
}

TEST(Gradient, PropertyMatchesFiniteDifferences) {
  std::mt19937_64 rng(10);
  Gen gen(10);
  for (int i = 0; i < 150; ++i) {
    const auto g = selfevo::testing::random_instance(rng);
    TrainingConfig c;
    c.beta = gen.pick(std::vector<double>{0.01, 0.1, 1.0});
    c.gamma = gen.real(0.0, 2.0);
    ASSERT_LT(selfevo::testing::max_gradient_error(g, c), 1e-4) << i;
  }
}

TEST(Gradient, PropertySmallStepDecreasesLoss) {
  std::mt19937_64 rng(12);
  const TrainingConfig c;
  for (int i = 0; i < 200; ++i) {
    const auto g = selfevo::testing::random_instance(rng);
    const PolicySnapshot ref(g.reference);
    const auto grad = loss_gradient(g.policy, ref, g.pair, c);
    double norm = 0.0;
    for (double x : grad) norm += x * x;
    if (norm < 1e-20) continue;
    ToyPolicy next = g.policy;
    for (std::size_t k = 0; k < grad.size(); ++k) next.params()[k] -= 1e-3 * grad[k];
    ASSERT_LT(combined_loss(next, ref, g.pair, c).total, combined_loss(g.policy, ref, g.pair, c).total) << i;
  }
}

TEST(TrainIteration, MarginIncreasesOnTwoSymbolTask) {
  const ToyPolicy p({"A", "B"}, 1, 1);
  const auto r = train_iteration(p, ab_pairs(p, 20), toy_config());
  EXPECT_GT(ab_margin(r.policy), ab_margin(p));
  EXPECT_FALSE(r.log.empty());
}

TEST(TrainIteration, ZeroLearningRateLeavesParameters) {
  std::mt19937_64 rng(2);
  auto g = selfevo::testing::random_instance(rng);
  const auto r = train_iteration(g.policy, {g.pair, g.pair, g.pair}, toy_config(0.0));
  EXPECT_EQ(r.policy, g.policy);
}

TEST(TrainIteration, DeterministicUnderSeed) {
  std::mt19937_64 rng(4);
  std::vector<EncodedPair> pairs;
  const auto g = selfevo::testing::random_instance(rng);
  for (int i = 0; i < 30; ++i) {
    auto h = g;
    h.pair.chosen = {static_cast<std::size_t>(i) % g.policy.vocab_size()};
    pairs.push_back(h.pair);
  }
  auto c = toy_config(0.3);
  c.seed = 77;
  const auto a = train_iteration(g.policy, pairs, c);
  const auto b = train_iteration(g.policy, pairs, c);
  EXPECT_EQ(a.policy.hash(), b.policy.hash());
  EXPECT_EQ(format_train_log(a.log), format_train_log(b.log));
}

TEST(TrainIteration, EmptyPairsIsPrecondition) {
  const ToyPolicy p({"A", "B"}, 1, 1);
  EXPECT_EQ(code_of([&] { train_iteration(p, {}, toy_config()); }), Errc::precondition);
}

TEST(TrainIteration, StepScheduleAndWarmup) {
  const ToyPolicy p({"A", "B"}, 1, 1);
  auto c = toy_config(1.0);
  c.batch_size = 3;
  c.grad_accum = 2;
  c.epochs = 2;
  c.warmup_fraction = 0.5;
  c.early_stop_patience = 5;
  // 20 pairs: 2 held out, 18 train, 6 pairs per step -> 3 steps per epoch.
  const auto r = train_iteration(p, ab_pairs(p, 20), c);
  ASSERT_EQ(r.steps, 6u);
  ASSERT_EQ(r.log.size(), 6u);
  EXPECT_DOUBLE_EQ(r.log[0].lr, 1.0 / 3.0);
  EXPECT_DOUBLE_EQ(r.log[1].lr, 2.0 / 3.0);
  EXPECT_DOUBLE_EQ(r.log[2].lr, 1.0);
  EXPECT_DOUBLE_EQ(r.log[5].lr, 1.0);
  EXPECT_EQ(r.heldout_losses.size(), 2u);
}

TEST(TrainIteration, EarlyStoppingRestoresBestPolicy) {
  // Held-out pairs prefer B while training pairs prefer A, so held-out loss
  // rises every epoch after the first.
  const ToyPolicy p({"A", "B"}, 1, 1);
  auto pairs = ab_pairs(p, 18);
  pairs.push_back({0, {1}, {0}});
  pairs.push_back({0, {1}, {0}});
  auto c = toy_config(2.0);
  c.epochs = 10;
  c.early_stop_patience = 2;
  const auto r = train_iteration(p, pairs, c);
  EXPECT_TRUE(r.early_stopped);
  EXPECT_LT(r.heldout_losses.size(), 10u);
  const auto best = std::min_element(r.heldout_losses.begin(), r.heldout_losses.end());
  EXPECT_EQ(best, r.heldout_losses.begin());
}

TEST(TrainIteration, ReferenceHashRecorded) {
  std::mt19937_64 rng(13);
  const auto g = selfevo::testing::random_instance(rng);
  const auto r = train_iteration(g.policy, std::vector<EncodedPair>(12, g.pair), toy_config(0.1));
  EXPECT_EQ(r.reference_hash, g.policy.hash());
  EXPECT_NE(r.policy.hash(), g.policy.hash());
}

TEST(PolicySnapshot, DetectsMutation) {
  ToyPolicy p({"A", "B"}, 1, 1);
  const PolicySnapshot s(p);
  p.logit(0, 0, 0) = 5.0;
  EXPECT_TRUE(s.intact());
  EXPECT_EQ(s.policy().logit(0, 0, 0), 0.0);
  auto& raw = const_cast<ToyPolicy&>(s.policy());
  raw.logit(0, 0, 0) = 1.0;
  EXPECT_FALSE(s.intact());
}

TEST(Params, RoundTripIsExact) {
  std::mt19937_64 rng(14);
  for (int i = 0; i < 20; ++i) {
    const auto g = selfevo::testing::random_instance(rng);
    const std::string doc = format_params(g.policy);
    EXPECT_EQ(parse_params(doc), g.policy);
    EXPECT_EQ(format_params(parse_params(doc)), doc);
  }
}

TEST(Params, SortedKeys) {
  ToyPolicy p({"b", "a"}, 2, 1);
  p.logit(1, 0, 1) = 0.1;
  const std::string doc = format_params(p);
  EXPECT_THAT(doc, ::testing::StartsWith("classes = 2\nlogit.000000.000000.000000 = 0\n"));
  EXPECT_THAT(doc, ::testing::HasSubstr("logit.000001.000000.000001 = 0.10000000000000001\n"));
  EXPECT_THAT(doc, ::testing::EndsWith("positions = 1\nvocab.000000 = b\nvocab.000001 = a\n"));
}

TEST(Symbolizer, HashBuckets) {
  const Symbolizer s{Symbolizer::Mode::hash_buckets, 8};
  const auto syms = s.to_symbols("Hello, hello!");
  ASSERT_EQ(syms.size(), 4u);
  EXPECT_EQ(syms[0], syms[2]);
  EXPECT_EQ(syms[0], "h" + std::to_string(text::fnv1a("hello") % 8));
  EXPECT_EQ(s.bucket_vocabulary().size(), 8u);
  EXPECT_EQ(Symbolizer{}.buckets, 256u);
}

TEST(PolicyBackend, GreedyAtZeroTemperatureAndSeededSampling) {
  ToyPolicy p({"A", "B", "C"}, 1, 1);
  p.logit(0, 0, 2) = 1.0;
  PolicyBackend b(p, 3, 5);
  const std::vector<llm::ChatMessage> m = {{llm::MessageRole::user, "hi"}};
  llm::GenerationParams greedy;
  greedy.temperature = 0.0;
  EXPECT_EQ(b.complete(m, greedy), "C C C");
  llm::GenerationParams params;
  params.top_p = 1.0;
  EXPECT_EQ(b.complete(m, params), b.complete(m, params));
  std::set<std::string> seen;
  for (int i = 0; i < 40; ++i) {
    params.sample_index = i;
    seen.insert(b.complete(m, params));
  }
  EXPECT_GT(seen.size(), 1u);
}

TEST(PolicyBackend, TopPCutsMinoritySymbol) {
  ToyPolicy p({"A", "B"}, 1, 1);
  p.logit(0, 0, 0) = 3.0;  // p(A) ~ 0.95
  PolicyBackend b(p, 1, 0);
  const std::vector<llm::ChatMessage> m = {{llm::MessageRole::user, "hi"}};
  llm::GenerationParams params;  // top_p 0.8
  for (int i = 0; i < 50; ++i) {
    params.sample_index = i;
    ASSERT_EQ(b.complete(m, params), "A");
  }
}

TEST(Loop, SyntheticTaskMarginIsMonotone) {
  const auto task = make_synthetic_ab_task();
  TrainingConfig c;
  c.learning_rate = kSyntheticLearningRate;
  const auto r = self_evolution_loop(task.initial, task.sessions, llm::ModelHandle("r", task.refiner), c, 2);
  ASSERT_FALSE(r.failure.has_value()) << *r.failure;
  ASSERT_EQ(r.policies.size(), 3u);
  double prev = -std::numeric_limits<double>::infinity();
  for (const auto& p : r.policies) {
    const double m = preference_margin(p, task.contexts, task.preferred, task.other);
    EXPECT_GT(m, prev);
    prev = m;
  }
  for (const auto& it : r.iterations) {
    EXPECT_TRUE(it.report.reconciles());
    for (const auto& pair : it.pairs) EXPECT_TRUE(synth::satisfies_invariants(pair));
  }
  EXPECT_EQ(r.iterations[0].pairs.front().iteration, 0);
  EXPECT_EQ(r.iterations[1].pairs.front().iteration, 1);
}

TEST(Loop, MonotoneAcrossTaskSeeds) {
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    const auto task = make_synthetic_ab_task(48, 8, seed);
    TrainingConfig c;
    c.learning_rate = kSyntheticLearningRate;
    LoopOptions o;
    o.sample_seed = seed;
    const auto r = self_evolution_loop(task.initial, task.sessions, llm::ModelHandle("r", task.refiner), c, 2, o);
    ASSERT_FALSE(r.failure.has_value()) << seed;
    const double m0 = preference_margin(r.policies[0], task.contexts, task.preferred, task.other);
    const double m1 = preference_margin(r.policies[1], task.contexts, task.preferred, task.other);
    const double m2 = preference_margin(r.policies[2], task.contexts, task.preferred, task.other);
    EXPECT_LT(m0, m1) << seed;
    EXPECT_LT(m1, m2) << seed;
  }
}

TEST(Loop, SingleIterationEqualsSynthesizeThenTrain) {
  const auto task = make_synthetic_ab_task(12, 4, 3);
  TrainingConfig c;
  c.learning_rate = kSyntheticLearningRate;
  const llm::ModelHandle refiner("r", task.refiner);
  LoopOptions o;
  o.sample_seed = 9;
  const auto loop = self_evolution_loop(task.initial, task.sessions, refiner, c, 1, o);
  ASSERT_EQ(loop.policies.size(), 2u);

  const llm::ModelHandle gen("M0", std::make_shared<PolicyBackend>(task.initial, 1, 10), o.synthesis.params);
  const auto pairs = synth::build_pairs(task.sessions, gen, refiner, 0, o.synthesis).pairs;
  std::vector<EncodedPair> enc;
  for (const auto& p : pairs) enc.push_back(encode_pair(task.initial, o.symbolizer, p));
  EXPECT_EQ(train_iteration(task.initial, enc, c).policy, loop.policies[1]);
  EXPECT_EQ(loop.iterations[0].pairs, pairs);
}

TEST(Loop, ZeroPairsFailsAtFirstIteration) {
  auto task = make_synthetic_ab_task(4, 2, 0);
  for (auto& s : task.sessions) s.utterances.resize(6);  // three exchanges: nothing eligible
  const auto r = self_evolution_loop(task.initial, task.sessions, llm::ModelHandle("r", task.refiner), {}, 2);
  ASSERT_TRUE(r.failure.has_value());
  EXPECT_THAT(*r.failure, ::testing::HasSubstr("iteration 1"));
  EXPECT_EQ(r.policies.size(), 1u);
  EXPECT_TRUE(r.iterations.empty());
}

TEST(Loop, WritesIterationArtifacts) {
  selfevo::testing::TempDir dir("loop");
  const auto task = make_synthetic_ab_task(12, 4, 0);
  TrainingConfig c;
  c.learning_rate = kSyntheticLearningRate;
  LoopOptions o;
  o.run_dir = dir.path();
  const auto r = self_evolution_loop(task.initial, task.sessions, llm::ModelHandle("r", task.refiner), c, 2, o);
  ASSERT_FALSE(r.failure.has_value());
  for (const char* it : {"iter-1", "iter-2"}) {
    for (const char* f : {"pairs.jsonl", "policy.params", "train.log", "synthesis_report.json"}) {
      EXPECT_TRUE(std::filesystem::exists(dir.path() / it / f)) << it << "/" << f;
    }
  }
  EXPECT_EQ(parse_params(selfevo::testing::slurp(dir / "iter-2/policy.params")), r.policies[2]);
  EXPECT_THAT(selfevo::testing::slurp(dir / "iter-1/train.log"),
              ::testing::StartsWith("step\tlr\tdpo\tsft\ttotal\tmargin\n0\t"));
}

TEST(EmitConfig, DefaultDocument) {
  EXPECT_EQ(emit_training_config(TrainingConfig{}, {}),
            "lora_rank = 8\n"
            "lora_alpha = 16\n"
            "learning_rate = 5e-06\n"
            "warmup_fraction = 0.01\n"
            "batch_size = 4\n"
            "grad_accum = 2\n"
            "epochs = 2\n"
            "early_stop_patience = 3\n"
            "beta = 0.1\n"
            "gamma = 1.0\n"
            "decoding.temperature = 0.9\n"
            "decoding.top_p = 0.8\n"
            "decoding.top_k = 50\n"
            "decoding.repetition_penalty = 1.2\n"
            "replay_samples = 500\n");
}

TEST(EmitConfig, OverrideEpochs) {
  TrainingConfig c;
  c.epochs = 3;
  const auto doc = emit_training_config(c, {});
  EXPECT_THAT(doc, ::testing::HasSubstr("\nepochs = 3\n"));
  auto expected = emit_training_config(TrainingConfig{}, {});
  expected.replace(expected.find("epochs = 2"), 10, "epochs = 3");
  EXPECT_EQ(doc, expected);
}

TEST(EmitConfig, DatasetPaths) {
  selfevo::testing::TempDir dir("cfg");
  selfevo::testing::spit(dir / "pairs.jsonl", "");
  const auto doc = emit_training_config({}, {{"preference", dir / "pairs.jsonl"}});
  EXPECT_THAT(doc, ::testing::EndsWith("dataset.preference = " + (dir / "pairs.jsonl").string() + "\n"));
  EXPECT_EQ(code_of([] { emit_training_config({}, {{"x", "/no/such/file"}}); }), Errc::path);
}

TEST(TrainingConfigValidation, RejectsBadValues) {
  TrainingConfig c;
  c.beta = 0.0;
  EXPECT_EQ(code_of([&] { c.validate(); }), Errc::precondition);
  c = {};
  c.batch_size = 0;
  EXPECT_EQ(code_of([&] { c.validate(); }), Errc::precondition);
  c = {};
  c.gamma = -1;
  EXPECT_EQ(code_of([&] { c.validate(); }), Errc::precondition);
}
