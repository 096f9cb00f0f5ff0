// selfevo: command-line entry point for the preference-data pipeline.
//
//   selfevo ingest <input...> --out <dir> [--split 0.9 --seed 7]
//   selfevo synthesize --corpus <f> --model <handle> --iteration <t> --out <f>
//   selfevo train (--pairs <f> | --synthetic-ab) --iterations <T> --out <dir>
//   selfevo emit-config --out <f> [--dataset name=path ...]
//   selfevo evaluate --outputs <f> --refs <f> [--embedder hash]
//   selfevo judge --items <f> --judge-model <handle> [--out <f>] [--human <f>]
//   selfevo analyze --pairs <f> [--bins 10] [--top-k 20]
//   selfevo serve --port <p> --pool <f> [--events <f>]
//
// Exit codes: 0 success, 1 runtime failure (JSON record on stderr), 2 usage.

#include <pthread.h>
#include <signal.h>

#include <cstdio>
#include <fstream>
#include <iostream>
#include <set>
#include <sstream>
#include <thread>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>
#include <spdlog/fmt/fmt.h>
#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include "manifest.hpp"
#include "selfevo/arena.hpp"
#include "selfevo/corpus.hpp"
#include "selfevo/error.hpp"
#include "selfevo/judge.hpp"
#include "selfevo/llm.hpp"
#include "selfevo/metrics.hpp"
#include "selfevo/synthesis.hpp"
#include "selfevo/training.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace selfevo::cli {
namespace {

struct Globals {
  bool force = false;
  std::size_t jobs = 1;
  std::string log_level = "warn";
};

/// Effective value of every option of `app`, for the manifest config snapshot.
json options_snapshot(const CLI::App& app) {
  json out = json::object();
  for (const CLI::Option* opt : app.get_options()) {
    const std::string name = opt->get_single_name();
    if (name.empty() || name == "help") continue;
    if (opt->count() > 0) {
      const auto& r = opt->results();
      out[name] = r.size() == 1 ? json(r.front()) : json(r);
    } else {
      out[name] = opt->get_default_str();
    }
  }
  return out;
}

void write_file(const fs::path& path, const std::string& content) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(Errc::path, "cannot write " + path.string());
  out << content;
}

std::vector<std::string> read_lines(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(Errc::path, "cannot open " + path.string());
  std::vector<std::string> lines;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    lines.push_back(std::move(line));
  }
  return lines;
}

void require_file(const fs::path& path) {
  if (!fs::is_regular_file(path)) throw Error(Errc::path, "no such file: " + path.string());
}

fs::path manifest_dir(const fs::path& out_file) {
  return out_file.has_parent_path() ? out_file.parent_path() : fs::path(".");
}

std::unique_ptr<metrics::Embedder> make_embedder(const std::string& spec) {
  if (spec.empty() || spec == "none") return nullptr;
  if (spec == "hash" || spec.rfind("hash:", 0) == 0) {
    std::size_t dim = 64;
    if (spec.size() > 5) dim = std::stoul(spec.substr(5));
    return std::make_unique<metrics::HashEmbedder>(dim);
  }
  if (spec.rfind("http:", 0) == 0 || spec.rfind("https:", 0) == 0) {
    // http:<url>;model=<m>;key_env=<VAR>
    metrics::HttpEmbedder::Options o;
    std::stringstream parts(spec.substr(spec.find(':') + 1));
    std::string part;
    std::getline(parts, o.url, ';');
    if (spec.rfind("https:", 0) == 0 && o.url.rfind("https://", 0) != 0) o.url = "https:" + o.url;
    while (std::getline(parts, part, ';')) {
      const auto eq = part.find('=');
      const std::string k = part.substr(0, eq);
      const std::string v = eq == std::string::npos ? "" : part.substr(eq + 1);
      if (k == "model") o.model = v;
      else if (k == "key_env") o.api_key_env = v;
      else if (k == "timeout_ms") o.timeout = std::chrono::milliseconds(std::stol(v));
      else throw Error(Errc::precondition, "unknown embedder option '" + k + "'");
    }
    return std::make_unique<metrics::HttpEmbedder>(std::move(o));
  }
  throw Error(Errc::precondition, "unknown embedder '" + spec + "' (expected none, hash[:dim] or http:<url>)");
}

corpus::TurnUnit parse_turn_unit(const std::string& s) {
  return s == "utterance" ? corpus::TurnUnit::utterance : corpus::TurnUnit::exchange;
}

// --- ingest ---------------------------------------------------------------------

struct IngestArgs {
  std::vector<std::string> inputs;
  std::string out;
  double split = 0.0;
  std::uint64_t seed = 0;
};

int run_ingest(const IngestArgs& a, const CLI::App& app, const Globals& g) {
  const fs::path out(a.out);
  json outputs = {{"corpus", (out / "corpus.jsonl").string()}, {"stats", (out / "stats.txt").string()}};
  if (a.split > 0.0) {
    outputs["train"] = (out / "train.jsonl").string();
    outputs["test"] = (out / "test.jsonl").string();
  }
  RunManifest manifest(out);
  manifest.check_rerun("ingest", outputs, g.force);

  std::vector<DialogueSession> sessions;
  std::size_t skipped = 0;
  for (const auto& input : a.inputs) {
    require_file(input);
    for (const auto& raw : corpus::read_corpus(input)) {
      try {
        sessions.push_back(corpus::normalize_session(raw));
      } catch (const Error& e) {
        if (e.code() != Errc::unnormalizable_session && e.code() != Errc::empty_session) throw;
        spdlog::warn("skipping session {}: {}", raw.session_id, e.what());
        ++skipped;
      }
    }
  }
  if (sessions.empty()) throw Error(Errc::empty_corpus, "no usable sessions in the input");

  const std::string stats = corpus::format_stats(corpus::compute_stats(sessions));
  fs::create_directories(out);
  corpus::write_corpus(out / "corpus.jsonl", sessions);
  write_file(out / "stats.txt", stats);
  if (a.split > 0.0) {
    auto [train, test] = corpus::split_corpus(sessions, a.split, a.seed);
    corpus::write_corpus(out / "train.jsonl", train);
    corpus::write_corpus(out / "test.jsonl", test);
  }
  std::cout << stats;
  if (skipped > 0) spdlog::warn("{} sessions skipped", skipped);
  manifest.record("ingest", {{"inputs", a.inputs}}, outputs, options_snapshot(app));
  return 0;
}

// --- synthesize -----------------------------------------------------------------

struct SynthArgs {
  std::string corpus;
  std::string model;
  std::string refiner;
  int iteration = 0;
  std::string out;
  std::string mode = "bundled";
  std::string rejected_template = "vanilla";
  bool allow_unscaffolded = false;
  std::string turn_unit = "exchange";
  int max_attempts = 3;
  llm::GenerationParams params;
};

int run_synthesize(const SynthArgs& a, const CLI::App& app, const Globals& g) {
  require_file(a.corpus);
  const fs::path out(a.out);
  const fs::path report_path = fs::path(a.out).replace_extension(".report.json");
  const json outputs = {{"pairs", out.string()}, {"report", report_path.string()}};
  RunManifest manifest(manifest_dir(out));
  manifest.check_rerun("synthesize", outputs, g.force);

  a.params.validate();
  const auto sessions = corpus::read_corpus(a.corpus);
  const llm::ModelHandle model = llm::make_handle(a.model, a.params);
  const llm::ModelHandle refiner = a.refiner.empty() ? model : llm::make_handle(a.refiner, a.params);

  synth::SynthesisOptions opts;
  opts.params = a.params;
  opts.mode = a.mode == "two_stage" ? synth::SynthesisMode::two_stage : synth::SynthesisMode::bundled;
  opts.rejected_template = a.rejected_template;
  opts.max_attempts = a.max_attempts;
  opts.allow_unscaffolded = a.allow_unscaffolded;
  opts.turn_unit = parse_turn_unit(a.turn_unit);
  opts.jobs = g.jobs;

  const auto result = synth::build_pairs(sessions, model, refiner, a.iteration, opts);
  synth::write_pairs(out, result.pairs);
  const std::string report = synth::to_json(result.report).dump(2) + "\n";
  write_file(report_path, report);
  std::cout << report;
  manifest.record("synthesize", {{"corpus", a.corpus}}, outputs, options_snapshot(app));
  return 0;
}

// --- train ----------------------------------------------------------------------

struct TrainArgs {
  std::string pairs;
  bool synthetic_ab = false;
  std::string corpus;
  std::string refiner;
  int iterations = 1;
  std::string out;
  train::TrainingConfig config;
  std::string symbolizer = "hash";
  std::size_t buckets = 256;
  std::size_t classes = 16;
  std::size_t positions = 8;
  std::size_t sessions = 48;
  std::uint64_t sample_seed = 0;
};

void write_iteration(const fs::path& dir, const train::TrainResult& r,
                     const std::vector<synth::PreferencePair>* pairs) {
  fs::create_directories(dir);
  if (pairs != nullptr) synth::write_pairs(dir / "pairs.jsonl", *pairs);
  write_file(dir / "policy.params", train::format_params(r.policy));
  write_file(dir / "train.log", train::format_train_log(r.log));
}

int run_train(TrainArgs a, const CLI::App& app, const Globals& g) {
  if (a.synthetic_ab == !a.pairs.empty()) {
    throw CLI::ValidationError("train", "exactly one of --pairs and --synthetic-ab is required");
  }
  if (a.corpus.empty() != a.refiner.empty()) {
    throw CLI::ValidationError("train", "--corpus and --refiner go together");
  }
  const fs::path out(a.out);
  json outputs = json::object();
  for (int t = 0; t <= a.iterations; ++t) outputs["iter-" + std::to_string(t)] = (out / ("iter-" + std::to_string(t))).string();
  outputs["margins"] = (out / "margins.log").string();
  RunManifest manifest(out);
  manifest.check_rerun("train", outputs, g.force);
  if (a.iterations < 1) throw Error(Errc::precondition, "--iterations must be at least 1");

  if (a.synthetic_ab && app.get_option("--learning-rate")->count() == 0) {
    a.config.learning_rate = train::kSyntheticLearningRate;
  }
  a.config.validate();

  train::LoopOptions loop;
  loop.sample_seed = a.sample_seed;
  loop.synthesis.jobs = g.jobs;
  loop.run_dir = out;

  std::string margins = "iteration\tmargin\tgreedy_match\n";
  std::optional<std::string> failure;
  std::vector<train::ToyPolicy> policies;
  fs::create_directories(out);

  if (a.synthetic_ab) {
    auto task = train::make_synthetic_ab_task(a.sessions, 8, a.config.seed);
    const llm::ModelHandle refiner("synthetic-refiner", task.refiner);
    loop.symbolizer = {train::Symbolizer::Mode::vocabulary, 0};
    loop.response_length = 1;
    auto result = train::self_evolution_loop(task.initial, task.sessions, refiner, a.config, a.iterations, loop);
    failure = result.failure;
    policies = result.policies;
    for (std::size_t t = 0; t < policies.size(); ++t) {
      const auto& p = policies[t];
      std::size_t hits = 0;
      for (std::size_t i = 0; i < task.contexts.size(); ++i) {
        const auto best = p.greedy(p.classify(task.contexts[i]), 1);
        if (p.vocabulary()[best.front()] == task.preferred[i]) ++hits;
      }
      margins += fmt::format("{}\t{:.17g}\t{:.17g}\n", t, train::preference_margin(p, task.contexts, task.preferred, task.other),
                             static_cast<double>(hits) / static_cast<double>(task.contexts.size()));
    }
  } else {
    require_file(a.pairs);
    const auto pairs = synth::read_pairs(a.pairs);
    train::Symbolizer sym;
    std::vector<std::string> vocab;
    if (a.symbolizer == "vocabulary") {
      sym = {train::Symbolizer::Mode::vocabulary, 0};
      std::set<std::string> seen;
      for (const auto& p : pairs) {
        for (auto& s : sym.to_symbols(p.chosen)) seen.insert(s);
        for (auto& s : sym.to_symbols(p.rejected)) seen.insert(s);
      }
      vocab.assign(seen.begin(), seen.end());
    } else {
      sym = {train::Symbolizer::Mode::hash_buckets, a.buckets};
      vocab = sym.bucket_vocabulary();
    }
    const train::ToyPolicy initial(vocab, a.classes, a.positions);
    loop.symbolizer = sym;
    loop.response_length = a.positions;

    if (!a.corpus.empty()) {
      require_file(a.corpus);
      const auto sessions = corpus::read_corpus(a.corpus);
      const llm::ModelHandle refiner = llm::make_handle(a.refiner);
      auto result = train::self_evolution_loop(initial, sessions, refiner, a.config, a.iterations, loop);
      failure = result.failure;
      policies = result.policies;
    } else {
      // Offline mode: every iteration retrains on the same pair file against a
      // fresh reference snapshot of the previous policy.
      policies.push_back(initial);
      for (int t = 1; t <= a.iterations; ++t) {
        std::vector<train::EncodedPair> encoded;
        for (const auto& p : pairs) encoded.push_back(train::encode_pair(policies.back(), sym, p));
        auto r = train::train_iteration(policies.back(), encoded, a.config);
        write_iteration(out / ("iter-" + std::to_string(t)), r, &pairs);
        policies.push_back(std::move(r.policy));
      }
    }
    for (std::size_t t = 0; t < policies.size(); ++t) {
      double sum = 0.0;
      for (const auto& p : pairs) {
        const auto e = train::encode_pair(policies[t], sym, p);
        sum += policies[t].seq_logprob(e.cls, e.chosen) - policies[t].seq_logprob(e.cls, e.rejected);
      }
      margins += fmt::format("{}\t{:.17g}\t-\n", t, pairs.empty() ? 0.0 : sum / static_cast<double>(pairs.size()));
    }
  }

  fs::create_directories(out / "iter-0");
  write_file(out / "iter-0" / "policy.params", train::format_params(policies.front()));
  write_file(out / "margins.log", margins);
  std::cout << margins;
  json config = options_snapshot(app);
  config["learning-rate"] = fmt::format("{}", a.config.learning_rate);
  manifest.record("train", {{"pairs", a.pairs}, {"corpus", a.corpus}}, outputs, config,
                  failure ? "failed" : "completed");
  if (failure) throw Error(Errc::precondition, *failure);
  return 0;
}

// --- emit-config ------------------------------------------------------------------

struct EmitArgs {
  std::string out;
  std::vector<std::string> datasets;
  train::TrainingConfig config;
};

int run_emit_config(const EmitArgs& a, const CLI::App& app, const Globals& g) {
  const fs::path out(a.out);
  const json outputs = {{"config", out.string()}};
  RunManifest manifest(manifest_dir(out));
  manifest.check_rerun("emit-config", outputs, g.force);

  std::map<std::string, fs::path> datasets;
  for (const auto& d : a.datasets) {
    const auto eq = d.find('=');
    if (eq == std::string::npos || eq == 0) throw CLI::ValidationError("--dataset", "expected name=path, got " + d);
    datasets[d.substr(0, eq)] = d.substr(eq + 1);
  }
  const std::string doc = train::emit_training_config(a.config, datasets);
  write_file(out, doc);
  std::cout << doc;
  manifest.record("emit-config", {{"datasets", a.datasets}}, outputs, options_snapshot(app));
  return 0;
}

// --- evaluate ---------------------------------------------------------------------

struct EvalArgs {
  std::string outputs;
  std::string refs;
  std::string embedder = "none";
  std::string out;
};

int run_evaluate(const EvalArgs& a, const CLI::App& app, const Globals& g) {
  std::optional<RunManifest> manifest;
  const json outputs = {{"report", a.out}};
  if (!a.out.empty()) {
    manifest.emplace(manifest_dir(a.out));
    manifest->check_rerun("evaluate", outputs, g.force);
  }
  const auto hyp = read_lines(a.outputs);
  const auto ref = read_lines(a.refs);
  if (hyp.size() != ref.size()) {
    throw Error(Errc::alignment, fmt::format("{} outputs but {} references", hyp.size(), ref.size()));
  }
  auto embedder = make_embedder(a.embedder);
  const auto report = metrics::evaluate_testset(hyp, ref, embedder.get(), g.jobs);
  const std::string doc = metrics::format_report(report);
  std::cout << doc;
  if (manifest) {
    write_file(a.out, doc);
    manifest->record("evaluate", {{"outputs", a.outputs}, {"refs", a.refs}}, outputs, options_snapshot(app));
  }
  return 0;
}

// --- judge ------------------------------------------------------------------------

struct JudgeArgs {
  std::string items;
  std::string judge_model;
  std::string out;
  std::string human;
  std::vector<std::string> dimensions;
  std::size_t sample = 100;
  std::uint64_t seed = 0;
  int max_attempts = 3;
};

int run_judge(const JudgeArgs& a, const CLI::App& app, const Globals& g) {
  const fs::path out = a.out.empty() ? fs::path(a.items).replace_extension(".verdicts.jsonl") : fs::path(a.out);
  const json outputs = {{"verdicts", out.string()}};
  RunManifest manifest(manifest_dir(out));
  manifest.check_rerun("judge", outputs, g.force);

  std::vector<judge::Dimension> dims;
  for (const auto& d : a.dimensions) {
    auto parsed = judge::parse_dimension(d);
    if (!parsed) throw CLI::ValidationError("--dimensions", "unknown dimension " + d);
    dims.push_back(*parsed);
  }
  if (dims.empty()) dims.assign(judge::kDimensions.begin(), judge::kDimensions.end());

  require_file(a.items);
  const auto items = judge::sample_items(judge::read_items(a.items), a.sample, a.seed);
  const llm::ModelHandle model = llm::make_handle(a.judge_model, llm::GenerationParams::judge_defaults());

  std::vector<judge::JudgeResult> results;
  std::string verdicts;
  for (const auto& item : items) {
    for (auto d : dims) {
      auto r = judge::judge_response(model, d, item.conversation, item.response, model.default_params(),
                                     a.max_attempts);
      verdicts += judge::to_json(item.item_id, r).dump() + "\n";
      results.push_back(std::move(r));
    }
  }
  write_file(out, verdicts);
  const auto table = judge::aggregate_judgments(results);
  std::cout << judge::format_aggregate(table);

  if (!a.human.empty()) {
    require_file(a.human);
    const auto human = judge::read_human_scores(a.human);
    std::size_t k = 0;
    for (auto d : dims) {
      std::vector<double> xs, ys;
      for (std::size_t i = 0; i < items.size(); ++i) {
        const auto& r = results[i * dims.size() + k];
        const auto it = human.find({items[i].item_id, d});
        if (r.verdict && it != human.end()) {
          xs.push_back(r.verdict->score);
          ys.push_back(it->second);
        }
      }
      ++k;
      try {
        std::cout << fmt::format("pearson.{} = {:.3f}\n", judge::to_string(d), judge::pearson(xs, ys));
      } catch (const Error& e) {
        std::cout << fmt::format("pearson.{} = undefined\n", judge::to_string(d));
        spdlog::warn("pearson for {}: {}", judge::to_string(d), e.what());
      }
    }
  }
  manifest.record("judge", {{"items", a.items}, {"human", a.human}}, outputs, options_snapshot(app));
  return 0;
}

// --- analyze ----------------------------------------------------------------------

struct AnalyzeArgs {
  std::string pairs;
  std::string embedder = "hash";
  std::size_t bins = 10;
  std::size_t top_k = 20;
  int ngram_low = 2;
  int ngram_high = 4;
  std::string out;
};

int run_analyze(const AnalyzeArgs& a, const CLI::App& app, const Globals& g) {
  std::optional<RunManifest> manifest;
  const json outputs = {{"analysis", a.out}};
  if (!a.out.empty()) {
    manifest.emplace(manifest_dir(a.out));
    manifest->check_rerun("analyze", outputs, g.force);
  }
  require_file(a.pairs);
  const auto pairs = synth::read_pairs(a.pairs);
  if (pairs.empty()) throw Error(Errc::precondition, "no pairs to analyze");
  auto embedder = make_embedder(a.embedder);
  if (!embedder) throw Error(Errc::precondition, "analyze needs an embedder");

  std::string doc = "# chosen vs rejected cosine similarity\n";
  const auto hist = metrics::pair_similarity_distribution(pairs, *embedder, a.bins);
  for (std::size_t b = 0; b < hist.counts.size(); ++b) {
    doc += fmt::format("similarity.bin.{:02} = [{:.2f}, {:.2f}{} {}\n", b, hist.edges[b], hist.edges[b + 1],
                       b + 1 == hist.counts.size() ? "]" : ")", hist.counts[b]);
  }
  doc += fmt::format("similarity.clamped = {}\n", hist.clamped);

  double rel_chosen = 0.0, rel_rejected = 0.0;
  std::vector<std::string> chosen, rejected;
  for (const auto& p : pairs) {
    rel_chosen += metrics::user_relevance(p.chosen, p.context, *embedder);
    rel_rejected += metrics::user_relevance(p.rejected, p.context, *embedder);
    chosen.push_back(p.chosen);
    rejected.push_back(p.rejected);
  }
  const double n = static_cast<double>(pairs.size());
  doc += "# mean cosine between response and seeker utterances\n";
  doc += fmt::format("relevance.chosen = {:.4f}\nrelevance.rejected = {:.4f}\n", rel_chosen / n, rel_rejected / n);

  doc += fmt::format("# top {} phrases of {}-{} tokens\n", a.top_k, a.ngram_low, a.ngram_high);
  for (const auto& [label, texts] : {std::pair{"chosen", &chosen}, std::pair{"rejected", &rejected}}) {
    std::size_t rank = 1;
    for (const auto& [phrase, count] : metrics::phrase_frequency(*texts, a.ngram_low, a.ngram_high, a.top_k)) {
      doc += fmt::format("phrases.{}.{:02} = {} ({})\n", label, rank++, phrase, count);
    }
  }
  std::cout << doc;
  if (manifest) {
    write_file(a.out, doc);
    manifest->record("analyze", {{"pairs", a.pairs}}, outputs, options_snapshot(app));
  }
  return 0;
}

// --- serve ------------------------------------------------------------------------

struct ServeArgs {
  std::string host = "127.0.0.1";
  int port = 8080;
  std::string pool;
  std::string events;
};

int run_serve(const ServeArgs& a) {
  require_file(a.pool);
  // Block termination signals here so the waiter thread receives them.
  sigset_t sigs;
  sigemptyset(&sigs);
  sigaddset(&sigs, SIGINT);
  sigaddset(&sigs, SIGTERM);
  pthread_sigmask(SIG_BLOCK, &sigs, nullptr);

  std::shared_ptr<arena::EventSink> sink;
  if (!a.events.empty()) sink = std::make_shared<arena::FileEventSink>(a.events);
  arena::EvalStore store(arena::read_pool(a.pool), sink);
  arena::ArenaServer server(store);
  const int port = server.bind(a.host, a.port);
  std::cout << "listening on " << a.host << ":" << port << std::endl;

  std::jthread waiter([&server, sigs] {
    int sig = 0;
    sigwait(&sigs, &sig);
    server.stop();
  });
  server.run();
  pthread_kill(waiter.native_handle(), SIGTERM);
  return 0;
}

void add_generation_flags(CLI::App* cmd, llm::GenerationParams& p) {
  cmd->add_option("--temperature", p.temperature, "Sampling temperature")->capture_default_str();
  cmd->add_option("--top-p", p.top_p, "Nucleus sampling mass")->capture_default_str();
  cmd->add_option("--top-k", p.top_k, "Top-k cutoff")->capture_default_str();
  cmd->add_option("--repetition-penalty", p.repetition_penalty, "Repetition penalty")->capture_default_str();
  cmd->add_option("--max-tokens", p.max_tokens, "Generation length cap")->capture_default_str();
}

void add_training_flags(CLI::App* cmd, train::TrainingConfig& c) {
  cmd->add_option("--beta", c.beta, "DPO temperature")->capture_default_str();
  cmd->add_option("--gamma", c.gamma, "SFT weight")->capture_default_str();
  cmd->add_option("--learning-rate", c.learning_rate, "Peak learning rate")->capture_default_str();
  cmd->add_option("--warmup-fraction", c.warmup_fraction, "Share of steps with linear warmup")->capture_default_str();
  cmd->add_option("--batch-size", c.batch_size)->capture_default_str();
  cmd->add_option("--grad-accum", c.grad_accum)->capture_default_str();
  cmd->add_option("--epochs", c.epochs)->capture_default_str();
  cmd->add_option("--early-stop-patience", c.early_stop_patience)->capture_default_str();
  cmd->add_option("--lora-rank", c.lora_rank)->capture_default_str();
  cmd->add_option("--lora-alpha", c.lora_alpha)->capture_default_str();
  cmd->add_option("--replay-samples", c.replay_samples)->capture_default_str();
  cmd->add_option("--seed", c.seed, "Shuffle seed")->capture_default_str();
  cmd->add_option("--temperature", c.decoding.temperature)->capture_default_str();
  cmd->add_option("--top-p", c.decoding.top_p)->capture_default_str();
  cmd->add_option("--top-k", c.decoding.top_k)->capture_default_str();
  cmd->add_option("--repetition-penalty", c.decoding.repetition_penalty)->capture_default_str();
}

void print_error(const std::string& code, const std::string& message, const std::string& command) {
  json record = {{"error", code}, {"message", message}};
  if (!command.empty()) record["command"] = command;
  std::cerr << record.dump() << std::endl;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Self-evolving preference-data pipeline for emotional-support dialogue"};
  app.name("selfevo");
  app.require_subcommand(1);
  app.fallthrough();
  app.failure_message(CLI::FailureMessage::help);
  app.set_config("--config", "", "Flat key = value file supplying flag defaults (keys: <command>.<flag>)");

  Globals g;
  app.add_flag("--force", g.force, "Re-run a stage already recorded as completed");
  app.add_option("--jobs", g.jobs, "Cap on concurrent workers")->check(CLI::PositiveNumber)->capture_default_str();
  app.add_option("--log-level", g.log_level, "trace, debug, info, warn, error")
      ->check(CLI::IsMember({"trace", "debug", "info", "warn", "error", "off"}))
      ->capture_default_str();

  IngestArgs ingest;
  auto* c_ingest = app.add_subcommand("ingest", "Parse, normalize and summarize dialogue corpora");
  c_ingest->add_option("inputs", ingest.inputs, "Corpus files")->required();
  c_ingest->add_option("--out", ingest.out, "Output directory")->required();
  c_ingest->add_option("--split", ingest.split, "Train share for a train/test split")->check(CLI::Range(0.0, 1.0));
  c_ingest->add_option("--seed", ingest.seed, "Split seed")->capture_default_str();

  SynthArgs synth;
  auto* c_synth = app.add_subcommand("synthesize", "Build preference pairs from a corpus");
  c_synth->add_option("--corpus", synth.corpus, "Normalized corpus file")->required();
  c_synth->add_option("--model", synth.model, "Generator handle (scripted:<f> or http:<url>;...)")->required();
  c_synth->add_option("--refiner", synth.refiner, "Refiner handle; defaults to --model");
  c_synth->add_option("--iteration", synth.iteration, "Iteration label of the generator")->required();
  c_synth->add_option("--out", synth.out, "Pair file")->required();
  c_synth->add_option("--mode", synth.mode)->check(CLI::IsMember({"bundled", "two_stage"}))->capture_default_str();
  c_synth->add_option("--rejected-template", synth.rejected_template)
      ->check(CLI::IsMember({"vanilla", "with_strategy", "with_self_reflection"}))
      ->capture_default_str();
  c_synth->add_flag("--allow-unscaffolded", synth.allow_unscaffolded,
                    "Refine without a reflection when it cannot be parsed");
  c_synth->add_option("--turn-unit", synth.turn_unit, "Unit of the greeting exclusion")
      ->check(CLI::IsMember({"exchange", "utterance"}))
      ->capture_default_str();
  c_synth->add_option("--max-attempts", synth.max_attempts)->check(CLI::PositiveNumber)->capture_default_str();
  add_generation_flags(c_synth, synth.params);

  TrainArgs tr;
  auto* c_train = app.add_subcommand("train", "Train the toy policy on preference pairs");
  c_train->add_option("--pairs", tr.pairs, "Pair file");
  c_train->add_flag("--synthetic-ab", tr.synthetic_ab, "Use the built-in two-symbol task");
  c_train->add_option("--corpus", tr.corpus, "Corpus to resynthesize from each iteration");
  c_train->add_option("--refiner", tr.refiner, "Refiner handle used with --corpus");
  c_train->add_option("--iterations", tr.iterations)->required();
  c_train->add_option("--out", tr.out, "Run directory")->required();
  c_train->add_option("--symbolizer", tr.symbolizer)->check(CLI::IsMember({"hash", "vocabulary"}))->capture_default_str();
  c_train->add_option("--buckets", tr.buckets)->check(CLI::PositiveNumber)->capture_default_str();
  c_train->add_option("--classes", tr.classes)->check(CLI::PositiveNumber)->capture_default_str();
  c_train->add_option("--positions", tr.positions)->check(CLI::PositiveNumber)->capture_default_str();
  c_train->add_option("--sessions", tr.sessions, "Sessions in the synthetic task")->capture_default_str();
  c_train->add_option("--sample-seed", tr.sample_seed)->capture_default_str();
  add_training_flags(c_train, tr.config);

  EmitArgs emit;
  auto* c_emit = app.add_subcommand("emit-config", "Write the fine-tuning configuration document");
  c_emit->add_option("--out", emit.out, "Config file")->required();
  c_emit->add_option("--dataset", emit.datasets, "name=path, repeatable");
  add_training_flags(c_emit, emit.config);

  EvalArgs ev;
  auto* c_eval = app.add_subcommand("evaluate", "Automatic metrics over aligned output/reference files");
  c_eval->add_option("--outputs", ev.outputs)->required()->check(CLI::ExistingFile);
  c_eval->add_option("--refs", ev.refs)->required()->check(CLI::ExistingFile);
  c_eval->add_option("--embedder", ev.embedder, "none, hash[:dim] or http:<url>;model=..")->capture_default_str();
  c_eval->add_option("--out", ev.out, "Also write the report here");

  JudgeArgs jd;
  auto* c_judge = app.add_subcommand("judge", "Score responses with an LLM judge");
  c_judge->add_option("--items", jd.items)->required();
  c_judge->add_option("--judge-model", jd.judge_model)->required();
  c_judge->add_option("--out", jd.out, "Verdict file (default: items path with extension .verdicts.jsonl)");
  c_judge->add_option("--human", jd.human, "Human scores for correlation");
  c_judge->add_option("--dimensions", jd.dimensions, "Subset of dimensions");
  c_judge->add_option("--sample", jd.sample)->capture_default_str();
  c_judge->add_option("--seed", jd.seed)->capture_default_str();
  c_judge->add_option("--max-attempts", jd.max_attempts)->check(CLI::PositiveNumber)->capture_default_str();

  AnalyzeArgs an;
  auto* c_an = app.add_subcommand("analyze", "Similarity, relevance and phrase analyses of a pair file");
  c_an->add_option("--pairs", an.pairs)->required();
  c_an->add_option("--embedder", an.embedder)->capture_default_str();
  c_an->add_option("--bins", an.bins)->check(CLI::PositiveNumber)->capture_default_str();
  c_an->add_option("--top-k", an.top_k)->capture_default_str();
  c_an->add_option("--ngram-low", an.ngram_low)->check(CLI::PositiveNumber)->capture_default_str();
  c_an->add_option("--ngram-high", an.ngram_high)->check(CLI::PositiveNumber)->capture_default_str();
  c_an->add_option("--out", an.out, "Also write the analysis here");

  ServeArgs sv;
  auto* c_serve = app.add_subcommand("serve", "Run the evaluation service");
  c_serve->add_option("--port", sv.port, "0 picks a free port")->check(CLI::Range(0, 65535))->capture_default_str();
  c_serve->add_option("--host", sv.host)->capture_default_str();
  c_serve->add_option("--pool", sv.pool, "Model pool file")->required();
  c_serve->add_option("--events", sv.events, "Append-only event log");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  auto logger = spdlog::stderr_color_mt("selfevo");
  spdlog::set_default_logger(logger);
  spdlog::set_level(spdlog::level::from_str(g.log_level));

  CLI::App* cmd = app.get_subcommands().front();
  try {
    if (cmd == c_ingest) return run_ingest(ingest, *cmd, g);
    if (cmd == c_synth) return run_synthesize(synth, *cmd, g);
    if (cmd == c_train) return run_train(tr, *cmd, g);
    if (cmd == c_emit) return run_emit_config(emit, *cmd, g);
    if (cmd == c_eval) return run_evaluate(ev, *cmd, g);
    if (cmd == c_judge) return run_judge(jd, *cmd, g);
    if (cmd == c_an) return run_analyze(an, *cmd, g);
    if (cmd == c_serve) return run_serve(sv);
  } catch (const CLI::ParseError& e) {
    std::cerr << e.what() << "\n" << cmd->help();
    return 2;
  } catch (const Error& e) {
    print_error(std::string(to_string(e.code())), e.what(), cmd->get_name());
    return 1;
  } catch (const std::exception& e) {
    print_error("internal", e.what(), cmd->get_name());
    return 1;
  }
  return 2;
}

}  // namespace selfevo::cli

int main(int argc, char** argv) { return selfevo::cli::main(argc, argv); }
