#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "selfevo/dialogue.hpp"
#include "selfevo/embedding.hpp"
#include "selfevo/synthesis.hpp"

namespace selfevo::metrics {

using Tokens = std::vector<std::string>;

/// Porter's original stemming algorithm on a lowercase word.
std::string porter_stem(std::string_view word);

/// Sentence BLEU over orders 1..n with uniform weights, brevity penalty and
/// add-one smoothing for orders >= 2. Zero when the unigram precision is
/// zero. `empty_input` is set for an empty candidate.
double bleu_n(const Tokens& candidate, const Tokens& reference, int n, bool* empty_input = nullptr);

/// LCS F1 (beta = 1) in percent. `empty_input` is set when both are empty.
double rouge_l(const Tokens& candidate, const Tokens& reference, bool* empty_input = nullptr);

struct MeteorAlignment {
  std::size_t matches = 0;
  std::size_t chunks = 0;
  /// (candidate index, reference index), ordered by candidate index.
  std::vector<std::pair<std::size_t, std::size_t>> links;
};

/// Greedy left-to-right alignment: exact matches first, then Porter-stem
/// matches among the remaining tokens.
MeteorAlignment meteor_align(const Tokens& candidate, const Tokens& reference);

/// F_mean = 10PR / (R + 9P), penalty 0.5 (chunks / matches)^3, in percent.
double meteor(const Tokens& candidate, const Tokens& reference);

/// Corpus-level unique/total n-gram ratio in percent. `empty_input` is set
/// when there are no n-grams.
double distinct_n(const std::vector<Tokens>& responses, int n, bool* empty_input = nullptr);

/// Greedy-cosine precision/recall F1 in percent (raw, no baseline rescaling).
/// nullopt when the embedder fails. Negative F1 is clamped to 0.
std::optional<double> embed_score(const Tokens& candidate, const Tokens& reference, Embedder& embedder);

struct MetricReport {
  double bleu2 = 0.0;
  double bleu3 = 0.0;
  double rouge_l = 0.0;
  double meteor = 0.0;
  std::optional<double> bert_score;
  double distinct2 = 0.0;
  double distinct3 = 0.0;
  std::size_t items = 0;
  std::size_t empty_outputs = 0;
  std::string embedder;
};

/// Per-item BLEU/ROUGE/METEOR/embedding scores averaged over items; Distinct
/// computed over all outputs together.
MetricReport evaluate_testset(const std::vector<std::string>& outputs, const std::vector<std::string>& references,
                              Embedder* embedder = nullptr, std::size_t jobs = 1);

/// Flat `key = value` document with the table column names, two decimals,
/// preceded by a comment header describing the metric variants.
std::string format_report(const MetricReport& report);

/// Most frequent n-grams with low <= n <= high over metric tokens, by
/// descending count then lexicographic phrase.
std::vector<std::pair<std::string, std::size_t>> phrase_frequency(const std::vector<std::string>& responses,
                                                                  int low, int high, std::size_t k);

struct Histogram {
  std::vector<double> edges;
  std::vector<std::size_t> counts;
  std::size_t clamped = 0;  ///< values below 0 placed in the first bin
};

/// Bins values over [0, 1] into `bins` equal bins; the last bin is closed.
Histogram histogram01(const std::vector<double>& values, std::size_t bins);

/// Cosine of the mean-pooled embeddings of two texts (metric tokens).
double text_similarity(const std::string& a, const std::string& b, Embedder& embedder);

/// Similarity of chosen vs rejected for every pair. Throws Errc::unavailable
/// when the embedder fails.
Histogram pair_similarity_distribution(const std::vector<synth::PreferencePair>& pairs, Embedder& embedder,
                                       std::size_t bins);

/// Cosine between the response and all seeker utterances of the context
/// joined together.
double user_relevance(const std::string& response, const DialogueContext& context, Embedder& embedder);

}  // namespace selfevo::metrics
