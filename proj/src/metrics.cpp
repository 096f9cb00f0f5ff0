#include "selfevo/metrics.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <map>
#include <set>
#include <thread>

#include <spdlog/fmt/fmt.h>
#include <spdlog/spdlog.h>

#include "selfevo/error.hpp"
#include "selfevo/text.hpp"

namespace selfevo::metrics {
namespace {

std::map<std::vector<std::string>, std::size_t> ngram_counts(const Tokens& tokens, std::size_t n) {
  std::map<std::vector<std::string>, std::size_t> out;
  if (tokens.size() < n) return out;
  for (std::size_t i = 0; i + n <= tokens.size(); ++i) {
    ++out[std::vector<std::string>(tokens.begin() + static_cast<std::ptrdiff_t>(i),
                                   tokens.begin() + static_cast<std::ptrdiff_t>(i + n))];
  }
  return out;
}

std::size_t lcs_length(const Tokens& a, const Tokens& b) {
  std::vector<std::size_t> prev(b.size() + 1, 0), cur(b.size() + 1, 0);
  for (std::size_t i = 1; i <= a.size(); ++i) {
    for (std::size_t j = 1; j <= b.size(); ++j) {
      cur[j] = a[i - 1] == b[j - 1] ? prev[j - 1] + 1 : std::max(prev[j], cur[j - 1]);
    }
    std::swap(prev, cur);
  }
  return prev[b.size()];
}

}  // namespace

double bleu_n(const Tokens& candidate, const Tokens& reference, int n, bool* empty_input) {
  if (n < 1 || n > 4) throw Error(Errc::precondition, "BLEU order must lie in 1..4");
  if (empty_input) *empty_input = candidate.empty();
  if (candidate.empty()) return 0.0;

  double log_sum = 0.0;
  for (int k = 1; k <= n; ++k) {
    const auto cand = ngram_counts(candidate, static_cast<std::size_t>(k));
    const auto ref = ngram_counts(reference, static_cast<std::size_t>(k));
    std::size_t matched = 0;
    std::size_t total = 0;
    for (const auto& [gram, count] : cand) {
      total += count;
      if (auto it = ref.find(gram); it != ref.end()) matched += std::min(count, it->second);
    }
    double p;
    if (k == 1) {
      if (matched == 0) return 0.0;
      p = static_cast<double>(matched) / static_cast<double>(total);
    } else {
      p = static_cast<double>(matched + 1) / static_cast<double>(total + 1);
    }
    log_sum += std::log(p);
  }
  const double c = static_cast<double>(candidate.size());
  const double r = static_cast<double>(reference.size());
  const double bp = c > r ? 1.0 : std::exp(1.0 - r / c);
  return 100.0 * bp * std::exp(log_sum / n);
}

double rouge_l(const Tokens& candidate, const Tokens& reference, bool* empty_input) {
  if (empty_input) *empty_input = candidate.empty() && reference.empty();
  if (candidate.empty() || reference.empty()) return 0.0;
  const auto lcs = static_cast<double>(lcs_length(candidate, reference));
  if (lcs == 0.0) return 0.0;
  const double p = lcs / static_cast<double>(candidate.size());
  const double r = lcs / static_cast<double>(reference.size());
  return 100.0 * 2.0 * p * r / (p + r);
}

MeteorAlignment meteor_align(const Tokens& candidate, const Tokens& reference) {
  std::vector<bool> cand_used(candidate.size(), false), ref_used(reference.size(), false);
  std::vector<std::pair<std::size_t, std::size_t>> links;
  auto stage = [&](auto&& key_c, auto&& key_r) {
    for (std::size_t i = 0; i < candidate.size(); ++i) {
      if (cand_used[i]) continue;
      const std::string kc = key_c(i);
      for (std::size_t j = 0; j < reference.size(); ++j) {
        if (ref_used[j] || key_r(j) != kc) continue;
        cand_used[i] = ref_used[j] = true;
        links.emplace_back(i, j);
        break;
      }
    }
  };
  stage([&](std::size_t i) { return candidate[i]; }, [&](std::size_t j) { return reference[j]; });
  std::vector<std::string> cand_stems, ref_stems;
  for (const auto& t : candidate) cand_stems.push_back(porter_stem(t));
  for (const auto& t : reference) ref_stems.push_back(porter_stem(t));
  stage([&](std::size_t i) { return cand_stems[i]; }, [&](std::size_t j) { return ref_stems[j]; });

  std::sort(links.begin(), links.end());
  MeteorAlignment a;
  a.matches = links.size();
  for (std::size_t k = 0; k < links.size(); ++k) {
    if (k == 0 || links[k].first != links[k - 1].first + 1 || links[k].second != links[k - 1].second + 1) ++a.chunks;
  }
  a.links = std::move(links);
  return a;
}

double meteor(const Tokens& candidate, const Tokens& reference) {
  if (candidate.empty() || reference.empty()) return 0.0;
  const auto a = meteor_align(candidate, reference);
  if (a.matches == 0) return 0.0;
  const double m = static_cast<double>(a.matches);
  const double p = m / static_cast<double>(candidate.size());
  const double r = m / static_cast<double>(reference.size());
  const double fmean = 10.0 * p * r / (r + 9.0 * p);
  const double penalty = 0.5 * std::pow(static_cast<double>(a.chunks) / m, 3.0);
  return 100.0 * fmean * (1.0 - penalty);
}

double distinct_n(const std::vector<Tokens>& responses, int n, bool* empty_input) {
  if (n < 1) throw Error(Errc::precondition, "distinct order must be >= 1");
  std::set<std::vector<std::string>> unique;
  std::size_t total = 0;
  for (const auto& r : responses) {
    for (const auto& [gram, count] : ngram_counts(r, static_cast<std::size_t>(n))) {
      unique.insert(gram);
      total += count;
    }
  }
  if (empty_input) *empty_input = total == 0;
  if (total == 0) return 0.0;
  return 100.0 * static_cast<double>(unique.size()) / static_cast<double>(total);
}

std::optional<double> embed_score(const Tokens& candidate, const Tokens& reference, Embedder& embedder) {
  if (candidate.empty() || reference.empty()) return 0.0;
  std::vector<Vector> ec, er;
  try {
    ec = embedder.embed(candidate);
    er = embedder.embed(reference);
  } catch (const Error& e) {
    spdlog::warn("embedding score unavailable: {}", e.what());
    return std::nullopt;
  }
  std::vector<double> best_c(ec.size(), -1.0), best_r(er.size(), -1.0);
  for (std::size_t i = 0; i < ec.size(); ++i) {
    for (std::size_t j = 0; j < er.size(); ++j) {
      const double s = dot(ec[i], er[j]);
      best_c[i] = std::max(best_c[i], s);
      best_r[j] = std::max(best_r[j], s);
    }
  }
  double p = 0.0, r = 0.0;
  for (double v : best_c) p += v;
  for (double v : best_r) r += v;
  p /= static_cast<double>(best_c.size());
  r /= static_cast<double>(best_r.size());
  if (p + r <= 0.0) return 0.0;
  return std::max(0.0, 100.0 * 2.0 * p * r / (p + r));
}

MetricReport evaluate_testset(const std::vector<std::string>& outputs, const std::vector<std::string>& references,
                              Embedder* embedder, std::size_t jobs) {
  if (outputs.size() != references.size()) {
    throw Error(Errc::alignment, fmt::format("{} outputs but {} references", outputs.size(), references.size()));
  }
  if (outputs.empty()) throw Error(Errc::precondition, "nothing to evaluate");

  struct Item {
    double bleu2, bleu3, rouge, meteor;
    std::optional<double> bert;
    bool empty;
  };
  std::vector<Tokens> out_tokens(outputs.size());
  std::vector<Item> items(outputs.size());
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < outputs.size(); i = next++) {
      out_tokens[i] = text::metric_tokens(outputs[i]);
      const Tokens ref = text::metric_tokens(references[i]);
      Item& it = items[i];
      it.bleu2 = bleu_n(out_tokens[i], ref, 2, &it.empty);
      it.bleu3 = bleu_n(out_tokens[i], ref, 3);
      it.rouge = rouge_l(out_tokens[i], ref);
      it.meteor = meteor(out_tokens[i], ref);
      if (embedder) it.bert = embed_score(out_tokens[i], ref, *embedder);
    }
  };
  // Embedders are not required to be thread-safe.
  const std::size_t n_jobs = embedder ? 1 : std::clamp<std::size_t>(jobs, 1, outputs.size());
  if (n_jobs == 1) {
    worker();
  } else {
    std::vector<std::jthread> pool;
    for (std::size_t j = 0; j < n_jobs; ++j) pool.emplace_back(worker);
  }

  MetricReport r;
  r.items = outputs.size();
  double bert_sum = 0.0;
  bool bert_ok = embedder != nullptr;
  for (const auto& it : items) {
    r.bleu2 += it.bleu2;
    r.bleu3 += it.bleu3;
    r.rouge_l += it.rouge;
    r.meteor += it.meteor;
    if (it.empty) ++r.empty_outputs;
    if (it.bert) {
      bert_sum += *it.bert;
    } else {
      bert_ok = false;
    }
  }
  const double n = static_cast<double>(outputs.size());
  r.bleu2 /= n;
  r.bleu3 /= n;
  r.rouge_l /= n;
  r.meteor /= n;
  if (bert_ok) r.bert_score = bert_sum / n;
  if (embedder) r.embedder = embedder->describe();
  r.distinct2 = distinct_n(out_tokens, 2);
  r.distinct3 = distinct_n(out_tokens, 3);
  return r;
}

std::string format_report(const MetricReport& r) {
  std::string out;
  out += "# METEOR: exact + Porter-stem unigram matching, no synonym tables\n";
  out += "# BERTScore: raw greedy-cosine F1, no baseline rescaling";
  out += r.embedder.empty() ? "\n" : fmt::format(", embedder {}\n", r.embedder);
  out += fmt::format("# items = {}, empty outputs = {}\n", r.items, r.empty_outputs);
  out += fmt::format("BLEU-2 = {:.2f}\n", r.bleu2);
  out += fmt::format("BLEU-3 = {:.2f}\n", r.bleu3);
  out += fmt::format("ROUGE-L = {:.2f}\n", r.rouge_l);
  out += fmt::format("METEOR = {:.2f}\n", r.meteor);
  out += r.bert_score ? fmt::format("BERTScore = {:.2f}\n", *r.bert_score) : std::string("BERTScore = absent\n");
  out += fmt::format("Distinct-2 = {:.2f}\n", r.distinct2);
  out += fmt::format("Distinct-3 = {:.2f}\n", r.distinct3);
  return out;
}

std::vector<std::pair<std::string, std::size_t>> phrase_frequency(const std::vector<std::string>& responses,
                                                                  int low, int high, std::size_t k) {
  if (low < 1 || low > high) throw Error(Errc::precondition, "phrase length range must satisfy 1 <= low <= high");
  std::map<std::string, std::size_t> counts;
  for (const auto& response : responses) {
    const Tokens tokens = text::metric_tokens(response);
    for (int n = low; n <= high; ++n) {
      for (const auto& [gram, count] : ngram_counts(tokens, static_cast<std::size_t>(n))) {
        counts[text::join(gram)] += count;
      }
    }
  }
  std::vector<std::pair<std::string, std::size_t>> out(counts.begin(), counts.end());
  std::stable_sort(out.begin(), out.end(), [](const auto& a, const auto& b) { return a.second > b.second; });
  if (out.size() > k) out.resize(k);
  return out;
}

Histogram histogram01(const std::vector<double>& values, std::size_t bins) {
  if (bins == 0) throw Error(Errc::precondition, "histogram needs at least one bin");
  Histogram h;
  for (std::size_t i = 0; i <= bins; ++i) h.edges.push_back(static_cast<double>(i) / static_cast<double>(bins));
  h.counts.assign(bins, 0);
  for (double v : values) {
    std::size_t bin = 0;
    if (v < 0.0) {
      ++h.clamped;
    } else {
      bin = std::min(bins - 1, static_cast<std::size_t>(v * static_cast<double>(bins)));
    }
    ++h.counts[bin];
  }
  return h;
}

double text_similarity(const std::string& a, const std::string& b, Embedder& embedder) {
  const auto ta = text::metric_tokens(a);
  const auto tb = text::metric_tokens(b);
  if (ta.empty() || tb.empty()) return 0.0;
  return cosine(mean_pool(embedder.embed(ta)), mean_pool(embedder.embed(tb)));
}

Histogram pair_similarity_distribution(const std::vector<synth::PreferencePair>& pairs, Embedder& embedder,
                                       std::size_t bins) {
  std::vector<double> sims;
  sims.reserve(pairs.size());
  for (const auto& p : pairs) sims.push_back(text_similarity(p.chosen, p.rejected, embedder));
  return histogram01(sims, bins);
}

double user_relevance(const std::string& response, const DialogueContext& context, Embedder& embedder) {
  const std::string seeker = seeker_text(context);
  if (seeker.empty()) throw Error(Errc::precondition, "context has no seeker utterance");
  return text_similarity(response, seeker, embedder);
}

}  // namespace selfevo::metrics
