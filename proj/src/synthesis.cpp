#include "selfevo/synthesis.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <fstream>
#include <thread>

#include <spdlog/spdlog.h>

#include "selfevo/error.hpp"
#include "selfevo/text.hpp"

namespace selfevo::synth {
namespace {

using nlohmann::json;

std::vector<llm::ChatMessage> context_prompt(const std::string& template_name, const DialogueContext& context) {
  auto messages = llm::render_prompt(llm::builtin_template(template_name), {});
  for (auto& m : llm::to_chat(context.utterances)) messages.push_back(std::move(m));
  return messages;
}

std::string context_label(const DialogueContext& context) {
  return context.session_id + "#" + std::to_string(context.turn);
}

int parse_score(const json& value) {
  double v = 0.0;
  if (value.is_number()) {
    v = value.get<double>();
  } else if (value.is_string()) {
    try {
      std::size_t used = 0;
      const std::string s = text::trim(value.get<std::string>());
      v = std::stod(s, &used);
      if (used != s.size()) throw Error(Errc::schema, "evaluation_score is not numeric");
    } catch (const std::logic_error&) {
      throw Error(Errc::schema, "evaluation_score is not numeric");
    }
  } else {
    throw Error(Errc::schema, "evaluation_score is not numeric");
  }
  if (v != std::floor(v) || v < 1.0 || v > 5.0) {
    throw Error(Errc::schema, "evaluation_score must be an integer in [1, 5]");
  }
  return static_cast<int>(v);
}

std::string required_string(const json& object, const char* field) {
  auto it = object.find(field);
  if (it == object.end()) throw Error(Errc::schema, std::string("missing field '") + field + "'");
  if (!it->is_string()) throw Error(Errc::schema, std::string("field '") + field + "' is not a string");
  std::string value = text::trim(it->get<std::string>());
  if (value.empty()) throw Error(Errc::schema, std::string("field '") + field + "' is empty");
  return value;
}

json utterance_json(const Utterance& u) {
  json j = {{"role", to_string(u.role)}, {"text", u.text}};
  if (u.strategy) j["strategy"] = to_string(*u.strategy);
  return j;
}

json reflection_json(const ReflectionRecord& r) {
  return {{"user_profile", r.user_profile},
          {"user_emotion", r.user_emotion},
          {"user_personality", r.user_personality},
          {"user_intention", r.user_intention}};
}

/// Result of one work item before aggregation.
struct ItemOutcome {
  std::optional<PreferencePair> pair;
  bool parse_fallback = false;
  bool length_substitution = false;
  bool dropped = false;
};

struct WorkItem {
  DialogueContext context;
  std::string golden;
};

ItemOutcome run_item(const WorkItem& item, const llm::ModelHandle& generator, const llm::ModelHandle& refiner,
                     int iteration, const SynthesisOptions& options) {
  ItemOutcome out;
  const auto& ctx = item.context;
  std::string rejected;
  try {
    rejected = generate_rejected(generator, ctx, options.params, options.rejected_template);
  } catch (const Error& e) {
    spdlog::warn("{}: rejected generation failed: {}", context_label(ctx), e.what());
    out.dropped = true;
    return out;
  }
  if (rejected.empty()) {
    spdlog::warn("{}: empty rejected response", context_label(ctx));
    out.dropped = true;
    return out;
  }

  std::optional<ReflectionRecord> reflection;
  std::optional<RefinementRecord> refinement;
  try {
    if (options.mode == SynthesisMode::two_stage) {
      reflection = reflect(refiner, ctx, options.params, options.max_attempts);
      if (reflection || options.allow_unscaffolded) {
        refinement = refine(refiner, ctx, reflection ? &*reflection : nullptr, rejected, options.params,
                            options.max_attempts);
      }
    } else {
      refinement = refine(refiner, ctx, nullptr, rejected, options.params, options.max_attempts);
      if (refinement) reflection = refinement->understanding;
    }
  } catch (const Error& e) {
    spdlog::warn("{}: refinement failed: {}", context_label(ctx), e.what());
    out.dropped = true;
    return out;
  }

  PreferencePair pair;
  pair.context = ctx;
  pair.rejected = rejected;
  pair.golden = item.golden;
  pair.iteration = iteration;
  pair.reflection = reflection;
  if (refinement) {
    auto [chosen, provenance] = length_normalize(refinement->refined_response, rejected, item.golden);
    pair.chosen = std::move(chosen);
    pair.chosen_provenance = provenance;
    pair.feedback = refinement->feedback;
    pair.evaluation_score = refinement->evaluation_score;
    out.length_substitution = provenance == Provenance::golden_substitution;
  } else {
    pair.chosen = item.golden;
    pair.chosen_provenance = Provenance::golden_substitution;
    out.parse_fallback = true;
  }

  if (pair.chosen == pair.rejected) {
    spdlog::debug("{}: chosen equals rejected, dropped", context_label(ctx));
    out.dropped = true;
    return out;
  }
  out.pair = std::move(pair);
  return out;
}

}  // namespace

std::string_view to_string(Provenance provenance) {
  return provenance == Provenance::self_refined ? "self_refined" : "golden_substitution";
}

std::optional<Provenance> parse_provenance(std::string_view name) {
  if (name == "self_refined") return Provenance::self_refined;
  if (name == "golden_substitution") return Provenance::golden_substitution;
  return std::nullopt;
}

std::string generate_rejected(const llm::ModelHandle& model, const DialogueContext& context,
                              const llm::GenerationParams& params, const std::string& template_name) {
  if (context.utterances.empty() || context.utterances.back().role != Role::seeker) {
    throw Error(Errc::precondition, "context " + context_label(context) + " does not end with a seeker utterance");
  }
  std::string raw;
  try {
    raw = model.complete(context_prompt(template_name, context), params);
  } catch (const BackendError& e) {
    throw BackendError(context_label(context) + ": " + e.what(), e.retryable());
  }
  if (template_name == "vanilla") return text::trim(raw);
  // The strategy templates answer with {strategy, text}; keep only the text.
  try {
    return text::trim(llm::parse_json_block(raw, {"text"}).at("text").get<std::string>());
  } catch (const std::exception&) {
    return text::trim(raw);
  }
}

ReflectionRecord parse_reflection(const json& understanding, std::size_t turn) {
  if (!understanding.is_object()) throw Error(Errc::schema, "understanding is not an object");
  ReflectionRecord r;
  r.user_profile = required_string(understanding, "user_profile");
  r.user_emotion = required_string(understanding, "user_emotion");
  r.user_personality = required_string(understanding, "user_personality");
  r.user_intention = required_string(understanding, "user_intention");
  r.turn = turn;
  return r;
}

RefinementRecord parse_refinement(std::string_view text, std::size_t turn) {
  const json j = llm::parse_json_block(text, {"understanding", "evaluation_score", "feedback", "refined_response"});
  RefinementRecord r;
  r.understanding = parse_reflection(j.at("understanding"), turn);
  r.evaluation_score = parse_score(j.at("evaluation_score"));
  r.feedback = required_string(j, "feedback");
  r.refined_response = required_string(j, "refined_response");
  return r;
}

std::optional<ReflectionRecord> reflect(const llm::ModelHandle& model, const DialogueContext& context,
                                        const llm::GenerationParams& params, int max_attempts) {
  const auto messages =
      llm::render_prompt(llm::builtin_template("reflection"), {{"dialogue", render_dialogue(context.utterances)}});
  llm::GenerationParams p = params;
  for (int attempt = 0; attempt < max_attempts; ++attempt) {
    p.sample_index = params.sample_index + attempt;
    const std::string raw = model.complete(messages, p);
    try {
      return parse_reflection(llm::parse_json_block(raw, {"understanding"}).at("understanding"), context.turn);
    } catch (const Error& e) {
      spdlog::debug("{}: reflection attempt {} rejected: {}", context_label(context), attempt + 1, e.what());
    }
  }
  spdlog::info("{}: reflection unavailable after {} attempts", context_label(context), max_attempts);
  return std::nullopt;
}

std::optional<RefinementRecord> refine(const llm::ModelHandle& model, const DialogueContext& context,
                                       const ReflectionRecord* reflection, const std::string& rejected,
                                       const llm::GenerationParams& params, int max_attempts) {
  if (text::trim(rejected).empty()) throw Error(Errc::precondition, "rejected response is empty");
  std::map<std::string, std::string> bindings = {{"dialogue", render_dialogue(context.utterances)},
                                                 {"response", rejected}};
  std::string name = "refinement";
  if (reflection) {
    name = "refinement_guided";
    bindings["understanding"] = reflection_json(*reflection).dump(4);
  }
  const auto messages = llm::render_prompt(llm::builtin_template(name), bindings);
  llm::GenerationParams p = params;
  for (int attempt = 0; attempt < max_attempts; ++attempt) {
    p.sample_index = params.sample_index + attempt;
    const std::string raw = model.complete(messages, p);
    try {
      auto record = parse_refinement(raw, context.turn);
      if (reflection) record.understanding = *reflection;
      return record;
    } catch (const Error& e) {
      spdlog::debug("{}: refinement attempt {} rejected: {}", context_label(context), attempt + 1, e.what());
    }
  }
  spdlog::info("{}: refinement unavailable after {} attempts", context_label(context), max_attempts);
  return std::nullopt;
}

std::pair<std::string, Provenance> length_normalize(const std::string& chosen, const std::string& rejected,
                                                    const std::string& golden) {
  if (text::token_length(chosen) > 2 * text::token_length(rejected)) {
    return {golden, Provenance::golden_substitution};
  }
  return {chosen, Provenance::self_refined};
}

bool satisfies_invariants(const PreferencePair& pair) {
  const auto& u = pair.context.utterances;
  if (u.empty() || u.back().role != Role::seeker) return false;
  if (pair.chosen.empty() || pair.rejected.empty() || pair.chosen == pair.rejected) return false;
  if (pair.chosen_provenance == Provenance::golden_substitution) {
    if (pair.chosen != pair.golden) return false;
  } else if (text::token_length(pair.chosen) > 2 * text::token_length(pair.rejected)) {
    return false;
  }
  if (pair.evaluation_score && (*pair.evaluation_score < 1 || *pair.evaluation_score > 5)) return false;
  if (pair.reflection) {
    const auto& r = *pair.reflection;
    if (r.user_profile.empty() || r.user_emotion.empty() || r.user_personality.empty() || r.user_intention.empty()) {
      return false;
    }
  }
  return true;
}

SynthesisResult build_pairs(const std::vector<DialogueSession>& sessions, const llm::ModelHandle& generator,
                            const llm::ModelHandle& refiner, int iteration, const SynthesisOptions& options) {
  if (iteration < 0) throw Error(Errc::precondition, "iteration must be >= 0");
  options.params.validate();

  SynthesisResult result;
  std::vector<WorkItem> items;
  std::vector<const DialogueSession*> ordered;
  for (const auto& s : sessions) ordered.push_back(&s);
  std::stable_sort(ordered.begin(), ordered.end(),
                   [](const auto* a, const auto* b) { return a->session_id < b->session_id; });

  for (const auto* session : ordered) {
    const auto indices = corpus::eligible_turn_indices(*session, options.turn_unit);
    result.report.greeting_skips += corpus::exchange_count(*session) - indices.size();
    for (auto& ctx : corpus::extract_contexts(*session, indices)) {
      auto golden = corpus::golden_response(*session, ctx.turn - 1);
      if (!golden) {
        ++result.report.greeting_skips;
        continue;
      }
      items.push_back({std::move(ctx), std::move(*golden)});
    }
  }
  result.report.attempted = items.size();

  std::vector<ItemOutcome> outcomes(items.size());
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < items.size(); i = next++) {
      outcomes[i] = run_item(items[i], generator, refiner, iteration, options);
    }
  };
  const std::size_t jobs = std::clamp<std::size_t>(options.jobs, 1, std::max<std::size_t>(items.size(), 1));
  if (jobs == 1) {
    worker();
  } else {
    std::vector<std::jthread> pool;
    for (std::size_t j = 0; j < jobs; ++j) pool.emplace_back(worker);
  }

  for (auto& o : outcomes) {
    if (o.parse_fallback) ++result.report.parse_fallbacks;
    if (o.dropped) {
      ++result.report.dropped;
      continue;
    }
    if (o.length_substitution) ++result.report.length_substitutions;
    result.pairs.push_back(std::move(*o.pair));
    ++result.report.pairs_emitted;
  }
  return result;
}

json to_json(const PreferencePair& pair) {
  json context = json::array();
  for (const auto& u : pair.context.utterances) context.push_back(utterance_json(u));
  json j = {{"session_id", pair.context.session_id},
            {"n", pair.context.turn},
            {"iteration", pair.iteration},
            {"context", std::move(context)},
            {"rejected", pair.rejected},
            {"chosen", pair.chosen},
            {"golden", pair.golden},
            {"chosen_provenance", to_string(pair.chosen_provenance)}};
  if (pair.reflection) j["reflection"] = reflection_json(*pair.reflection);
  if (pair.feedback) j["feedback"] = *pair.feedback;
  if (pair.evaluation_score) j["evaluation_score"] = *pair.evaluation_score;
  return j;
}

PreferencePair pair_from_json(const json& record) {
  try {
    PreferencePair p;
    p.context.session_id = record.at("session_id").get<std::string>();
    p.context.turn = record.at("n").get<std::size_t>();
    for (const auto& u : record.at("context")) {
      Utterance utt;
      auto role = parse_role(u.at("role").get<std::string>());
      if (!role) throw Error(Errc::schema, "unknown role in pair context");
      utt.role = *role;
      utt.text = u.at("text").get<std::string>();
      if (auto s = u.find("strategy"); s != u.end() && !s->is_null()) utt.strategy = parse_strategy(s->get<std::string>());
      utt.turn_index = p.context.utterances.size();
      p.context.utterances.push_back(std::move(utt));
    }
    p.rejected = record.at("rejected").get<std::string>();
    p.chosen = record.at("chosen").get<std::string>();
    p.golden = record.value("golden", std::string());
    p.iteration = record.value("iteration", 0);
    auto prov = parse_provenance(record.at("chosen_provenance").get<std::string>());
    if (!prov) throw Error(Errc::schema, "unknown chosen_provenance");
    p.chosen_provenance = *prov;
    if (auto r = record.find("reflection"); r != record.end() && !r->is_null()) {
      p.reflection = parse_reflection(*r, p.context.turn);
    }
    if (auto f = record.find("feedback"); f != record.end() && !f->is_null()) p.feedback = f->get<std::string>();
    if (auto s = record.find("evaluation_score"); s != record.end() && !s->is_null()) {
      p.evaluation_score = s->get<int>();
    }
    return p;
  } catch (const nlohmann::json::exception& e) {
    throw Error(Errc::schema, std::string("malformed preference pair: ") + e.what());
  }
}

json to_json(const SynthesisReport& r) {
  return {{"attempted", r.attempted},       {"pairs_emitted", r.pairs_emitted},
          {"parse_fallbacks", r.parse_fallbacks}, {"length_substitutions", r.length_substitutions},
          {"greeting_skips", r.greeting_skips}, {"dropped", r.dropped}};
}

void write_pairs(const std::filesystem::path& path, const std::vector<PreferencePair>& pairs) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(Errc::path, "cannot write " + path.string());
  for (const auto& p : pairs) out << to_json(p).dump() << '\n';
}

std::vector<PreferencePair> read_pairs(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(Errc::path, "cannot open " + path.string());
  std::vector<PreferencePair> out;
  std::string line;
  for (std::size_t lineno = 1; std::getline(in, line); ++lineno) {
    if (text::trim(line).empty()) continue;
    try {
      out.push_back(pair_from_json(json::parse(line)));
    } catch (const json::parse_error& e) {
      throw Error(Errc::schema, path.string() + ":" + std::to_string(lineno) + ": " + e.what());
    } catch (const Error& e) {
      throw Error(e.code(), path.string() + ":" + std::to_string(lineno) + ": " + e.what());
    }
  }
  return out;
}

}  // namespace selfevo::synth
