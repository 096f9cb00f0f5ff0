#include <gmock/gmock.h>
#include <gtest/gtest.h>

#include "selfevo/error.hpp"
#include "selfevo/judge.hpp"
#include "test_util.hpp"

using namespace selfevo;
using namespace selfevo::judge;
using selfevo::testing::Gen;

namespace {

DialogueContext conversation() {
  DialogueContext c;
  c.session_id = "j";
  c.utterances = {{Role::seeker, "I failed my exam.", std::nullopt, 0},
                  {Role::supporter, "That sounds really hard.", std::nullopt, 1},
                  {Role::seeker, "I don't know what to tell my parents.", std::nullopt, 2}};
  c.turn = 2;
  return c;
}

/// Judge that answers attempt i (sample index i) with replies[i].
llm::ModelHandle judge_with(std::vector<std::string> replies, std::vector<int>* indices = nullptr) {
  auto backend = std::make_shared<llm::ScriptedBackend>(
      [replies, indices](std::span<const llm::ChatMessage>, const llm::GenerationParams& p) -> std::optional<std::string> {
        if (indices) indices->push_back(p.sample_index);
        return replies.at(static_cast<std::size_t>(p.sample_index));
      });
  return llm::ModelHandle("judge", backend);
}

JudgeResult verdict(Dimension d, double score) {
  JudgeResult r;
  r.dimension = d;
  r.attempts = 1;
  r.verdict = JudgeVerdict{d, score, "fine", "raw", 1, false};
  return r;
}

Errc code_of(const std::function<void()>& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  ADD_FAILURE() << "no error thrown";
  return Errc::schema;
}

}  // namespace

TEST(Dimensions, ExactlySevenRoundTrip) {
  EXPECT_EQ(kDimensions.size(), 7u);
  for (auto d : kDimensions) EXPECT_EQ(parse_dimension(to_string(d)), d);
  EXPECT_EQ(to_string(Dimension::informativeness), "informativeness");
  EXPECT_FALSE(parse_dimension("fluency").has_value());
}

TEST(RenderJudgePrompt, RubricTextAndSlots) {
  const auto coherence = render_judge_prompt(Dimension::coherence, conversation(), "Let's plan it together.");
  std::string all;
  for (const auto& m : coherence) all += m.content;
  EXPECT_THAT(all, ::testing::HasSubstr("Exemplary logical flow"));
  EXPECT_THAT(all, ::testing::HasSubstr("I don't know what to tell my parents."));
  EXPECT_THAT(all, ::testing::HasSubstr("Let's plan it together."));
  EXPECT_THAT(all, ::testing::Not(::testing::HasSubstr("{{")));

  std::string overall;
  for (const auto& m : render_judge_prompt(Dimension::overall, conversation(), "ok")) overall += m.content;
  EXPECT_THAT(overall, ::testing::HasSubstr("Strategy application alignment"));
}

TEST(RenderJudgePrompt, EmptyResponseIsPrecondition) {
  EXPECT_EQ(code_of([] { render_judge_prompt(Dimension::empathy, conversation(), ""); }), Errc::precondition);
}

TEST(ParseJudgement, Formats) {
  auto p = parse_judgement(R"({"Explanation": "ok", "Score": 4})");
  EXPECT_EQ(p.score, 4.0);
  EXPECT_EQ(p.explanation, "ok");
  p = parse_judgement("```json\n{\"explanation\": \"fine\", \"score\": \"3.5\"}\n```");
  EXPECT_EQ(p.score, 3.5);
  p = parse_judgement("Explanation: clear and warm\nScore: 4.5");
  EXPECT_EQ(p.score, 4.5);
  EXPECT_EQ(p.explanation, "clear and warm");
  p = parse_judgement("**Score:** 2");
  EXPECT_EQ(p.score, 2.0);
  EXPECT_FALSE(parse_judgement("I would give it a good mark.").score.has_value());
  EXPECT_FALSE(parse_judgement(R"({"Explanation": "x", "Score": "high"})").score.has_value());
}

TEST(JudgeResponse, ScriptedScore) {
  const auto r = judge_response(judge_with({R"({"Explanation":"ok","Score":4})"}), Dimension::coherence,
                                conversation(), "Let's plan it.");
  ASSERT_TRUE(r.verdict.has_value());
  EXPECT_EQ(r.verdict->score, 4.0);
  EXPECT_EQ(r.verdict->explanation, "ok");
  EXPECT_EQ(r.verdict->attempts, 1);
  EXPECT_FALSE(r.verdict->clamped);
}

TEST(JudgeResponse, OutOfRangeThenValidRetries) {
  std::vector<int> indices;
  const auto r = judge_response(judge_with({R"({"Explanation":"a","Score":7})", R"({"Explanation":"b","Score":3})"},
                                           &indices),
                                Dimension::empathy, conversation(), "x");
  ASSERT_TRUE(r.verdict.has_value());
  EXPECT_EQ(r.verdict->score, 3.0);
  EXPECT_EQ(r.verdict->attempts, 2);
  EXPECT_EQ(indices, (std::vector<int>{0, 1}));
}

TEST(JudgeResponse, ProseThreeTimesIsUnavailable) {
  const auto r = judge_response(judge_with({"nice", "very nice", "great"}), Dimension::overall, conversation(), "x");
  EXPECT_FALSE(r.verdict.has_value());
  EXPECT_EQ(r.attempts, 3);
  EXPECT_EQ(r.last_raw, "great");
}

TEST(JudgeResponse, PersistentOutOfRangeClamps) {
  const auto r = judge_response(judge_with({"Score: 9", "nothing", "Score: -2"}), Dimension::helpfulness,
                                conversation(), "x");
  ASSERT_TRUE(r.verdict.has_value());
  EXPECT_EQ(r.verdict->score, 0.0);
  EXPECT_TRUE(r.verdict->clamped);
  EXPECT_EQ(r.verdict->attempts, 3);
  EXPECT_EQ(r.verdict->explanation, "(no explanation given)");
}

TEST(JudgeResponse, BoundaryScoresAccepted) {
  for (const char* s : {"Score: 0", "Score: 5", "Score: 5.0"}) {
    const auto r = judge_response(judge_with({s}), Dimension::coherence, conversation(), "x");
    ASSERT_TRUE(r.verdict.has_value()) << s;
    EXPECT_FALSE(r.verdict->clamped);
    EXPECT_EQ(r.attempts, 1);
  }
}

TEST(JudgeResponse, PropertyVerdictAlwaysInRange) {
  Gen g(31);
  for (int i = 0; i < 200; ++i) {
    std::vector<std::string> replies;
    for (int k = 0; k < 3; ++k) {
      switch (g.integer(0, 2)) {
        case 0: replies.push_back("prose only"); break;
        case 1: replies.push_back("Score: " + std::to_string(g.real(-10.0, 15.0))); break;
        default: replies.push_back(R"({"Explanation":"e","Score":)" + std::to_string(g.integer(-3, 8)) + "}");
      }
    }
    const auto r = judge_response(judge_with(replies), Dimension::engagement, conversation(), "x");
    if (r.verdict) {
      ASSERT_GE(r.verdict->score, 0.0);
      ASSERT_LE(r.verdict->score, 5.0);
      ASSERT_FALSE(r.verdict->explanation.empty());
    }
  }
}

TEST(JudgeDefaults, DecodingParameters) {
  const auto p = llm::GenerationParams::judge_defaults();
  EXPECT_EQ(p.temperature, 0.8);
  EXPECT_EQ(p.top_p, 0.95);
  EXPECT_EQ(p.top_k, 50);
}

TEST(Aggregate, MeansAndUnavailable) {
  JudgeResult missing;
  missing.dimension = Dimension::coherence;
  missing.attempts = 3;
  const auto t = aggregate_judgments({verdict(Dimension::coherence, 4), verdict(Dimension::coherence, 2), missing,
                                      verdict(Dimension::empathy, 5)});
  EXPECT_EQ(t.at(Dimension::coherence).mean, 3.0);
  EXPECT_EQ(t.at(Dimension::coherence).count, 2u);
  EXPECT_EQ(t.at(Dimension::coherence).unavailable, 1u);
  EXPECT_EQ(t.at(Dimension::empathy).mean, 5.0);
  EXPECT_EQ(format_aggregate(t),
            "coherence = 3.00\ncoherence.count = 2\ncoherence.unavailable = 1\n"
            "empathy = 5.00\nempathy.count = 1\nempathy.unavailable = 0\n");
}

TEST(Aggregate, Errors) {
  EXPECT_EQ(code_of([] { aggregate_judgments({}); }), Errc::precondition);
  JudgeResult missing;
  try {
    aggregate_judgments({missing, missing});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::unavailable);
    EXPECT_THAT(e.what(), ::testing::HasSubstr("zero usable"));
  }
}

TEST(Aggregate, PropertyOrderIndependent) {
  Gen g(32);
  for (int i = 0; i < 50; ++i) {
    std::vector<JudgeResult> rs;
    for (std::size_t k = 0, n = g.size(1, 30); k < n; ++k) {
      rs.push_back(verdict(g.pick(std::vector<Dimension>(kDimensions.begin(), kDimensions.end())),
                           static_cast<double>(g.integer(0, 5))));
    }
    auto shuffled = rs;
    std::shuffle(shuffled.begin(), shuffled.end(), g.engine());
    const auto a = aggregate_judgments(rs), b = aggregate_judgments(shuffled);
    ASSERT_EQ(a.size(), b.size());
    for (const auto& [d, row] : a) ASSERT_NEAR(row.mean, b.at(d).mean, 1e-12);
  }
}

TEST(Pearson, Examples) {
  const std::vector<double> x = {1, 2, 3};
  EXPECT_DOUBLE_EQ(pearson(x, x), 1.0);
  EXPECT_DOUBLE_EQ(pearson(x, std::vector<double>{-1, -2, -3}), -1.0);
  // cov = 1.5, var x = 1, var y = 7/3 (sample): r = 1.5 / sqrt(7/3).
  EXPECT_NEAR(pearson(x, std::vector<double>{2, 4, 5}), 1.5 / std::sqrt(7.0 / 3.0), 1e-15);
  EXPECT_NEAR(pearson(x, std::vector<double>{2, 4, 5}), 0.981, 1e-3);
}

TEST(Pearson, Errors) {
  EXPECT_EQ(code_of([] { pearson(std::vector<double>{1, 2}, std::vector<double>{3, 3}); }),
            Errc::undefined_correlation);
  EXPECT_EQ(code_of([] { pearson(std::vector<double>{1}, std::vector<double>{1}); }), Errc::precondition);
  EXPECT_EQ(code_of([] { pearson(std::vector<double>{1, 2}, std::vector<double>{1}); }), Errc::precondition);
}

TEST(Pearson, PropertySymmetricAndAffineInvariant) {
  Gen g(33);
  for (int i = 0; i < 300; ++i) {
    std::vector<double> x, y;
    for (std::size_t k = 0, n = g.size(2, 30); k < n; ++k) {
      x.push_back(g.real(-5, 5));
      y.push_back(g.real(-5, 5));
    }
    if (x[0] == x[1] && y[0] == y[1]) continue;
    const double r = pearson(x, y);
    ASSERT_GE(r, -1.0);
    ASSERT_LE(r, 1.0);
    ASSERT_NEAR(r, pearson(y, x), 1e-12);
    const double a = g.real(0.1, 10), b = g.real(-10, 10);
    std::vector<double> ax;
    for (double v : x) ax.push_back(a * v + b);
    ASSERT_NEAR(pearson(ax, y), r, 1e-9);
  }
}

TEST(Items, ReadSampleAndSerialize) {
  selfevo::testing::TempDir dir("judge");
  std::string doc;
  for (int i = 0; i < 10; ++i) {
    doc += R"({"item_id":"it)" + std::to_string(i) +
           R"(","conversation":[{"role":"seeker","text":"hi"},{"speaker":"supporter","content":"hello"},)"
           R"({"role":"seeker","text":"I am tired"}],"response":"Rest helps."})" "\n";
  }
  selfevo::testing::spit(dir / "items.jsonl", doc);
  const auto items = read_items(dir / "items.jsonl");
  ASSERT_EQ(items.size(), 10u);
  EXPECT_EQ(items[3].item_id, "it3");
  EXPECT_EQ(items[3].conversation.utterances.size(), 3u);
  EXPECT_EQ(items[3].conversation.turn, 2u);
  EXPECT_EQ(items[3].response, "Rest helps.");

  const auto s = sample_items(items, 4, 7);
  ASSERT_EQ(s.size(), 4u);
  EXPECT_TRUE(std::is_sorted(s.begin(), s.end(), [](const auto& a, const auto& b) { return a.item_id < b.item_id; }));
  EXPECT_EQ(sample_items(items, 4, 7)[2].item_id, s[2].item_id);
  EXPECT_EQ(sample_items(items, 100, 7).size(), 10u);

  const auto j = to_json("it1", verdict(Dimension::empathy, 4.5));
  EXPECT_EQ(j["dimension"], "empathy");
  EXPECT_EQ(j["score"], 4.5);
  EXPECT_EQ(j["available"], true);
  JudgeResult missing;
  missing.last_raw = "prose";
  EXPECT_EQ(to_json("it2", missing)["available"], false);
  EXPECT_FALSE(to_json("it2", missing).contains("score"));
}

TEST(Items, Errors) {
  selfevo::testing::TempDir dir("judge-bad");
  selfevo::testing::spit(dir / "bad.jsonl", "{\"conversation\":[],\"response\":\"x\"}\n{not json\n");
  try {
    read_items(dir / "bad.jsonl");
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::schema);
    EXPECT_THAT(e.what(), ::testing::HasSubstr(":2:"));
  }
  EXPECT_EQ(code_of([&] { read_items(dir / "missing.jsonl"); }), Errc::path);
}

TEST(HumanScores, Read) {
  selfevo::testing::TempDir dir("human");
  selfevo::testing::spit(dir / "h.jsonl", R"({"item_id":"a","dimension":"empathy","score":4})" "\n"
                                          R"({"item_id":"b","dimension":"overall","score":2.5})" "\n");
  const auto h = read_human_scores(dir / "h.jsonl");
  EXPECT_EQ(h.size(), 2u);
  EXPECT_EQ(h.at({"b", Dimension::overall}), 2.5);
  selfevo::testing::spit(dir / "bad.jsonl", R"({"item_id":"a","dimension":"fluency","score":4})" "\n");
  EXPECT_THROW(read_human_scores(dir / "bad.jsonl"), Error);
}
