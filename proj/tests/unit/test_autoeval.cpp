#include <doctest.h>

#include "refine_loop/autoeval/autoeval.hpp"
#include "refine_loop/core/error.hpp"
#include "test_support.hpp"

using namespace refine_loop;
using nlohmann::json;

namespace {

std::string judge_reply(int a, int c, int r) {
  return json{{"Accuracy", {{"score", a}, {"explanation", "ea"}}},
              {"completeness", {{"score", c}, {"explanation", "ec"}}},
              {"readability", r}}
      .dump();
}

LlmHandle scripted(std::vector<std::string> replies, std::shared_ptr<std::vector<ChatRequest>> seen = nullptr) {
  auto counter = std::make_shared<std::atomic<std::size_t>>(0);
  LlmHandle h;
  h.seed = 100;
  h.policy = RetryPolicy{1, 1, 1.0};
  h.backend = std::make_shared<CallbackBackend>("judge", [=](const ChatRequest& r) {
    if (seen) seen->push_back(r);
    return replies.at((*counter)++ % replies.size());
  });
  return h;
}

Summary one_sentence() { return make_summary("alice_bob", {"Alice added Bob to the reader group."}); }

}  // namespace

TEST_CASE("mean_std uses the sample deviation") {
  CHECK(mean_std(std::vector<double>{4}).std == 0.0);
  const MeanStd m = mean_std(std::vector<double>{3, 4, 5});
  CHECK(m.mean == doctest::Approx(4.0));
  CHECK(m.std == doctest::Approx(1.0));
  CHECK_THROWS_AS(mean_std(std::vector<double>{}), Error);
}

TEST_CASE("parse_judge_reply accepts nested and flat scores") {
  const JudgeReply r = parse_judge_reply(judge_reply(5, 4, 3));
  CHECK(r.scores == std::array<int, 3>{5, 4, 3});
  CHECK(r.explanations[0] == "ea");
  CHECK(parse_judge_reply(R"({"accuracy": "2", "completeness": 3, "readability": 4})").scores[0] == 2);
  for (const char* bad : {R"({"accuracy": 6, "completeness": 3, "readability": 4})",
                          R"({"accuracy": 0, "completeness": 3, "readability": 4})",
                          R"({"accuracy": 2.5, "completeness": 3, "readability": 4})"}) {
    try {
      parse_judge_reply(bad);
      FAIL("expected ScoreOutOfRange");
    } catch (const Error& e) {
      CHECK(e.kind() == ErrorKind::ScoreOutOfRange);
    }
  }
  CHECK_THROWS_AS(parse_judge_reply(R"({"accuracy": 2, "completeness": 3})"), Error);
}

TEST_CASE("judge_summary runs k times with distinct seeds and aggregates") {
  auto seen = std::make_shared<std::vector<ChatRequest>>();
  const LlmHandle h = scripted({judge_reply(5, 4, 3), judge_reply(4, 4, 3), judge_reply(3, 4, 3)}, seen);
  const DimensionScores s =
      judge_summary(testing::alice_bob(), one_sentence(), testing::prompts().get("judge"), h, 3);
  CHECK(s[Dimension::Accuracy].runs == std::vector<int>{5, 4, 3});
  CHECK(s[Dimension::Accuracy].mean == doctest::Approx(4.0));
  CHECK(s[Dimension::Accuracy].std == doctest::Approx(1.0));
  CHECK(s[Dimension::Completeness].std == 0.0);
  REQUIRE(seen->size() == 3);
  CHECK((*seen)[0].seed != (*seen)[1].seed);
  CHECK((*seen)[2].tag.round == 2);
  CHECK(h.trace->count_role("judge") == 3);
}

TEST_CASE("an out-of-range judge reply is re-asked once") {
  auto seen = std::make_shared<std::vector<ChatRequest>>();
  const LlmHandle ok_after_retry = scripted({judge_reply(7, 4, 3), judge_reply(5, 4, 3)}, seen);
  const DimensionScores s =
      judge_summary(testing::alice_bob(), one_sentence(), testing::prompts().get("judge"), ok_after_retry, 1);
  CHECK(s[Dimension::Accuracy].runs == std::vector<int>{5});
  REQUIRE(seen->size() == 2);
  CHECK(seen->at(1).messages.size() == 4);
  CHECK(seen->at(1).messages[2].role == ChatRole::Assistant);

  const LlmHandle always_bad = scripted({judge_reply(9, 4, 3)});
  try {
    judge_summary(testing::alice_bob(), one_sentence(), testing::prompts().get("judge"), always_bad, 1);
    FAIL("expected ScoreOutOfRange");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::ScoreOutOfRange);
  }
  CHECK(always_bad.trace->size() == 2);
}

TEST_CASE("corpus_scores averages per-dialogue means, spread over runs") {
  const std::vector<JudgeReply> d1 = {parse_judge_reply(judge_reply(5, 5, 5)), parse_judge_reply(judge_reply(3, 5, 5))};
  const std::vector<JudgeReply> d2 = {parse_judge_reply(judge_reply(4, 5, 5)), parse_judge_reply(judge_reply(2, 5, 5))};
  const std::vector<DimensionScores> scores = {aggregate_runs(d1), aggregate_runs(d2)};
  const auto corpus = corpus_scores(scores);
  CHECK(corpus[0].mean == doctest::Approx(3.5));
  // Run means 4.5 and 2.5.
  CHECK(corpus[0].std == doctest::Approx(std::sqrt(2.0)));
  CHECK(corpus[1].std == 0.0);
}

TEST_CASE("judge_compare swaps the order and ties on disagreement") {
  const Summary a = one_sentence();
  const Summary b = make_summary("alice_bob", {"Bob was helped."});
  const auto& prompt = testing::prompts().get("judge_compare");
  // Always "first": position bias, so the swapped runs disagree.
  const JudgeVerdict biased = judge_compare(testing::alice_bob(), a, b, prompt, scripted({R"({"winner": "first"})"}));
  CHECK(biased.first_order == Winner::A);
  CHECK(biased.second_order == Winner::B);
  CHECK(biased.winner == Winner::Tie);
  const JudgeVerdict consistent =
      judge_compare(testing::alice_bob(), a, b, prompt, scripted({R"({"winner": "first"})", R"({"winner": 2})"}));
  CHECK(consistent.winner == Winner::A);
  const JudgeVerdict tie = judge_compare(testing::alice_bob(), a, b, prompt, scripted({R"({"winner": "tie"})"}));
  CHECK(tie.winner == Winner::Tie);
}
