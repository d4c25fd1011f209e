#include <doctest.h>

#include "refine_loop/agents/agents.hpp"
#include "refine_loop/core/error.hpp"
#include "refine_loop/core/model.hpp"
#include "test_support.hpp"

using namespace refine_loop;
using nlohmann::json;

namespace {

LlmHandle handle_replying(std::string reply) {
  LlmHandle h;
  h.backend = std::make_shared<CallbackBackend>("cb", [reply](const ChatRequest&) { return reply; });
  h.policy = RetryPolicy{1, 1, 1.0};
  return h;
}

Summary three_sentences() {
  Summary s = make_summary("alice_bob", {"Bob reported a permission error.", "Alice verified Bob.",
                                         "Alice added Bob to the reader group."});
  s.sentences[0].attributions = {3};
  return s;
}

ErrorKind kind_of(auto&& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.kind();
  }
  FAIL("no Error thrown");
  return ErrorKind::Io;
}

}  // namespace

TEST_CASE("render_prompt substitutes once and renders examples before the input") {
  PromptTemplate t;
  t.system_text = "S {{a}}";
  t.user_text = "U {{a}} {{b}}";
  t.icl_examples = {{"in1", "out1"}};
  const RenderedPrompt r = render_prompt(t, {{"a", "{{b}}"}, {"b", "B"}});
  CHECK(r.system == "S {{b}}");
  CHECK(r.user.find("Example 1\nInput:\nin1\nOutput:\nout1") != std::string::npos);
  CHECK(r.user.find("Example 1") < r.user.find("U {{b}} B"));
  CHECK(kind_of([&] { render_prompt(t, {{"a", "x"}}); }) == ErrorKind::UnboundPlaceholder);
}

TEST_CASE("shipped prompt library") {
  const PromptLibrary& lib = testing::prompts();
  for (const char* name : {"draft", "monolithic", "eval_accuracy", "eval_completeness", "eval_readability", "refine",
                           "redundancy", "judge", "judge_compare", "error_injector"}) {
    CHECK_MESSAGE(lib.contains(name), name);
  }
  CHECK(lib.get("draft").system_text.find("fully grounded in the dialogue") != std::string::npos);
  CHECK(lib.get("eval_accuracy").role == AgentRole::EvalAccuracy);
  CHECK(placeholders(lib.get("refine").user_text) == std::set<std::string>{"dialogue", "summary", "feedback"});
  CHECK(placeholders(lib.get("eval_readability").user_text) == std::set<std::string>{"summary"});
  CHECK(kind_of([&] { lib.get("nope"); }) == ErrorKind::UnknownTemplate);
}

TEST_CASE("draft splits the reply and tags the call") {
  LlmHandle h = handle_replying("Bob called. Alice helped him.");
  const Summary s = draft(testing::alice_bob(), testing::prompts().get("draft"), h);
  CHECK(s.sentences.size() == 2);
  CHECK(s.revision_round == 0);
  CHECK(s.sentences[1].origin == SentenceOrigin::Draft);
  CHECK(h.trace->entries().at(0).agent_role == "draft");
  CHECK(kind_of([] { draft(testing::alice_bob(), testing::prompts().get("draft"), handle_replying("   ")); }) ==
        ErrorKind::EmptyDraft);
}

TEST_CASE("parse_feedback: one item per sentence, defaults, drops") {
  const std::string reply = json::array({{{"sentence_index", 2}, {"label", "fail"}, {"explanation", "bad"}},
                                         {{"sentence_index", 0}, {"label", "PASS"}},
                                         {{"sentence_index", 0}, {"label", "fail"}, {"explanation", "dup"}},
                                         {{"sentence_index", 9}, {"label", "pass"}},
                                         {{"sentence_index", "MISSING"}, {"label", "fail"}, {"explanation", "fact"}}})
                                .dump();
  const auto accuracy = parse_feedback(reply, Dimension::Accuracy, 3);
  REQUIRE(accuracy.size() == 3);
  CHECK(accuracy[0].label == Label::Pass);
  CHECK(accuracy[1].defaulted);
  CHECK(accuracy[1].label == Label::Pass);
  CHECK(accuracy[2].label == Label::Fail);

  const auto completeness = parse_feedback(reply, Dimension::Completeness, 3);
  REQUIRE(completeness.size() == 4);
  CHECK(completeness[3].is_missing());
  CHECK(completeness[3].explanation == "fact");

  CHECK(kind_of([] { parse_feedback(R"([{"sentence_index": 0, "label": "fail"}])", Dimension::Accuracy, 1); }) ==
        ErrorKind::MissingField);
  CHECK(kind_of([] { parse_feedback(R"([{"sentence_index": 0, "label": "maybe"}])", Dimension::Accuracy, 1); }) ==
        ErrorKind::WrongKind);
  CHECK(kind_of([] { parse_feedback("nonsense", Dimension::Accuracy, 1); }) == ErrorKind::UnparseablePayload);
}

TEST_CASE("evaluate_dimension rejects a template of the wrong role") {
  LlmHandle h = handle_replying(testing::feedback_reply(3));
  const auto d = testing::alice_bob();
  CHECK(evaluate_dimension(d, three_sentences(), Dimension::Readability, testing::prompts().get("eval_readability"), h)
            .size() == 3);
  CHECK_THROWS_AS(
      evaluate_dimension(d, three_sentences(), Dimension::Accuracy, testing::prompts().get("eval_readability"), h),
      Error);
}

TEST_CASE("merge_reports orders by dimension and refine_directive priority") {
  SentenceFeedback r{Dimension::Readability, 0, Label::Fail, "r"};
  SentenceFeedback a{Dimension::Accuracy, 0, Label::Fail, "a"};
  SentenceFeedback c{Dimension::Completeness, 0, Label::Fail, "c"};
  const EvaluationReport report = merge_reports(1, {{r}, {c}, {a}});
  CHECK(report.feedback[0].dimension == Dimension::Accuracy);
  CHECK(report.feedback[2].dimension == Dimension::Readability);
  CHECK(refine_directive(report, 0) == RefineDirective::Delete);
  CHECK(refine_directive(merge_reports(1, {{r}, {a}}), 0) == RefineDirective::FixAccuracy);
  CHECK(refine_directive(merge_reports(1, {{r}}), 0) == RefineDirective::FixReadability);
  CHECK(!refine_directive(merge_reports(1, {{r}}), 1).has_value());
}

TEST_CASE("refine leaves passing sentences byte-identical") {
  const Summary s = three_sentences();
  EvaluationReport report = merge_reports(
      1, {{{Dimension::Accuracy, 0, Label::Pass, ""}, {Dimension::Accuracy, 1, Label::Fail, "which method?"},
           {Dimension::Accuracy, 2, Label::Pass, ""}},
          {{Dimension::Completeness, std::nullopt, Label::Fail, "two days"}}});
  const std::string reply = json{{"edits",
                                  {{{"sentence_index", 0}, {"action", "replace"}, {"text", "Tampered."}},
                                   {{"sentence_index", 1}, {"action", "replace"}, {"text", "Alice used 2FA."}}}},
                                 {"insertions",
                                  {{{"missing_index", 0}, {"after", 1}, {"text", "It lasted two days."}},
                                   {{"missing_index", 0}, {"text", "Duplicate insertion."}}}}}
                              .dump();
  LlmHandle h = handle_replying(reply);
  const Summary out = refine(testing::alice_bob(), s, report, testing::prompts().get("refine"), h);
  REQUIRE(out.sentences.size() == 4);
  CHECK(out.sentences[0] == s.sentences[0]);
  CHECK(out.sentences[1].text == "Alice used 2FA.");
  CHECK(out.sentences[1].origin == SentenceOrigin::Refined);
  CHECK(out.sentences[2].text == "It lasted two days.");
  CHECK(out.sentences[2].origin == SentenceOrigin::Inserted);
  CHECK(out.sentences[3].text == s.sentences[2].text);
  CHECK(out.sentences[3].index == 3);
  CHECK(out.revision_round == 1);
  CHECK(h.trace->entries()[0].round == 1);
}

TEST_CASE("refine deletes on a completeness fail, and a clean report makes no call") {
  const Summary s = three_sentences();
  const EvaluationReport report = merge_reports(1, {{{Dimension::Completeness, 2, Label::Fail, "not key"}}});
  LlmHandle h = handle_replying(R"({"edits": [{"sentence_index": 2, "action": "delete"}]})");
  const Summary out = refine(testing::alice_bob(), s, report, testing::prompts().get("refine"), h);
  CHECK(out.sentences.size() == 2);

  LlmHandle idle = handle_replying("unused");
  const Summary same = refine(testing::alice_bob(), s, merge_reports(1, {}), testing::prompts().get("refine"), idle);
  CHECK(idle.trace->size() == 0);
  CHECK(same.sentences == s.sentences);
  CHECK(same.revision_round == 1);

  EvaluationReport wrong_round = report;
  wrong_round.round = 5;
  CHECK(kind_of([&] { refine(testing::alice_bob(), s, wrong_round, testing::prompts().get("refine"), h); }) ==
        ErrorKind::InvalidValue);
}

TEST_CASE("redundancy checker can delete or reword but never add") {
  const Summary s = three_sentences();
  LlmHandle h = handle_replying(
      R"({"edits": [{"sentence_index": 0, "action": "delete"}, {"sentence_index": 1, "text": "Alice checked."}],
          "insertions": [{"missing_index": 0, "text": "ignored"}]})");
  const Summary out = check_redundancy(s, testing::prompts().get("redundancy"), h);
  REQUIRE(out.sentences.size() == 2);
  CHECK(out.sentences[0].text == "Alice checked.");
  CHECK(out.sentences[0].index == 0);
  LlmHandle none = handle_replying(R"({"edits": []})");
  CHECK(check_redundancy(s, testing::prompts().get("redundancy"), none).sentences == s.sentences);
  CHECK_THROWS_AS(check_redundancy(s, testing::prompts().get("refine"), none), Error);
}

TEST_CASE("format helpers") {
  CHECK(format_summary(three_sentences()).starts_with("[0] Bob reported a permission error.\n[1] "));
  CHECK(format_dialogue(testing::alice_bob()).starts_with("[0] Alice: Hi Bob"));
}
