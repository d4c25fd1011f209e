#include <doctest.h>

#include "refine_loop/core/anonymize.hpp"
#include "refine_loop/core/error.hpp"
#include "refine_loop/core/io.hpp"
#include "refine_loop/core/model.hpp"
#include "refine_loop/core/text.hpp"
#include "refine_loop/harness/rng.hpp"
#include "test_support.hpp"

using namespace refine_loop;
using harness::Rng;

namespace {

ErrorKind kind_of(auto&& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.kind();
  }
  FAIL("no Error thrown");
  return ErrorKind::Io;
}

const std::vector<std::string> kWords = {"hello", "the",   "order", "arrived", "café", "naïve",  "\"quoted\"",
                                         "Dr.",   "e.g.",  "ok?",   "yes!",    "3.5",  "line\\", "tab\there"};

std::string random_text(Rng& rng, std::size_t max_words) {
  std::string text;
  const std::size_t n = 1 + rng.index(max_words);
  for (std::size_t i = 0; i < n; ++i) {
    if (i) text += ' ';
    text += rng.pick(kWords);
  }
  return text;
}

}  // namespace

TEST_CASE("make_dialogue enforces turn invariants") {
  CHECK(kind_of([] { make_dialogue("x", {}); }) == ErrorKind::EmptyDialogue);
  CHECK(kind_of([] { make_dialogue("x", {{0, "A", "hi"}, {2, "B", "yo"}}); }) == ErrorKind::NonContiguousIndex);
  CHECK(kind_of([] { make_dialogue("x", {{0, "", "hi"}}); }) == ErrorKind::MalformedRecord);
  const Dialogue d = make_dialogue("x", {{0, "A", "hi"}, {1, "B", "yo"}, {2, "A", "bye"}});
  CHECK(d.speakers == std::set<std::string>{"A", "B"});
}

TEST_CASE("the Alice/Bob fixture loads") {
  const Dialogue d = testing::alice_bob();
  CHECK(d.id == "alice_bob");
  CHECK(d.turns.size() == 14);
  CHECK(d.speakers.size() == 2);
}

TEST_CASE("property: parse(serialize(d)) == d for random dialogues") {
  Rng rng(11);
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<Turn> turns;
    const std::size_t n = 1 + rng.index(8);
    for (std::size_t i = 0; i < n; ++i) {
      Turn t{i, rng.bernoulli(0.5) ? "Agent" : "Customer Ø", random_text(rng, 12)};
      if (rng.bernoulli(0.3)) {
        t.start_ms = static_cast<std::int64_t>(i * 1000);
        t.end_ms = static_cast<std::int64_t>(i * 1000 + 900);
      }
      turns.push_back(std::move(t));
    }
    const Dialogue d = make_dialogue("dlg-" + std::to_string(trial), std::move(turns));
    CHECK(parse_dialogue(serialize_dialogue(d)) == d);
    CHECK(dialogue_from_json(dialogue_to_json(d)) == d);
  }
}

TEST_CASE("property: summary documents round-trip") {
  Rng rng(12);
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<std::string> texts;
    for (std::size_t i = 0, n = 1 + rng.index(6); i < n; ++i) texts.push_back(random_text(rng, 10));
    Summary s = make_summary("d", texts, SentenceOrigin::Refined, static_cast<int>(rng.index(4)));
    for (auto& sentence : s.sentences) {
      if (rng.bernoulli(0.5)) sentence.attributions = {rng.index(5), 5 + rng.index(5)};
    }
    CHECK(parse_summary(serialize_summary(s)) == s);
  }
}

TEST_CASE("parse_dialogue rejects malformed lines and fills missing indices") {
  CHECK(kind_of([] { parse_dialogue("{\"speaker\": \"A\", \"text\": \"hi\"}\nnot json\n"); }) ==
        ErrorKind::MalformedRecord);
  const Dialogue d = parse_dialogue("{\"speaker\":\"A\",\"text\":\"hi\"}\n{\"speaker\":\"B\",\"text\":\"yo\"}\n", "fb");
  CHECK(d.id == "fb");
  CHECK(d.turns[1].index == 1);
}

TEST_CASE("split_sentences") {
  CHECK(split_sentences("Dr. Smith called. He left!  Then? ok") ==
        std::vector<std::string>{"Dr. Smith called.", "He left!", "Then?", "ok"});
  CHECK(split_sentences("She said \"stop.\" Then left.") ==
        std::vector<std::string>{"She said \"stop.\"", "Then left."});
  CHECK(split_sentences("Version 3.5 shipped.").size() == 1);
  CHECK(split_sentences("   ").empty());
}

TEST_CASE("property: joining split sentences gives the whitespace-normalized text") {
  Rng rng(13);
  for (int trial = 0; trial < 500; ++trial) {
    std::string text = random_text(rng, 30);
    if (rng.bernoulli(0.5)) text = "  " + text + "\n ";
    const auto parts = split_sentences(text);
    CHECK(join(parts, " ") == normalize_whitespace(text));
    for (const auto& p : parts) CHECK(!p.empty());
  }
}

TEST_CASE("tokenize_words lowercases and strips punctuation") {
  CHECK(tokenize_words("Hello, WORLD! it's") == std::vector<std::string>{"hello", "world", "its"});
  CHECK(nfc("cafe\xCC\x81") == "caf\xC3\xA9");
  CHECK(kind_of([] { nfc("\xFF\xFE"); }) == ErrorKind::InvalidValue);
}

TEST_CASE("DimensionMask parsing and labels") {
  CHECK(DimensionMask::parse("full") == DimensionMask::all());
  CHECK(DimensionMask::parse("-A") == DimensionMask::all().without(Dimension::Accuracy));
  CHECK(DimensionMask::parse("A,C") == DimensionMask::of({Dimension::Accuracy, Dimension::Completeness}));
  CHECK(DimensionMask::parse("-E_R").label() == "-E_R");
  CHECK(DimensionMask::all().label() == "full");
  CHECK(DimensionMask::parse("-C").size() == 2);
  CHECK_THROWS_AS(DimensionMask::parse("Z"), Error);
}

TEST_CASE("anonymize replaces names, emails and long numbers") {
  RedactionRuleSet rules = roster_from_dialogue(testing::alice_bob());
  rules.rules.push_back({"Acme*", "[REDACTED_ORG]"});
  const std::string out = anonymize_text("Bob from AcmeCorp mailed bob@x.org, call 5551234567. Alice agreed.", rules);
  CHECK(out.find("Bob") == std::string::npos);
  CHECK(out.find("Alice") == std::string::npos);
  CHECK(out.find("[REDACTED_ORG]") != std::string::npos);
  CHECK(out.find("[REDACTED_EMAIL]") != std::string::npos);
  CHECK(out.find("[REDACTED_NUMBER]") != std::string::npos);
}

TEST_CASE("property: anonymize is idempotent") {
  const Dialogue d = testing::alice_bob();
  RedactionRuleSet rules = roster_from_dialogue(d);
  rules.rules.push_back({"two-factor", "[REDACTED_METHOD]"});
  rules.rules.push_back({"reader", "[REDACTED_GROUP]"});
  const Dialogue once = anonymize(d, rules);
  CHECK(anonymize(once, rules) == once);
  CHECK(once.speakers == d.speakers);

  Rng rng(14);
  const std::vector<std::string> pieces = {"Alice", "Bob", "mail a@b.co", "12345678", "reader", "SPEAKER", "[", "]", "x"};
  for (int trial = 0; trial < 300; ++trial) {
    std::string text;
    for (std::size_t i = 0, n = 1 + rng.index(10); i < n; ++i) text += rng.pick(pieces) + " ";
    const std::string a = anonymize_text(text, rules);
    CHECK(anonymize_text(a, rules) == a);
  }
}

TEST_CASE("write_file is atomic and read_file round-trips") {
  testing::TempDir dir;
  const auto path = dir.path() / "nested" / "f.txt";
  write_file(path, "abc");
  CHECK(read_file(path) == "abc");
  write_file(path, "def");
  CHECK(read_file(path) == "def");
  CHECK(kind_of([&] { read_file(dir.path() / "missing"); }) == ErrorKind::Io);
}
