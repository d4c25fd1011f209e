#include <doctest.h>

#include <cmath>

#include "oracles.hpp"
#include "refine_loop/core/error.hpp"
#include "refine_loop/harness/rng.hpp"
#include "refine_loop/metrics/metrics.hpp"

using namespace refine_loop;
using namespace refine_loop::metrics;
using harness::Rng;

namespace {

std::vector<std::string> words(std::initializer_list<const char*> list) { return {list.begin(), list.end()}; }

Summary summary_of(std::vector<std::string> texts) { return make_summary("d", texts); }

}  // namespace

TEST_CASE("wer on hand-checked cases") {
  const auto r = wer(words({"the", "cat", "sat"}), words({"the", "cat", "sat"}));
  CHECK(r.rate == 0.0);
  CHECK(r.counts.hits == 3);
  const auto sub = wer(words({"a", "b", "c"}), words({"a", "x", "c"}));
  CHECK(sub.counts.substitutions == 1);
  CHECK(sub.rate == doctest::Approx(1.0 / 3));
  const auto ins = wer(words({"a"}), words({"a", "b", "c"}));
  CHECK(ins.counts.insertions == 2);
  CHECK(ins.rate == doctest::Approx(2.0));
  const auto del = wer(words({"a", "b", "c"}), {});
  CHECK(del.counts.deletions == 3);
  CHECK(del.rate == 1.0);
  try {
    wer({}, words({"a"}));
    FAIL("expected EmptyReference");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::EmptyReference);
  }
  CHECK(wer_text("Hello, world!", "hello world").rate == 0.0);
}

TEST_CASE("oracle: wer equals brute-force edit distance (lengths <= 3, plus random longer pairs)") {
  const auto sequences = testing::all_sequences({"a", "b", "c"}, 3);
  for (const auto& ref : sequences) {
    if (ref.empty()) continue;
    for (const auto& hyp : sequences) {
      const WerResult r = wer(ref, hyp);
      const std::size_t expected = testing::brute_force_edits(ref, hyp);
      REQUIRE(r.counts.errors() == expected);
      CHECK(r.counts.hits + r.counts.substitutions + r.counts.deletions == ref.size());
      CHECK(r.counts.hits + r.counts.substitutions + r.counts.insertions == hyp.size());
      CHECK(r.rate == static_cast<double>(expected) / static_cast<double>(ref.size()));
    }
  }
  Rng rng(31);
  const std::vector<std::string> vocab = {"a", "b", "c", "d"};
  for (int trial = 0; trial < 300; ++trial) {
    std::vector<std::string> ref, hyp;
    for (std::size_t i = 0, n = 1 + rng.index(7); i < n; ++i) ref.push_back(rng.pick(vocab));
    for (std::size_t i = 0, n = rng.index(8); i < n; ++i) hyp.push_back(rng.pick(vocab));
    CHECK(wer(ref, hyp).counts.errors() == testing::brute_force_edits(ref, hyp));
  }
}

TEST_CASE("ngram similarity is symmetric, bounded, and 1 on duplicates") {
  Rng rng(32);
  const std::vector<std::string> vocab = {"alice", "bob", "reset", "the", "password", "group", "added", "to"};
  for (int trial = 0; trial < 500; ++trial) {
    std::string a, b;
    for (std::size_t i = 0, n = 1 + rng.index(9); i < n; ++i) a += rng.pick(vocab) + " ";
    for (std::size_t i = 0, n = 1 + rng.index(9); i < n; ++i) b += rng.pick(vocab) + " ";
    const double ab = ngram_similarity(a, b);
    CHECK(ab == ngram_similarity(b, a));
    CHECK(ab >= 0.0);
    CHECK(ab <= 1.0);
    CHECK(ngram_similarity(a, a) == 1.0);
  }
}

TEST_CASE("redundancy oracle flags duplicates and the intra-sentence pattern") {
  const Summary dup = summary_of({"Alice reset the password for Bob.", "Bob thanked her.",
                                  "Alice reset the password for Bob."});
  const RedundancyReport report = ngram_redundancy(dup);
  REQUIRE(report.pairs.size() == 1);
  CHECK(report.pairs[0] == PairFlag{0, 2, 1.0});

  const RedundancyReport intra =
      ngram_redundancy(summary_of({"They worked together as a team to collaborate together."}));
  REQUIRE(intra.intra.size() == 1);
  CHECK(intra.intra[0].repeated == "together");

  CHECK(ngram_redundancy(summary_of({"Bob called about access.", "Alice fixed the group."})).clean());
  CHECK_THROWS_AS(ngram_redundancy(Summary{}), Error);
  CHECK_THROWS_AS(ngram_redundancy(dup, 3, 1.5), Error);
  CHECK_THROWS_AS(ngram_redundancy(dup, 0), Error);
}

TEST_CASE("property: raising the threshold never adds pair flags") {
  Rng rng(33);
  const std::vector<std::string> vocab = {"alice", "bob", "reset", "the", "password", "group", "added", "to", "a"};
  for (int trial = 0; trial < 300; ++trial) {
    std::vector<std::string> texts;
    for (std::size_t s = 0, n = 1 + rng.index(5); s < n; ++s) {
      std::string t;
      for (std::size_t i = 0, m = 1 + rng.index(8); i < m; ++i) t += rng.pick(vocab) + " ";
      texts.push_back(t + ".");
    }
    const Summary summary = summary_of(texts);
    const double lo = rng.unit();
    const double hi = lo + (1.0 - lo) * rng.unit();
    const auto a = ngram_redundancy(summary, 3, lo).pairs;
    const auto b = ngram_redundancy(summary, 3, hi).pairs;
    for (const auto& flag : b) CHECK(std::find(a.begin(), a.end(), flag) != a.end());
  }
}

TEST_CASE("mae properties") {
  const std::vector<double> a = {1, 2, 3, 4};
  const std::vector<double> b = {2, 2, 5, 4};
  CHECK(mae(a, a) == 0.0);
  CHECK(mae(a, b) == mae(b, a));
  CHECK(mae(a, b) == doctest::Approx(0.75));
  CHECK_THROWS_AS(mae({}, {}), Error);
  CHECK_THROWS_AS(mae(a, std::vector<double>{1}), Error);
  Rng rng(34);
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<double> x, y, z;
    for (std::size_t i = 0, n = 1 + rng.index(10); i < n; ++i) {
      x.push_back(1 + rng.index(5));
      y.push_back(1 + rng.index(5));
      z.push_back(1 + rng.index(5));
    }
    CHECK(mae(x, z) <= mae(x, y) + mae(y, z) + 1e-12);
    CHECK(mae(x, y) >= 0.0);
  }
}

TEST_CASE("wilson interval and preference rates") {
  const PreferenceRates rates = preference_rates({59, 23, 18});
  CHECK(rates.rate_a == doctest::Approx(0.59));
  CHECK(rates.rate_b == doctest::Approx(0.23));
  CHECK(rates.rate_tie == doctest::Approx(0.18));
  CHECK(rates.wilson95_a.lo == doctest::Approx(0.4920).epsilon(1e-3));
  CHECK(rates.wilson95_a.hi == doctest::Approx(0.6812).epsilon(1e-3));
  CHECK_THROWS_AS(wilson_interval(0, 0), Error);
  CHECK_THROWS_AS(preference_rates({}), Error);
  const Interval zero = wilson_interval(0, 10);
  CHECK(zero.lo == 0.0);
  const Interval all = wilson_interval(10, 10);
  CHECK(all.hi == 1.0);
  Rng rng(35);
  for (int trial = 0; trial < 1000; ++trial) {
    const std::size_t n = 1 + rng.index(500);
    const std::size_t k = rng.index(n + 1);
    const Interval ci = wilson_interval(k, n);
    const double p = static_cast<double>(k) / static_cast<double>(n);
    CHECK(ci.lo <= p);
    CHECK(p <= ci.hi);
    CHECK(0.0 <= ci.lo);
    CHECK(ci.hi <= 1.0);
  }
}

TEST_CASE("oracle: classification metrics match a brute-force confusion matrix") {
  Rng rng(36);
  for (int trial = 0; trial < 300; ++trial) {
    std::vector<Label> predicted, gold;
    for (std::size_t i = 0, n = 1 + rng.index(40); i < n; ++i) {
      predicted.push_back(rng.bernoulli(0.4) ? Label::Fail : Label::Pass);
      gold.push_back(rng.bernoulli(0.4) ? Label::Fail : Label::Pass);
    }
    const auto m = classification_metrics(predicted, gold);
    const auto c = testing::brute_force_confusion(predicted, gold);
    CHECK(m.true_positive == c.tp);
    CHECK(m.false_positive == c.fp);
    CHECK(m.true_negative == c.tn);
    CHECK(m.false_negative == c.fn);
    CHECK(m.accuracy == doctest::Approx(double(c.tp + c.tn) / predicted.size()));
    if (c.tp + c.fp > 0) CHECK(m.precision == doctest::Approx(double(c.tp) / (c.tp + c.fp)));
    else CHECK((m.precision_degenerate && m.precision == 1.0));
  }
  const std::vector<Label> passes = {Label::Pass, Label::Pass};
  const auto m = classification_metrics(passes, passes);
  CHECK(m.precision_degenerate);
  CHECK(m.recall_degenerate);
  CHECK(m.accuracy == 1.0);
  CHECK_THROWS_AS(classification_metrics(passes, std::vector<Label>{Label::Pass}), Error);
}

TEST_CASE("attribution coverage") {
  Summary s = summary_of({"a.", "b.", "c.", "d."});
  CHECK(attribution_coverage(s) == 0.0);
  s.sentences[0].attributions = {1};
  s.sentences[3].attributions = {2, 3};
  CHECK(attribution_coverage(s) == 0.5);
  CHECK(attribution_coverage(Summary{}) == 0.0);
}
