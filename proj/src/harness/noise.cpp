#include "refine_loop/harness/noise.hpp"

#include <array>
#include <cmath>
#include <set>

#include "refine_loop/core/error.hpp"
#include "refine_loop/core/text.hpp"
#include "refine_loop/harness/rng.hpp"

namespace refine_loop::harness {
namespace {

const std::vector<std::string> kFillers = {"um", "ah", "[laughter]"};
const std::vector<std::string> kVocabulary = {"yeah", "so",    "like",  "well",     "right",  "okay",
                                              "just", "then",  "maybe", "actually", "really", "sure"};

enum class EditKind { Substitute, Delete, Insert };

struct Edit {
  std::size_t turn = 0;
  std::size_t token = 0;
  EditKind kind = EditKind::Substitute;
  std::string word;
};

std::vector<std::string> spoken_words(const Dialogue& dialogue) {
  std::vector<std::string> out;
  for (const Turn& turn : dialogue.turns) {
    for (std::string& word : tokenize_words(turn.text)) {
      if (!is_filler(word)) out.push_back(std::move(word));
    }
  }
  return out;
}

}  // namespace

bool is_filler(std::string_view word) noexcept {
  return word == "um" || word == "uh" || word == "ah" || word == "laughter";
}

void validate(const NoiseSpec& spec) {
  if (!(spec.target_wer >= 0.0 && spec.target_wer < 1.0)) raise(ErrorKind::InvalidValue, "target_wer must lie in [0, 1)");
  if (!(spec.disfluency_rate >= 0.0 && spec.disfluency_rate <= 1.0)) {
    raise(ErrorKind::InvalidValue, "disfluency_rate must lie in [0, 1]");
  }
  if (!(spec.merge_probability >= 0.0 && spec.merge_probability <= 1.0)) {
    raise(ErrorKind::InvalidValue, "merge_probability must lie in [0, 1]");
  }
  if (!(spec.tolerance > 0.0)) raise(ErrorKind::InvalidValue, "tolerance must be positive");
}

metrics::WerResult transcript_wer(const Dialogue& clean, const Dialogue& noisy) {
  const auto reference = spoken_words(clean);
  const auto hypothesis = spoken_words(noisy);
  return metrics::wer(reference, hypothesis);
}

NoiseResult inject_asr_noise(const Dialogue& dialogue, const NoiseSpec& spec) {
  validate(spec);
  NoiseResult result;
  std::vector<Turn> turns = dialogue.turns;

  // Step 1: word edits.
  if (spec.target_wer > 0.0) {
    Rng rng(derive_seed(spec.seed, "asr/words"));
    std::vector<std::vector<std::string>> tokens;
    std::vector<std::pair<std::size_t, std::size_t>> positions;
    for (std::size_t t = 0; t < turns.size(); ++t) {
      tokens.push_back(split_whitespace(turns[t].text));
      for (std::size_t k = 0; k < tokens[t].size(); ++k) {
        const auto words = tokenize_words(tokens[t][k]);
        if (words.size() == 1 && !is_filler(words[0])) positions.emplace_back(t, k);
      }
    }
    const std::size_t reference_len = spoken_words(dialogue).size();
    if (reference_len == 0) raise(ErrorKind::TargetUnreachable, "dialogue has no words to perturb");
    rng.shuffle(positions);

    std::vector<Edit> edits;
    std::vector<std::size_t> deleted(turns.size(), 0);
    std::size_t cursor = 0;

    auto make_edit = [&](std::size_t t, std::size_t k) {
      Edit edit{t, k, static_cast<EditKind>(rng.index(3)), {}};
      // A turn keeps at least one token.
      if (edit.kind == EditKind::Delete && deleted[t] + 1 >= tokens[t].size()) edit.kind = EditKind::Substitute;
      if (edit.kind != EditKind::Delete) {
        const std::string original = tokenize_words(tokens[t][k]).front();
        do {
          edit.word = rng.pick(kVocabulary);
        } while (edit.kind == EditKind::Substitute && edit.word == original);
      }
      if (edit.kind == EditKind::Delete) ++deleted[t];
      return edit;
    };

    auto render = [&] {
      std::vector<Turn> out = dialogue.turns;
      std::vector<std::vector<std::string>> current = tokens;
      std::set<std::size_t> touched;
      std::vector<std::vector<std::optional<std::string>>> after(turns.size());
      for (std::size_t t = 0; t < turns.size(); ++t) after[t].resize(tokens[t].size());
      std::vector<std::vector<bool>> removed(turns.size());
      for (std::size_t t = 0; t < turns.size(); ++t) removed[t].assign(tokens[t].size(), false);
      for (const Edit& e : edits) {
        touched.insert(e.turn);
        if (e.kind == EditKind::Substitute) current[e.turn][e.token] = e.word;
        if (e.kind == EditKind::Delete) removed[e.turn][e.token] = true;
        if (e.kind == EditKind::Insert) after[e.turn][e.token] = e.word;
      }
      for (std::size_t t : touched) {
        std::vector<std::string> words;
        for (std::size_t k = 0; k < current[t].size(); ++k) {
          if (!removed[t][k]) words.push_back(current[t][k]);
          if (after[t][k]) words.push_back(*after[t][k]);
        }
        out[t].text = join(words, " ");
      }
      return out;
    };

    auto measure = [&] {
      Dialogue noisy = dialogue;
      noisy.turns = render();
      return transcript_wer(dialogue, noisy).rate;
    };

    const auto needed = static_cast<std::size_t>(std::llround(spec.target_wer * static_cast<double>(reference_len)));
    while (edits.size() < needed && cursor < positions.size()) {
      edits.push_back(make_edit(positions[cursor].first, positions[cursor].second));
      ++cursor;
    }
    double achieved = measure();
    // Overlapping edits can align more cheaply than their count; top up or back off.
    for (std::size_t guard = 0; std::abs(achieved - spec.target_wer) > spec.tolerance && guard < 2 * positions.size();
         ++guard) {
      if (achieved < spec.target_wer) {
        if (cursor >= positions.size()) break;
        edits.push_back(make_edit(positions[cursor].first, positions[cursor].second));
        ++cursor;
      } else {
        if (edits.empty()) break;
        if (edits.back().kind == EditKind::Delete) --deleted[edits.back().turn];
        edits.pop_back();
      }
      achieved = measure();
    }
    if (std::abs(achieved - spec.target_wer) > spec.tolerance) {
      raise(ErrorKind::TargetUnreachable, "reached WER " + std::to_string(achieved) + " for target " +
                                              std::to_string(spec.target_wer) + " on " +
                                              std::to_string(reference_len) + " words");
    }
    turns = render();
    result.word_edits = edits.size();
  }

  // Step 2: fillers.
  if (spec.disfluency_rate > 0.0) {
    Rng rng(derive_seed(spec.seed, "asr/disfluency"));
    for (Turn& turn : turns) {
      if (!rng.bernoulli(spec.disfluency_rate)) continue;
      std::vector<std::string> words = split_whitespace(turn.text);
      const std::size_t at = rng.index(words.size() + 1);
      words.insert(words.begin() + static_cast<std::ptrdiff_t>(at), rng.pick(kFillers));
      turn.text = join(words, " ");
      ++result.disfluencies;
    }
  }

  // Step 3: channel merge.
  if (spec.channel_merge) {
    Rng rng(derive_seed(spec.seed, "asr/merge"));
    std::vector<Turn> merged;
    for (std::size_t i = 0; i < turns.size(); ++i) {
      if (i + 1 < turns.size() && turns[i].speaker != turns[i + 1].speaker && rng.bernoulli(spec.merge_probability)) {
        Turn combined = turns[i];
        combined.text += " " + turns[i + 1].text;
        if (turns[i + 1].end_ms) combined.end_ms = turns[i + 1].end_ms;
        merged.push_back(std::move(combined));
        ++result.merges;
        ++i;
      } else {
        merged.push_back(turns[i]);
      }
    }
    turns = std::move(merged);
  }

  for (std::size_t i = 0; i < turns.size(); ++i) turns[i].index = i;
  result.noisy = make_dialogue(dialogue.id, std::move(turns));
  const auto final_wer = transcript_wer(dialogue, result.noisy);
  result.achieved_wer = final_wer.rate;
  result.counts = final_wer.counts;
  return result;
}

}  // namespace refine_loop::harness
