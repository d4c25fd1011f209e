#pragma once

#include <filesystem>
#include <map>
#include <string>

#include "refine_loop/core/io.hpp"
#include "refine_loop/harness/ab_pairs.hpp"
#include "refine_loop/harness/synthetic.hpp"

namespace refine_loop::testing {

inline constexpr const char* kSystemA = "agentic-refine";
inline constexpr const char* kSystemB = "single-call";

// Data directory with one experiment of `n` pairs (key included) and one
// attribution task per dialogue. System A summaries carry refined/inserted
// origins and round 2 so a leak would show up in served payloads.
inline void build_service_data(const std::filesystem::path& dir, std::size_t n, const std::string& experiment_id,
                               std::uint64_t seed = 1) {
  std::map<std::string, Summary> a, b;
  std::map<std::string, Dialogue> dialogues;
  for (const auto& c : harness::synthetic_corpus(n, seed)) {
    Summary refined = c.summary;
    refined.revision_round = 2;
    refined.sentences.front().origin = SentenceOrigin::Refined;
    refined.sentences.back().origin = SentenceOrigin::Inserted;
    Summary single = c.summary;
    single.sentences.pop_back();
    a[c.dialogue.id] = refined;
    b[c.dialogue.id] = single;
    dialogues[c.dialogue.id] = c.dialogue;
    nlohmann::ordered_json task = {{"dialogue", dialogue_to_json(c.dialogue)}, {"summary", summary_to_json(c.summary)}};
    write_file(dir / "attribution" / (c.dialogue.id + ".json"), task.dump());
  }
  const auto exp = harness::make_ab_pairs(a, b, seed, experiment_id, kSystemA, kSystemB);
  harness::write_experiment(dir / "experiments" / experiment_id, exp, dialogues);
}

}  // namespace refine_loop::testing
