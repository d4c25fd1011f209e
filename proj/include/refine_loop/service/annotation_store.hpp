#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <mutex>
#include <optional>
#include <string>
#include <string_view>
#include <tuple>
#include <vector>

#include <nlohmann/json.hpp>

#include "refine_loop/core/model.hpp"
#include "refine_loop/harness/ab_pairs.hpp"
#include "refine_loop/metrics/metrics.hpp"

namespace refine_loop::service {

enum class Choice { Left, Right, Tie };
std::string_view to_string(Choice choice) noexcept;
// Throws InvalidChoice.
Choice parse_choice(std::string_view text);

struct PreferenceRecord {
  std::uint64_t record_id = 0;
  std::string experiment_id;
  std::string pair_id;
  std::string annotator_id;
  Choice choice = Choice::Tie;
  std::string submitted_at;
  std::optional<std::uint64_t> supersedes;
};

struct AttributionRecord {
  std::uint64_t record_id = 0;
  std::string dialogue_id;
  std::size_t sentence_index = 0;
  // Empty means the annotator marked the sentence ungrounded.
  std::vector<std::size_t> turn_indices;
  std::string annotator_id;
  std::string submitted_at;
  std::optional<std::uint64_t> supersedes;
};

struct ServedPair {
  std::string pair_id;
  Dialogue dialogue;
  Summary left;
  Summary right;
};

// Payload for annotators: sentence texts only, nothing that hints at a system.
nlohmann::ordered_json blinded_pair_json(const ServedPair& pair);

struct ExperimentResults {
  std::string experiment_id;
  std::string system_a;
  std::string system_b;
  metrics::Tally tally;
  metrics::PreferenceRates rates;

  nlohmann::ordered_json to_json() const;
};

struct AttributionView {
  Dialogue dialogue;
  // Attributions replaced by the latest label of each labeled sentence.
  Summary summary;
  std::map<std::size_t, AttributionRecord> labels;
  double coverage = 0.0;
};

/// Annotation state for one data directory:
///   experiments/<id>/pairs.json (+ key.json for unblinding),
///   attribution/<dialogue_id>.json ({"dialogue", "summary"}),
///   annotations.log (append-only JSON lines, replayed on construction).
/// Every submission is written and fsynced before its id is returned. A
/// truncated final log line (a crash mid-write) is dropped on replay.
class AnnotationStore {
 public:
  explicit AnnotationStore(std::filesystem::path data_dir);
  ~AnnotationStore();
  AnnotationStore(const AnnotationStore&) = delete;
  AnnotationStore& operator=(const AnnotationStore&) = delete;

  std::vector<std::string> experiment_ids() const;
  std::size_t pair_count(std::string_view experiment_id) const;

  /// A pair this annotator has no record for, least-judged first; nullopt
  /// when none is left. Throws UnknownExperiment.
  std::optional<ServedPair> next_pair(std::string_view experiment_id, std::string_view annotator_id) const;

  /// Last write wins; the superseded record stays in the log. Throws
  /// UnknownExperiment, UnknownPair, InvalidChoice, InvalidValue.
  std::uint64_t submit_preference(std::string_view experiment_id, std::string_view pair_id,
                                  std::string_view annotator_id, std::string_view choice);

  // Throws UnknownExperiment, KeyUnavailable, NoRecords.
  ExperimentResults results(std::string_view experiment_id) const;
  // Every record, superseded ones included, with choices mapped to systems.
  nlohmann::ordered_json export_unblinded(std::string_view experiment_id) const;

  std::vector<PreferenceRecord> effective_preferences(std::string_view experiment_id) const;
  // Oldest first.
  std::vector<PreferenceRecord> audit_chain(std::string_view experiment_id, std::string_view pair_id,
                                            std::string_view annotator_id) const;

  // Throws UnknownDialogue.
  AttributionView attribution_task(std::string_view dialogue_id) const;
  // Throws UnknownDialogue, UnknownSentence, InvalidTurnIndex, InvalidValue.
  std::uint64_t submit_attribution(std::string_view dialogue_id, std::size_t sentence_index,
                                   std::vector<std::size_t> turn_indices, std::string_view annotator_id);

  std::size_t record_count() const;

 private:
  struct Experiment {
    std::vector<ServedPair> pairs;
    std::optional<harness::UnblindingKey> key;
  };
  using PreferenceKey = std::tuple<std::string, std::string, std::string>;
  using AttributionKey = std::tuple<std::string, std::size_t, std::string>;

  void load_tasks();
  void replay();
  void append_line(const std::string& line);
  void apply(PreferenceRecord record);
  void apply(AttributionRecord record);
  const Experiment& experiment(std::string_view experiment_id) const;

  std::filesystem::path data_dir_;
  std::filesystem::path log_path_;
  int log_fd_ = -1;
  mutable std::mutex mutex_;
  std::uint64_t next_id_ = 1;
  std::map<std::string, Experiment, std::less<>> experiments_;
  std::map<std::string, std::pair<Dialogue, Summary>, std::less<>> attribution_tasks_;
  std::vector<PreferenceRecord> preferences_;
  std::map<PreferenceKey, std::size_t> effective_preference_;
  std::vector<AttributionRecord> attributions_;
  std::map<AttributionKey, std::size_t> effective_attribution_;
};

}  // namespace refine_loop::service
