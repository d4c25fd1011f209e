#include "refine_loop/service/annotation_store.hpp"

#include <fcntl.h>
#include <unistd.h>

#include <algorithm>
#include <cerrno>
#include <cstring>

#include "refine_loop/core/error.hpp"
#include "refine_loop/core/io.hpp"
#include "refine_loop/core/log.hpp"
#include "refine_loop/core/text.hpp"
#include "refine_loop/llm/gateway.hpp"

namespace refine_loop::service {
namespace {

namespace fs = std::filesystem;
using nlohmann::json;
using nlohmann::ordered_json;

ordered_json sentences_only(const Summary& summary) {
  ordered_json sentences = ordered_json::array();
  for (const SummarySentence& s : summary.sentences) sentences.push_back({{"index", s.index}, {"text", s.text}});
  return {{"sentences", std::move(sentences)}};
}

ordered_json to_json(const PreferenceRecord& r) {
  ordered_json out;
  out["type"] = "preference";
  out["record_id"] = r.record_id;
  out["experiment_id"] = r.experiment_id;
  out["pair_id"] = r.pair_id;
  out["annotator_id"] = r.annotator_id;
  out["choice"] = to_string(r.choice);
  out["submitted_at"] = r.submitted_at;
  out["supersedes"] = r.supersedes ? ordered_json(*r.supersedes) : ordered_json(nullptr);
  return out;
}

ordered_json to_json(const AttributionRecord& r) {
  ordered_json out;
  out["type"] = "attribution";
  out["record_id"] = r.record_id;
  out["dialogue_id"] = r.dialogue_id;
  out["sentence_index"] = r.sentence_index;
  out["turn_indices"] = r.turn_indices;
  out["annotator_id"] = r.annotator_id;
  out["submitted_at"] = r.submitted_at;
  out["supersedes"] = r.supersedes ? ordered_json(*r.supersedes) : ordered_json(nullptr);
  return out;
}

std::optional<std::uint64_t> optional_id(const json& object) {
  if (!object.contains("supersedes") || object["supersedes"].is_null()) return std::nullopt;
  return object["supersedes"].get<std::uint64_t>();
}

void require_annotator(std::string_view annotator_id) {
  if (trim(annotator_id).empty()) raise(ErrorKind::InvalidValue, "annotator_id is required");
}

}  // namespace

std::string_view to_string(Choice choice) noexcept {
  switch (choice) {
    case Choice::Left: return "left";
    case Choice::Right: return "right";
    case Choice::Tie: return "tie";
  }
  return "tie";
}

Choice parse_choice(std::string_view text) {
  const std::string value = to_lower_ascii(trim(text));
  if (value == "left") return Choice::Left;
  if (value == "right") return Choice::Right;
  if (value == "tie") return Choice::Tie;
  raise(ErrorKind::InvalidChoice, "choice must be left, right or tie, got '" + std::string(text) + "'");
}

ordered_json blinded_pair_json(const ServedPair& pair) {
  ordered_json out;
  out["pair_id"] = pair.pair_id;
  out["dialogue"] = dialogue_to_json(pair.dialogue);
  out["left"] = sentences_only(pair.left);
  out["right"] = sentences_only(pair.right);
  return out;
}

ordered_json ExperimentResults::to_json() const {
  ordered_json out;
  out["experiment_id"] = experiment_id;
  out["systems"] = {{"A", system_a}, {"B", system_b}};
  out["tally"] = {{"wins_a", tally.wins_a}, {"wins_b", tally.wins_b}, {"ties", tally.ties}, {"total", tally.total()}};
  out["rates"] = {{"rate_a", rates.rate_a},
                  {"rate_b", rates.rate_b},
                  {"rate_tie", rates.rate_tie},
                  {"wilson95_a", {rates.wilson95_a.lo, rates.wilson95_a.hi}}};
  return out;
}

AnnotationStore::AnnotationStore(fs::path data_dir)
    : data_dir_(std::move(data_dir)), log_path_(data_dir_ / "annotations.log") {
  std::error_code ec;
  fs::create_directories(data_dir_, ec);
  if (ec) raise(ErrorKind::Io, "cannot create " + data_dir_.string() + ": " + ec.message());
  load_tasks();
  replay();
  log_fd_ = ::open(log_path_.c_str(), O_WRONLY | O_APPEND | O_CREAT | O_CLOEXEC, 0644);
  if (log_fd_ < 0) raise(ErrorKind::Io, "cannot open " + log_path_.string() + ": " + std::strerror(errno));
}

AnnotationStore::~AnnotationStore() {
  if (log_fd_ >= 0) ::close(log_fd_);
}

void AnnotationStore::load_tasks() {
  const fs::path experiments = data_dir_ / "experiments";
  if (fs::is_directory(experiments)) {
    for (const auto& entry : fs::directory_iterator(experiments)) {
      const fs::path pairs_path = entry.path() / "pairs.json";
      if (!entry.is_directory() || !fs::exists(pairs_path)) continue;
      try {
        const json doc = json::parse(read_file(pairs_path));
        const std::string id = doc.value("experiment_id", entry.path().filename().string());
        Experiment experiment;
        for (const auto& item : doc.at("pairs")) {
          experiment.pairs.push_back({item.at("pair_id").get<std::string>(), dialogue_from_json(item.at("dialogue")),
                                      summary_from_json(item.at("left")), summary_from_json(item.at("right"))});
        }
        const fs::path key_path = entry.path() / "key.json";
        if (fs::exists(key_path)) experiment.key = harness::key_from_json(json::parse(read_file(key_path)));
        experiments_[id] = std::move(experiment);
      } catch (const json::exception& e) {
        raise(ErrorKind::MalformedRecord, pairs_path.string() + ": " + e.what());
      }
    }
  }
  const fs::path attribution = data_dir_ / "attribution";
  if (fs::is_directory(attribution)) {
    for (const auto& entry : fs::directory_iterator(attribution)) {
      if (entry.path().extension() != ".json") continue;
      try {
        const json doc = json::parse(read_file(entry.path()));
        Dialogue dialogue = dialogue_from_json(doc.at("dialogue"));
        Summary summary = summary_from_json(doc.at("summary"));
        validate(summary, dialogue);
        const std::string id = dialogue.id;
        attribution_tasks_[id] = {std::move(dialogue), std::move(summary)};
      } catch (const json::exception& e) {
        raise(ErrorKind::MalformedRecord, entry.path().string() + ": " + e.what());
      }
    }
  }
}

void AnnotationStore::replay() {
  if (!fs::exists(log_path_)) return;
  const std::string contents = read_file(log_path_);
  std::size_t offset = 0;
  std::size_t line_number = 0;
  while (offset < contents.size()) {
    const std::size_t end = contents.find('\n', offset);
    ++line_number;
    if (end == std::string::npos) {
      // Torn write from a crash before acknowledgment: drop it.
      log_warn("annotations.log: dropping incomplete final line " + std::to_string(line_number));
      std::error_code ec;
      fs::resize_file(log_path_, offset, ec);
      if (ec) raise(ErrorKind::Io, "cannot truncate " + log_path_.string() + ": " + ec.message());
      break;
    }
    const std::string_view line(contents.data() + offset, end - offset);
    offset = end + 1;
    if (trim(line).empty()) continue;
    try {
      const json object = json::parse(line);
      const std::string type = object.at("type").get<std::string>();
      if (type == "preference") {
        apply(PreferenceRecord{object.at("record_id").get<std::uint64_t>(),
                               object.at("experiment_id").get<std::string>(), object.at("pair_id").get<std::string>(),
                               object.at("annotator_id").get<std::string>(),
                               parse_choice(object.at("choice").get<std::string>()),
                               object.value("submitted_at", std::string()), optional_id(object)});
      } else if (type == "attribution") {
        apply(AttributionRecord{object.at("record_id").get<std::uint64_t>(),
                                object.at("dialogue_id").get<std::string>(),
                                object.at("sentence_index").get<std::size_t>(),
                                object.at("turn_indices").get<std::vector<std::size_t>>(),
                                object.at("annotator_id").get<std::string>(),
                                object.value("submitted_at", std::string()), optional_id(object)});
      } else {
        raise(ErrorKind::MalformedRecord, "unknown record type '" + type + "'");
      }
    } catch (const json::exception& e) {
      raise(ErrorKind::MalformedRecord,
            "annotations.log line " + std::to_string(line_number) + ": " + std::string(e.what()));
    }
  }
}

void AnnotationStore::append_line(const std::string& line) {
  const std::string data = line + "\n";
  std::size_t written = 0;
  while (written < data.size()) {
    const ssize_t n = ::write(log_fd_, data.data() + written, data.size() - written);
    if (n < 0) {
      if (errno == EINTR) continue;
      raise(ErrorKind::Io, std::string("annotation log write failed: ") + std::strerror(errno));
    }
    written += static_cast<std::size_t>(n);
  }
  if (::fsync(log_fd_) != 0) raise(ErrorKind::Io, std::string("annotation log fsync failed: ") + std::strerror(errno));
}

void AnnotationStore::apply(PreferenceRecord record) {
  next_id_ = std::max(next_id_, record.record_id + 1);
  PreferenceKey key{record.experiment_id, record.pair_id, record.annotator_id};
  preferences_.push_back(std::move(record));
  effective_preference_[key] = preferences_.size() - 1;
}

void AnnotationStore::apply(AttributionRecord record) {
  next_id_ = std::max(next_id_, record.record_id + 1);
  AttributionKey key{record.dialogue_id, record.sentence_index, record.annotator_id};
  attributions_.push_back(std::move(record));
  effective_attribution_[key] = attributions_.size() - 1;
}

const AnnotationStore::Experiment& AnnotationStore::experiment(std::string_view experiment_id) const {
  const auto it = experiments_.find(experiment_id);
  if (it == experiments_.end()) raise(ErrorKind::UnknownExperiment, "no experiment '" + std::string(experiment_id) + "'");
  return it->second;
}

std::vector<std::string> AnnotationStore::experiment_ids() const {
  std::lock_guard lock(mutex_);
  std::vector<std::string> out;
  for (const auto& entry : experiments_) out.push_back(entry.first);
  return out;
}

std::size_t AnnotationStore::pair_count(std::string_view experiment_id) const {
  std::lock_guard lock(mutex_);
  return experiment(experiment_id).pairs.size();
}

std::optional<ServedPair> AnnotationStore::next_pair(std::string_view experiment_id,
                                                     std::string_view annotator_id) const {
  std::lock_guard lock(mutex_);
  const Experiment& exp = experiment(experiment_id);
  require_annotator(annotator_id);
  const ServedPair* best = nullptr;
  std::size_t best_count = 0;
  for (const ServedPair& pair : exp.pairs) {
    const std::string e(experiment_id);
    if (effective_preference_.contains({e, pair.pair_id, std::string(annotator_id)})) continue;
    std::size_t judged = 0;
    for (auto it = effective_preference_.lower_bound({e, pair.pair_id, std::string()});
         it != effective_preference_.end() && std::get<0>(it->first) == e && std::get<1>(it->first) == pair.pair_id;
         ++it) {
      ++judged;
    }
    if (!best || judged < best_count) {
      best = &pair;
      best_count = judged;
    }
  }
  if (!best) return std::nullopt;
  return *best;
}

std::uint64_t AnnotationStore::submit_preference(std::string_view experiment_id, std::string_view pair_id,
                                                 std::string_view annotator_id, std::string_view choice) {
  std::lock_guard lock(mutex_);
  const Experiment& exp = experiment(experiment_id);
  const bool known = std::any_of(exp.pairs.begin(), exp.pairs.end(),
                                 [pair_id](const ServedPair& p) { return p.pair_id == pair_id; });
  if (!known) raise(ErrorKind::UnknownPair, "no pair '" + std::string(pair_id) + "' in " + std::string(experiment_id));
  require_annotator(annotator_id);
  PreferenceRecord record{next_id_,         std::string(experiment_id), std::string(pair_id), std::string(annotator_id),
                          parse_choice(choice), utc_timestamp(),        std::nullopt};
  const auto previous = effective_preference_.find({record.experiment_id, record.pair_id, record.annotator_id});
  if (previous != effective_preference_.end()) record.supersedes = preferences_[previous->second].record_id;
  append_line(to_json(record).dump());
  const std::uint64_t id = record.record_id;
  apply(std::move(record));
  return id;
}

std::vector<PreferenceRecord> AnnotationStore::effective_preferences(std::string_view experiment_id) const {
  std::lock_guard lock(mutex_);
  std::vector<PreferenceRecord> out;
  for (const auto& [key, index] : effective_preference_) {
    if (std::get<0>(key) == experiment_id) out.push_back(preferences_[index]);
  }
  return out;
}

std::vector<PreferenceRecord> AnnotationStore::audit_chain(std::string_view experiment_id, std::string_view pair_id,
                                                           std::string_view annotator_id) const {
  std::lock_guard lock(mutex_);
  std::vector<PreferenceRecord> out;
  for (const PreferenceRecord& r : preferences_) {
    if (r.experiment_id == experiment_id && r.pair_id == pair_id && r.annotator_id == annotator_id) out.push_back(r);
  }
  return out;
}

ExperimentResults AnnotationStore::results(std::string_view experiment_id) const {
  std::lock_guard lock(mutex_);
  const Experiment& exp = experiment(experiment_id);
  if (!exp.key) raise(ErrorKind::KeyUnavailable, "experiment " + std::string(experiment_id) + " has no unblinding key");
  ExperimentResults out;
  out.experiment_id = std::string(experiment_id);
  out.system_a = exp.key->system_a;
  out.system_b = exp.key->system_b;
  for (const auto& [key, index] : effective_preference_) {
    if (std::get<0>(key) != experiment_id) continue;
    const PreferenceRecord& r = preferences_[index];
    if (r.choice == Choice::Tie) {
      ++out.tally.ties;
      continue;
    }
    const auto side = exp.key->a_on_left.find(r.pair_id);
    if (side == exp.key->a_on_left.end()) raise(ErrorKind::KeyUnavailable, "key has no entry for " + r.pair_id);
    const bool a_won = (r.choice == Choice::Left) == side->second;
    ++(a_won ? out.tally.wins_a : out.tally.wins_b);
  }
  if (out.tally.total() == 0) raise(ErrorKind::NoRecords, "no preferences recorded for " + std::string(experiment_id));
  out.rates = metrics::preference_rates(out.tally);
  return out;
}

ordered_json AnnotationStore::export_unblinded(std::string_view experiment_id) const {
  std::lock_guard lock(mutex_);
  const Experiment& exp = experiment(experiment_id);
  if (!exp.key) raise(ErrorKind::KeyUnavailable, "experiment " + std::string(experiment_id) + " has no unblinding key");
  ordered_json records = ordered_json::array();
  for (std::size_t i = 0; i < preferences_.size(); ++i) {
    const PreferenceRecord& r = preferences_[i];
    if (r.experiment_id != experiment_id) continue;
    ordered_json entry = to_json(r);
    entry.erase("type");
    const auto side = exp.key->a_on_left.find(r.pair_id);
    if (side != exp.key->a_on_left.end()) {
      entry["left_system"] = side->second ? exp.key->system_a : exp.key->system_b;
      entry["right_system"] = side->second ? exp.key->system_b : exp.key->system_a;
      if (r.choice == Choice::Tie) {
        entry["preferred_system"] = nullptr;
      } else {
        const bool a_won = (r.choice == Choice::Left) == side->second;
        entry["preferred_system"] = a_won ? exp.key->system_a : exp.key->system_b;
      }
    }
    const auto eff = effective_preference_.find({r.experiment_id, r.pair_id, r.annotator_id});
    entry["effective"] = eff != effective_preference_.end() && eff->second == i;
    records.push_back(std::move(entry));
  }
  ordered_json out;
  out["experiment_id"] = std::string(experiment_id);
  out["systems"] = {{"A", exp.key->system_a}, {"B", exp.key->system_b}};
  out["records"] = std::move(records);
  return out;
}

AttributionView AnnotationStore::attribution_task(std::string_view dialogue_id) const {
  std::lock_guard lock(mutex_);
  const auto task = attribution_tasks_.find(dialogue_id);
  if (task == attribution_tasks_.end()) {
    raise(ErrorKind::UnknownDialogue, "no attribution task for '" + std::string(dialogue_id) + "'");
  }
  AttributionView view{task->second.first, task->second.second, {}, 0.0};
  for (const auto& [key, index] : effective_attribution_) {
    if (std::get<0>(key) != dialogue_id) continue;
    const AttributionRecord& r = attributions_[index];
    auto [it, inserted] = view.labels.emplace(r.sentence_index, r);
    if (!inserted && r.record_id > it->second.record_id) it->second = r;
  }
  for (const auto& [sentence, record] : view.labels) {
    if (sentence < view.summary.sentences.size()) view.summary.sentences[sentence].attributions = record.turn_indices;
  }
  view.coverage = metrics::attribution_coverage(view.summary);
  return view;
}

std::uint64_t AnnotationStore::submit_attribution(std::string_view dialogue_id, std::size_t sentence_index,
                                                  std::vector<std::size_t> turn_indices,
                                                  std::string_view annotator_id) {
  std::lock_guard lock(mutex_);
  const auto task = attribution_tasks_.find(dialogue_id);
  if (task == attribution_tasks_.end()) {
    raise(ErrorKind::UnknownDialogue, "no attribution task for '" + std::string(dialogue_id) + "'");
  }
  const auto& [dialogue, summary] = task->second;
  if (sentence_index >= summary.sentences.size()) {
    raise(ErrorKind::UnknownSentence, "summary of " + std::string(dialogue_id) + " has no sentence " +
                                          std::to_string(sentence_index));
  }
  for (std::size_t turn : turn_indices) {
    if (turn >= dialogue.turns.size()) {
      raise(ErrorKind::InvalidTurnIndex, "dialogue " + std::string(dialogue_id) + " has no turn " + std::to_string(turn));
    }
  }
  require_annotator(annotator_id);
  std::sort(turn_indices.begin(), turn_indices.end());
  turn_indices.erase(std::unique(turn_indices.begin(), turn_indices.end()), turn_indices.end());
  AttributionRecord record{next_id_,         std::string(dialogue_id), sentence_index, std::move(turn_indices),
                           std::string(annotator_id), utc_timestamp(),  std::nullopt};
  const auto previous =
      effective_attribution_.find({record.dialogue_id, record.sentence_index, record.annotator_id});
  if (previous != effective_attribution_.end()) record.supersedes = attributions_[previous->second].record_id;
  append_line(to_json(record).dump());
  const std::uint64_t id = record.record_id;
  apply(std::move(record));
  return id;
}

std::size_t AnnotationStore::record_count() const {
  std::lock_guard lock(mutex_);
  return preferences_.size() + attributions_.size();
}

}  // namespace refine_loop::service
