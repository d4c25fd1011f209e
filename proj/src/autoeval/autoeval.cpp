#include "refine_loop/autoeval/autoeval.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <numeric>

#include "refine_loop/core/error.hpp"
#include "refine_loop/core/log.hpp"
#include "refine_loop/core/text.hpp"
#include "refine_loop/llm/structured.hpp"

namespace refine_loop {
namespace {

using nlohmann::json;

const json* find_key(const json& object, std::string_view key) {
  for (auto it = object.begin(); it != object.end(); ++it) {
    if (to_lower_ascii(it.key()) == key) return &it.value();
  }
  return nullptr;
}

int score_value(const json& value, Dimension dimension) {
  const std::string name(to_string(dimension));
  if (value.is_number_integer()) return value.get<int>();
  if (value.is_number_float()) {
    const double v = value.get<double>();
    if (v != std::floor(v)) raise(ErrorKind::ScoreOutOfRange, name + " score " + value.dump() + " is not an integer");
    return static_cast<int>(v);
  }
  if (value.is_string()) {
    const std::string text = trim(value.get<std::string>());
    if (!text.empty() && std::all_of(text.begin(), text.end(), [](unsigned char c) { return std::isdigit(c); })) {
      return std::stoi(text);
    }
  }
  raise(ErrorKind::WrongKind, name + " score must be an integer, got " + value.dump());
}

Winner parse_pick(const std::string& reply) {
  const json payload = parse_payload(reply);
  if (!payload.is_object()) raise(ErrorKind::WrongKind, "comparison reply must be an object");
  const json* winner = find_key(payload, "winner");
  if (!winner) raise(ErrorKind::MissingField, "comparison reply lacks 'winner'");
  std::string pick = winner->is_string() ? to_lower_ascii(trim(winner->get<std::string>())) : winner->dump();
  if (pick == "first" || pick == "1") return Winner::A;
  if (pick == "second" || pick == "2") return Winner::B;
  if (pick == "tie") return Winner::Tie;
  raise(ErrorKind::WrongKind, "winner must be first, second or tie, got " + winner->dump());
}

Winner swap(Winner w) {
  if (w == Winner::A) return Winner::B;
  if (w == Winner::B) return Winner::A;
  return Winner::Tie;
}

}  // namespace

MeanStd mean_std(std::span<const double> values) {
  if (values.empty()) raise(ErrorKind::EmptyInput, "no values to aggregate");
  const double n = static_cast<double>(values.size());
  const double mean = std::accumulate(values.begin(), values.end(), 0.0) / n;
  if (values.size() == 1) return {mean, 0.0};
  double ss = 0.0;
  for (double v : values) ss += (v - mean) * (v - mean);
  return {mean, std::sqrt(ss / (n - 1.0))};
}

std::array<double, 3> DimensionScores::means() const {
  return {dims[0].mean, dims[1].mean, dims[2].mean};
}

JudgeReply parse_judge_reply(const std::string& reply) {
  const json payload = parse_payload(reply);
  if (!payload.is_object()) raise(ErrorKind::WrongKind, "judge reply must be an object");
  JudgeReply out;
  for (Dimension dimension : kAllDimensions) {
    const std::string key = to_lower_ascii(to_string(dimension));
    const json* entry = find_key(payload, key);
    if (!entry) raise(ErrorKind::MissingField, "judge reply lacks '" + key + "'");
    const std::size_t i = index_of(dimension);
    if (entry->is_object()) {
      const json* score = find_key(*entry, "score");
      if (!score) raise(ErrorKind::MissingField, "judge reply lacks '" + key + ".score'");
      out.scores[i] = score_value(*score, dimension);
      if (const json* why = find_key(*entry, "explanation"); why && why->is_string()) {
        out.explanations[i] = why->get<std::string>();
      }
    } else {
      out.scores[i] = score_value(*entry, dimension);
    }
    if (out.scores[i] < 1 || out.scores[i] > 5) {
      raise(ErrorKind::ScoreOutOfRange, key + " score " + std::to_string(out.scores[i]) + " is outside 1..5");
    }
  }
  return out;
}

DimensionScores aggregate_runs(std::span<const JudgeReply> replies) {
  DimensionScores out;
  for (Dimension dimension : kAllDimensions) {
    auto& dim = out[dimension];
    std::vector<double> values;
    for (const JudgeReply& reply : replies) {
      dim.runs.push_back(reply.scores[index_of(dimension)]);
      dim.explanations.push_back(reply.explanations[index_of(dimension)]);
      values.push_back(reply.scores[index_of(dimension)]);
    }
    const MeanStd stats = mean_std(values);
    dim.mean = stats.mean;
    dim.std = stats.std;
  }
  return out;
}

DimensionScores judge_summary(const Dialogue& dialogue, const Summary& summary, const PromptTemplate& prompt,
                              const LlmHandle& llm, int k) {
  if (k < 1) raise(ErrorKind::InvalidValue, "judge runs must be positive");
  const Bindings bindings = {{"dialogue", format_dialogue(dialogue)}, {"summary", format_summary(summary)}};
  std::vector<JudgeReply> replies;
  for (int run = 0; run < k; ++run) {
    LlmHandle handle = llm;
    if (llm.seed) handle.seed = *llm.seed + run;
    const ChatResponse first = call_agent(handle, prompt, bindings, run);
    try {
      replies.push_back(parse_judge_reply(first.content));
    } catch (const Error& e) {
      if (e.kind() != ErrorKind::ScoreOutOfRange) throw;
      log_warn(std::string("judge: ") + e.what() + "; asking again");
      const std::vector<ChatMessage> follow_up = {
          {ChatRole::Assistant, first.content},
          {ChatRole::User, "Every score must be an integer from 1 to 5. Reply again using the same format."}};
      const ChatResponse second = call_agent(handle, prompt, bindings, run, follow_up);
      replies.push_back(parse_judge_reply(second.content));
    }
  }
  return aggregate_runs(replies);
}

std::array<MeanStd, 3> corpus_scores(std::span<const DimensionScores> scores) {
  if (scores.empty()) raise(ErrorKind::EmptyInput, "no scored summaries");
  const std::size_t k = scores.front().dims[0].runs.size();
  std::array<MeanStd, 3> out;
  for (Dimension dimension : kAllDimensions) {
    std::vector<double> run_means(k, 0.0);
    for (const DimensionScores& s : scores) {
      const auto& runs = s[dimension].runs;
      if (runs.size() != k) raise(ErrorKind::LengthMismatch, "judge run counts differ across summaries");
      for (std::size_t r = 0; r < k; ++r) run_means[r] += runs[r];
    }
    for (double& m : run_means) m /= static_cast<double>(scores.size());
    out[index_of(dimension)] = mean_std(run_means);
  }
  return out;
}

nlohmann::ordered_json scores_to_json(const DimensionScores& scores) {
  nlohmann::ordered_json out;
  for (Dimension dimension : kAllDimensions) {
    const auto& dim = scores[dimension];
    out[to_lower_ascii(to_string(dimension))] = {
        {"mean", dim.mean}, {"std", dim.std}, {"runs", dim.runs}, {"explanations", dim.explanations}};
  }
  return out;
}

std::string_view to_string(Winner winner) noexcept {
  switch (winner) {
    case Winner::A: return "A";
    case Winner::B: return "B";
    case Winner::Tie: return "tie";
  }
  return "tie";
}

JudgeVerdict judge_compare(const Dialogue& dialogue, const Summary& a, const Summary& b, const PromptTemplate& prompt,
                           const LlmHandle& llm) {
  const std::string dialogue_text = format_dialogue(dialogue);
  const ChatResponse first = call_agent(
      llm, prompt, {{"dialogue", dialogue_text}, {"first", format_summary(a)}, {"second", format_summary(b)}}, 0);
  const ChatResponse second = call_agent(
      llm, prompt, {{"dialogue", dialogue_text}, {"first", format_summary(b)}, {"second", format_summary(a)}}, 1);
  JudgeVerdict verdict;
  verdict.first_order = parse_pick(first.content);
  verdict.second_order = swap(parse_pick(second.content));
  verdict.winner = verdict.first_order == verdict.second_order ? verdict.first_order : Winner::Tie;
  return verdict;
}

}  // namespace refine_loop
