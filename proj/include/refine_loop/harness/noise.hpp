#pragma once

#include <cstdint>
#include <string_view>

#include "refine_loop/core/model.hpp"
#include "refine_loop/metrics/metrics.hpp"

namespace refine_loop::harness {

struct NoiseSpec {
  // Word-level error rate to hit, in [0, 1).
  double target_wer = 0.0;
  // Per-turn probability of inserting one filler ("um", "ah", "[laughter]").
  double disfluency_rate = 0.0;
  bool channel_merge = false;
  double merge_probability = 0.2;
  std::uint64_t seed = 0;
  double tolerance = 0.01;
};

void validate(const NoiseSpec& spec);

struct NoiseResult {
  Dialogue noisy;
  double achieved_wer = 0.0;
  metrics::AlignmentCounts counts;
  std::size_t word_edits = 0;
  std::size_t disfluencies = 0;
  std::size_t merges = 0;
};

// Fillers are ignored when scoring a transcript ("um", "uh", "ah", "laughter").
bool is_filler(std::string_view word) noexcept;

// WER of the noisy transcript against the clean one: all turn words in order,
// fillers removed from both sides.
metrics::WerResult transcript_wer(const Dialogue& clean, const Dialogue& noisy);

/// Simulated transcription noise, in three seeded steps: word substitutions,
/// deletions and insertions until transcript_wer is within tolerance of the
/// target; filler insertion; then merging of adjacent turns from different
/// speakers (each pair with merge_probability, text joined under the first
/// speaker). Throws TargetUnreachable when the dialogue is too short.
NoiseResult inject_asr_noise(const Dialogue& dialogue, const NoiseSpec& spec);

}  // namespace refine_loop::harness
