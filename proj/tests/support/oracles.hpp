#pragma once

#include <algorithm>
#include <cstddef>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include "refine_loop/core/model.hpp"

namespace refine_loop::testing {

// Minimum edit cost over every alignment path, enumerated without memoization.
inline std::size_t brute_force_edits(std::span<const std::string> ref, std::span<const std::string> hyp) {
  if (ref.empty()) return hyp.size();
  if (hyp.empty()) return ref.size();
  const std::size_t diagonal = (ref[0] == hyp[0] ? 0 : 1) + brute_force_edits(ref.subspan(1), hyp.subspan(1));
  const std::size_t deletion = 1 + brute_force_edits(ref.subspan(1), hyp);
  const std::size_t insertion = 1 + brute_force_edits(ref, hyp.subspan(1));
  return std::min({diagonal, deletion, insertion});
}

// Every sequence over `vocabulary` with length 0..max_len.
inline std::vector<std::vector<std::string>> all_sequences(const std::vector<std::string>& vocabulary,
                                                           std::size_t max_len) {
  std::vector<std::vector<std::string>> out{{}};
  std::size_t level_start = 0;
  for (std::size_t len = 1; len <= max_len; ++len) {
    const std::size_t level_end = out.size();
    for (std::size_t i = level_start; i < level_end; ++i) {
      for (const auto& word : vocabulary) {
        auto next = out[i];
        next.push_back(word);
        out.push_back(std::move(next));
      }
    }
    level_start = level_end;
  }
  return out;
}

struct Confusion {
  std::size_t tp = 0, fp = 0, tn = 0, fn = 0;
};

// Fail is the positive class.
inline Confusion brute_force_confusion(std::span<const Label> predicted, std::span<const Label> gold) {
  Confusion c;
  for (std::size_t i = 0; i < predicted.size(); ++i) {
    const bool p = predicted[i] == Label::Fail;
    const bool g = gold[i] == Label::Fail;
    if (p && g) ++c.tp;
    if (p && !g) ++c.fp;
    if (!p && !g) ++c.tn;
    if (!p && g) ++c.fn;
  }
  return c;
}

}  // namespace refine_loop::testing
