#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "refine_loop/core/model.hpp"

namespace refine_loop::harness {

/// Generated support call with a correct, fully attributed summary.
struct SyntheticCase {
  Dialogue dialogue;
  Summary summary;
};

// Small talk is added until the dialogue has at least `min_words` words.
SyntheticCase synthetic_case(std::string id, std::uint64_t seed, std::size_t min_words = 0);

// Ids are "synthetic-001", "synthetic-002", ...
std::vector<SyntheticCase> synthetic_corpus(std::size_t n, std::uint64_t seed, std::size_t min_words = 0);

}  // namespace refine_loop::harness
