#pragma once

#include <cstdint>
#include <random>
#include <string_view>
#include <utility>
#include <vector>

namespace refine_loop::harness {

// Independent stream seed for (seed, name), e.g. one per dialogue id.
std::uint64_t derive_seed(std::uint64_t seed, std::string_view stream);

/// Seeded generator whose draws are identical on every platform (the std
/// distributions are implementation-defined, so they are not used).
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t next() { return engine_(); }
  // Uniform in [0, n). n must be positive.
  std::size_t index(std::size_t n);
  // Uniform in [0, 1).
  double unit();
  bool bernoulli(double p) { return unit() < p; }
  // Uniform in [lo, hi].
  int between(int lo, int hi) { return lo + static_cast<int>(index(static_cast<std::size_t>(hi - lo + 1))); }

  template <typename T>
  void shuffle(std::vector<T>& values) {
    for (std::size_t i = values.size(); i > 1; --i) std::swap(values[i - 1], values[index(i)]);
  }

  template <typename T>
  const T& pick(const std::vector<T>& values) {
    return values[index(values.size())];
  }

 private:
  std::mt19937_64 engine_;
};

}  // namespace refine_loop::harness
