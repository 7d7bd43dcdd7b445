#pragma once

#include <cstdint>
#include <random>
#include <vector>

namespace patchrex {

// Deterministic RNG. The mt19937_64 engine output is pinned by the standard;
// the distribution transforms are implemented here because the std::
// distributions are implementation-defined, which would break byte-identical
// corpora and checkpoints across toolchains.
class Rng {
 public:
  explicit Rng(uint64_t seed) : engine_(seed) {}

  uint64_t next_u64() { return engine_(); }

  // Uniform on [0, 1) with 53-bit resolution.
  double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // Uniform integer on {lo, ..., hi}, inclusive. Unbiased (Lemire rejection).
  int64_t uniform_int(int64_t lo, int64_t hi);

  bool bernoulli(double p) { return uniform() < p; }

  // Standard normal via Box-Muller (pair cached).
  double normal();
  double normal(double mean, double std) { return mean + std * normal(); }

  // Gamma(shape, 1) via Marsaglia-Tsang.
  double gamma(double shape);

  // Symmetric Dirichlet(alpha) of dimension k; entries sum to 1.
  std::vector<double> dirichlet(double alpha, int k);

  // Fisher-Yates sample of `k` distinct values from {lo, ..., hi}.
  std::vector<int64_t> sample_distinct(int64_t lo, int64_t hi, int k);

  // Stream derivation for parallel/per-item reproducibility: the result
  // depends only on (base, a, b), never on draw order.
  static uint64_t derive(uint64_t base, uint64_t a, uint64_t b = 0);

 private:
  std::mt19937_64 engine_;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

}  // namespace patchrex
