#include "patchrex/rng.hpp"

#include <cmath>
#include <stdexcept>

namespace patchrex {

namespace {

uint64_t splitmix64(uint64_t z) {
  z += 0x9E3779B97F4A7C15ULL;
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

}  // namespace

int64_t Rng::uniform_int(int64_t lo, int64_t hi) {
  if (hi < lo) throw std::invalid_argument("uniform_int: hi < lo");
  const uint64_t range = static_cast<uint64_t>(hi - lo) + 1ULL;
  if (range == 0) return static_cast<int64_t>(next_u64());  // full 64-bit span
  uint64_t x = next_u64();
  __uint128_t m = static_cast<__uint128_t>(x) * range;
  auto l = static_cast<uint64_t>(m);
  if (l < range) {
    const uint64_t threshold = (0ULL - range) % range;
    while (l < threshold) {
      x = next_u64();
      m = static_cast<__uint128_t>(x) * range;
      l = static_cast<uint64_t>(m);
    }
  }
  return lo + static_cast<int64_t>(m >> 64);
}

double Rng::normal() {
  if (has_spare_) {
    has_spare_ = false;
    return spare_;
  }
  double u1 = uniform();
  while (u1 <= 0.0) u1 = uniform();
  const double u2 = uniform();
  const double r = std::sqrt(-2.0 * std::log(u1));
  const double theta = 2.0 * M_PI * u2;
  spare_ = r * std::sin(theta);
  has_spare_ = true;
  return r * std::cos(theta);
}

double Rng::gamma(double shape) {
  if (shape <= 0.0) throw std::invalid_argument("gamma: shape must be > 0");
  if (shape < 1.0) {
    // Boost to shape+1 and scale back.
    const double u = uniform();
    return gamma(shape + 1.0) * std::pow(u, 1.0 / shape);
  }
  const double d = shape - 1.0 / 3.0;
  const double c = 1.0 / std::sqrt(9.0 * d);
  for (;;) {
    double x = normal();
    double v = 1.0 + c * x;
    if (v <= 0.0) continue;
    v = v * v * v;
    const double u = uniform();
    if (u < 1.0 - 0.0331 * x * x * x * x) return d * v;
    if (std::log(u) < 0.5 * x * x + d * (1.0 - v + std::log(v))) return d * v;
  }
}

std::vector<double> Rng::dirichlet(double alpha, int k) {
  std::vector<double> w(static_cast<size_t>(k));
  double sum = 0.0;
  for (auto& wi : w) {
    wi = gamma(alpha);
    sum += wi;
  }
  for (auto& wi : w) wi /= sum;
  return w;
}

std::vector<int64_t> Rng::sample_distinct(int64_t lo, int64_t hi, int k) {
  const int64_t n = hi - lo + 1;
  if (k > n) throw std::invalid_argument("sample_distinct: k exceeds range");
  // Partial Fisher-Yates over the index range.
  std::vector<int64_t> pool(static_cast<size_t>(n));
  for (int64_t i = 0; i < n; ++i) pool[static_cast<size_t>(i)] = lo + i;
  std::vector<int64_t> out(static_cast<size_t>(k));
  for (int i = 0; i < k; ++i) {
    const int64_t j = uniform_int(i, n - 1);
    std::swap(pool[static_cast<size_t>(i)], pool[static_cast<size_t>(j)]);
    out[static_cast<size_t>(i)] = pool[static_cast<size_t>(i)];
  }
  return out;
}

uint64_t Rng::derive(uint64_t base, uint64_t a, uint64_t b) {
  return splitmix64(base ^ splitmix64(a ^ splitmix64(b)));
}

}  // namespace patchrex
