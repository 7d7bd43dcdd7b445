#include "patchrex/cpm.hpp"

#include "patchrex/errors.hpp"

namespace patchrex {

CpmParams sample_cpm_params(Rng& rng, int c_max, double p_max) {
  if (c_max < 1) throw ConfigError("cpm: c_max must be >= 1");
  if (p_max < 0.0 || p_max > 1.0) throw ConfigError("cpm: p_max must lie in [0,1]");
  CpmParams p;
  p.c_max = c_max;
  p.p_max = p_max;
  p.c_mask = static_cast<int>(rng.uniform_int(1, c_max));
  p.p_mask = rng.uniform(0.0, p_max);
  return p;
}

std::vector<uint8_t> build_cpm_mask(int T, int m_out, const CpmParams& params, Rng& rng) {
  if (T < 1) throw DataError("cpm: T must be >= 1");
  std::vector<uint8_t> mask(static_cast<size_t>(T), 0);
  const int unit = params.c_mask * m_out;
  const int base_len = T / unit;
  for (int b = 0; b < base_len; ++b) {
    if (rng.bernoulli(params.p_mask)) {
      for (int j = 0; j < unit; ++j) mask[static_cast<size_t>(b * unit + j)] = 1;
    }
  }
  return mask;
}

TimeSeries apply_mask(const TimeSeries& series, const std::vector<uint8_t>& mask) {
  if (mask.size() != series.values.size()) throw DataError("cpm: mask length mismatch");
  TimeSeries out = series;
  for (size_t t = 0; t < mask.size(); ++t) {
    if (mask[t]) {
      out.observed[t] = 0;
      out.values[t] = 0.0;
    }
  }
  return out;
}

}  // namespace patchrex
