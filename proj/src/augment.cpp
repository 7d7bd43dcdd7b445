#include "patchrex/augment.hpp"

#include <algorithm>
#include <cmath>

#include "patchrex/errors.hpp"

namespace patchrex {

TimeSeries amplitude_modulation_with(const TimeSeries& series, const std::vector<int>& changepoints,
                                     const std::vector<double>& amplitudes) {
  const int T = series.length();
  if (T < 2) return series;
  std::vector<int> anchors;
  anchors.reserve(changepoints.size() + 2);
  anchors.push_back(0);
  for (int c : changepoints) anchors.push_back(c);
  anchors.push_back(T - 1);
  if (amplitudes.size() != anchors.size()) {
    throw DataError("amplitude_modulation: need one amplitude per anchor");
  }
  TimeSeries out = series;
  size_t seg = 0;
  for (int t = 0; t < T; ++t) {
    while (seg + 2 < anchors.size() && t > anchors[seg + 1]) ++seg;
    const int a = anchors[seg];
    const int b = anchors[seg + 1];
    const double frac = b > a ? static_cast<double>(t - a) / (b - a) : 0.0;
    const double trend = amplitudes[seg] + (amplitudes[seg + 1] - amplitudes[seg]) * frac;
    if (out.observed[static_cast<size_t>(t)]) out.values[static_cast<size_t>(t)] *= trend;
  }
  return out;
}

TimeSeries amplitude_modulation(const TimeSeries& series, Rng& rng) {
  const int T = series.length();
  if (T < 2) return series;
  int k = static_cast<int>(rng.uniform_int(0, 5));
  k = std::min<int>(k, T - 2);  // changepoints live strictly between the anchors
  std::vector<int> cps;
  if (k > 0) {
    auto drawn = rng.sample_distinct(1, T - 2, k);
    std::sort(drawn.begin(), drawn.end());
    for (int64_t c : drawn) cps.push_back(static_cast<int>(c));
  }
  std::vector<double> amps(static_cast<size_t>(k) + 2);
  for (auto& a : amps) a = rng.normal(1.0, 1.0);  // negative trend values allowed
  return amplitude_modulation_with(series, cps, amps);
}

double empirical_quantile(std::vector<double> values, double q) {
  if (values.empty()) throw DataError("empirical_quantile: no values");
  std::sort(values.begin(), values.end());
  if (values.size() == 1) return values[0];
  const double pos = q * static_cast<double>(values.size() - 1);
  const auto lo = static_cast<size_t>(std::floor(pos));
  const size_t hi = std::min(lo + 1, values.size() - 1);
  const double frac = pos - static_cast<double>(lo);
  return values[lo] + (values[hi] - values[lo]) * frac;
}

TimeSeries censor_with(const TimeSeries& series, double q, bool top) {
  std::vector<double> observed;
  observed.reserve(series.values.size());
  for (int t = 0; t < series.length(); ++t) {
    if (series.observed[static_cast<size_t>(t)]) observed.push_back(series.values[static_cast<size_t>(t)]);
  }
  if (observed.empty()) throw DataError("censor: no observed values");
  const double c = empirical_quantile(std::move(observed), q);
  TimeSeries out = series;
  for (int t = 0; t < series.length(); ++t) {
    if (!out.observed[static_cast<size_t>(t)]) continue;
    double& v = out.values[static_cast<size_t>(t)];
    v = top ? std::min(v, c) : std::max(v, c);
  }
  return out;
}

TimeSeries censor(const TimeSeries& series, Rng& rng) {
  const double q = rng.uniform();
  const bool bottom = rng.bernoulli(0.5);
  return censor_with(series, q, !bottom);
}

namespace {

double kernel_eval(SpikeKernelKind kind, const SpikeLabelKernel& k, double dist) {
  switch (kind) {
    case SpikeKernelKind::kTophat:
      return std::abs(dist) <= k.width / 2.0 ? k.amplitude : 0.0;
    case SpikeKernelKind::kRbf:
      return k.amplitude * std::exp(-dist * dist / (2.0 * k.width * k.width));
    case SpikeKernelKind::kLinear:
      return k.amplitude * std::max(0.0, 1.0 - std::abs(dist) / (k.width / 2.0));
  }
  return 0.0;
}

double kernel_reach(SpikeKernelKind kind, const SpikeLabelKernel& k) {
  return kind == SpikeKernelKind::kRbf ? 5.0 * k.width : k.width / 2.0 + 1.0;
}

}  // namespace

TimeSeries spike_injection_with(const TimeSeries& series, const SpikeParams& params) {
  const int T = series.length();
  if (params.pattern.empty() || params.period <= 0.0) {
    throw DataError("spike_injection: invalid parameters");
  }
  std::vector<double> signal(static_cast<size_t>(T), 0.0);
  const int L = static_cast<int>(params.pattern.size());
  double max_reach = 0.0;
  for (const auto& k : params.kernels) {
    max_reach = std::max(max_reach, kernel_reach(params.kind, k));
  }
  // Anchors tile backwards from the final spike; labels cycle backwards
  // through the pattern so anchor j (from the end) gets pattern[L-1-j mod L].
  for (int j = 0;; ++j) {
    const double pos = params.last_pos - j * params.period;
    if (pos < -max_reach) break;
    const int label = params.pattern[static_cast<size_t>((((L - 1 - j) % L) + L) % L)];
    if (label < 0 || label >= static_cast<int>(params.kernels.size())) {
      throw DataError("spike_injection: label without kernel");
    }
    const auto& k = params.kernels[static_cast<size_t>(label)];
    const double reach = kernel_reach(params.kind, k);
    const int lo = std::max(0, static_cast<int>(std::floor(pos - reach)));
    const int hi = std::min(T - 1, static_cast<int>(std::ceil(pos + reach)));
    for (int t = lo; t <= hi; ++t) {
      signal[static_cast<size_t>(t)] += kernel_eval(params.kind, k, t - pos);
    }
  }
  TimeSeries out = series;
  for (int t = 0; t < T; ++t) {
    if (out.observed[static_cast<size_t>(t)]) out.values[static_cast<size_t>(t)] += signal[static_cast<size_t>(t)];
  }
  return out;
}

TimeSeries spike_injection(const TimeSeries& series, Rng& rng) {
  const int T = series.length();
  if (T < 11) return series;  // periodicity range U(10, min(512,T)) needs T > 10

  SpikeParams p;
  p.period = rng.uniform(10.0, static_cast<double>(std::min(512, T)));

  // Pattern categories and sampling probabilities: simple 0.75,
  // 3-periodic 0.10, 4-periodic 0.10, weekly-like 0.05.
  static const std::vector<std::vector<std::vector<int>>> kCategories = {
      {{0}, {0, 1}},
      {{0, 1, 2}, {0, 0, 1}},
      {{0, 0, 1, 1}, {0, 1, 0, 2}},
      {{0, 0, 0, 0, 0, 1, 1}, {0, 0, 0, 0, 0, 1, 2}},
  };
  const double u = rng.uniform();
  size_t cat = u < 0.75 ? 0 : u < 0.85 ? 1 : u < 0.95 ? 2 : 3;
  const auto& options = kCategories[cat];
  std::vector<int> pattern = options[static_cast<size_t>(rng.uniform_int(0, static_cast<int64_t>(options.size()) - 1))];
  const auto rot = static_cast<size_t>(rng.uniform_int(0, static_cast<int64_t>(pattern.size()) - 1));
  std::rotate(pattern.begin(), pattern.begin() + static_cast<std::ptrdiff_t>(rot), pattern.end());
  p.pattern = std::move(pattern);

  const double s = rng.uniform(static_cast<double>(T) - p.period, static_cast<double>(T));
  p.last_pos = std::floor(s);

  p.kind = static_cast<SpikeKernelKind>(rng.uniform_int(0, 2));
  int max_label = 0;
  for (int l : p.pattern) max_label = std::max(max_label, l);
  p.kernels.resize(static_cast<size_t>(max_label) + 1);
  for (auto& k : p.kernels) {
    k.width = rng.uniform(0.05 * p.period, 0.2 * p.period);
    k.amplitude = rng.uniform(0.5, 3.0);
  }
  return spike_injection_with(series, p);
}

TimeSeries apply_training_augmentations(const TimeSeries& series, Rng& rng,
                                        const AugmentProbs& probs, AugmentApplied* applied) {
  TimeSeries out = series;
  AugmentApplied flags;
  if (rng.bernoulli(probs.amplitude)) {
    out = amplitude_modulation(out, rng);
    flags.amplitude = true;
  }
  if (rng.bernoulli(probs.censor) && out.observed_count() > 0) {
    out = censor(out, rng);
    flags.censor = true;
  }
  if (rng.bernoulli(probs.spike)) {
    out = spike_injection(out, rng);
    flags.spike = true;
  }
  if (applied != nullptr) *applied = flags;
  return out;
}

}  // namespace patchrex
