#pragma once

#include <vector>

#include "patchrex/rng.hpp"
#include "patchrex/timeseries.hpp"

namespace patchrex {

// Training-time augmentations. Each transform touches observed positions
// only, preserves series length and the observation mask, and is pure given
// an explicit RNG. The *_with variants take the sampled parameters explicitly
// so tests can pin them.

// Multiplies the series by a piecewise-linear trend anchored at
// [0, changepoints..., T-1] with amplitudes ~ N(1,1); up to 5 changepoints.
TimeSeries amplitude_modulation(const TimeSeries& series, Rng& rng);
TimeSeries amplitude_modulation_with(const TimeSeries& series, const std::vector<int>& changepoints,
                                     const std::vector<double>& amplitudes);

// Clips from below (bottom) or above (top) at the q-quantile of the observed
// values (linear-interpolated order statistic).
TimeSeries censor(const TimeSeries& series, Rng& rng);
TimeSeries censor_with(const TimeSeries& series, double q, bool top);

double empirical_quantile(std::vector<double> values, double q);

enum class SpikeKernelKind { kTophat, kRbf, kLinear };

struct SpikeLabelKernel {
  double width = 1.0;      // tophat/linear full width w, or sigma for rbf
  double amplitude = 1.0;  // h in [0.5, 3]
};

// Fully specified spike signal: anchors tile the (rotated) pattern backwards
// from `last_pos` with real-valued spacing `period`.
struct SpikeParams {
  SpikeKernelKind kind = SpikeKernelKind::kTophat;
  double period = 10.0;
  double last_pos = 0.0;                 // position of the final spike
  std::vector<int> pattern;              // label per anchor slot, e.g. {0,0,1}
  std::vector<SpikeLabelKernel> kernels;  // one entry per distinct label value
};

TimeSeries spike_injection(const TimeSeries& series, Rng& rng);
TimeSeries spike_injection_with(const TimeSeries& series, const SpikeParams& params);

struct AugmentProbs {
  double amplitude = 0.5;
  double censor = 0.5;
  double spike = 0.05;
};

struct AugmentApplied {
  bool amplitude = false;
  bool censor = false;
  bool spike = false;
};

// Gates each augmentation independently; order: amplitude -> censor -> spike.
TimeSeries apply_training_augmentations(const TimeSeries& series, Rng& rng,
                                        const AugmentProbs& probs = {},
                                        AugmentApplied* applied = nullptr);

}  // namespace patchrex
