#pragma once

#include <cstdint>
#include <vector>

#include "patchrex/rng.hpp"
#include "patchrex/timeseries.hpp"

namespace patchrex {

// Contiguous Patch Masking parameters, sampled per training sample.
struct CpmParams {
  int c_mask = 1;       // consecutive patches per mask unit, in [1, c_max]
  double p_mask = 0.0;  // Bernoulli masking probability, in [0, p_max]
  int c_max = 5;
  double p_max = 0.25;
};

// c_mask ~ U{1..c_max}, p_mask ~ U[0, p_max].
CpmParams sample_cpm_params(Rng& rng, int c_max = 5, double p_max = 0.25);

// Bernoulli(p_mask) base mask of length floor(T/(c_mask*m_out)), each bit
// repeated c_mask*m_out times; the remainder tail stays unmasked.
// Returns length-T flags, 1 = masked.
std::vector<uint8_t> build_cpm_mask(int T, int m_out, const CpmParams& params, Rng& rng);

// Input-side view: observed flags cleared (and values set to the placeholder)
// where the mask is set. Loss targets keep the original series.
TimeSeries apply_mask(const TimeSeries& series, const std::vector<uint8_t>& mask);

}  // namespace patchrex
