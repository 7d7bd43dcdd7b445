#pragma once

#include <optional>
#include <string>
#include <vector>

#include "patchrex/rng.hpp"
#include "patchrex/timeseries.hpp"

namespace patchrex {

enum class GpKernelKind { kPeriodic, kRbf, kRationalQuadratic, kPiecewisePolynomial };

struct GpKernelLeaf {
  GpKernelKind kind = GpKernelKind::kRbf;
  double length_scale = 1.0;
  double periodicity = 0.0;  // periodic kernel only
  double alpha = 1.0;        // rational quadratic shape
};

// Left-to-right fold of leaves with binary {+, x} operators:
// (((leaf0 op0 leaf1) op1 leaf2) ...). 1..J leaves, gram stays PSD.
struct GpKernelExpr {
  std::vector<GpKernelLeaf> leaves;
  std::vector<char> ops;  // ops[i] in {'+','*'} combines with leaves[i+1]
};

double kernel_value(const GpKernelLeaf& leaf, double t1, double t2);
double expr_value(const GpKernelExpr& expr, double t1, double t2);

// j ~ U{1..J} leaves with replacement; periodicities from a fixed seasonal
// set {24,7,12,52,168} or log-uniform on [4, L/2]; length scales log-uniform
// on [1, L/4].
GpKernelExpr sample_kernel_expr(Rng& rng, int J = 4, int series_len = 1024);

Mat gram_matrix(const GpKernelExpr& expr, int L);

// Zero-mean GP draw on the integer grid 0..L-1 via jittered Cholesky
// (1e-6 -> 1e-4 escalation). nullopt when both jitters fail; the caller
// resamples the expression.
std::optional<TimeSeries> gp_sample(const GpKernelExpr& expr, int L, Rng& rng);

struct MixupSpec {
  int k_max = 4;
  int l_min = 128;
  int l_max = 4096;
  double alpha = 1.5;
};

// Convex Dirichlet-weighted combination of k z-scored segments of length l.
TimeSeries tsmixup(const std::vector<TimeSeries>& base, const MixupSpec& spec, Rng& rng);

struct CorpusSpec {
  int count = 1000;
  int length = 512;
  std::string family = "random";  // "random" | "locally_periodic"
  double noise_std = 0.0;         // iid observation noise added post-draw
  int j_max = 4;
  int tsmixup_count = 0;          // extra TSMixup series appended to the corpus
  MixupSpec mixup;
};

// Deterministic given the seed; series i depends only on (seed, i).
std::vector<TimeSeries> generate_corpus(const CorpusSpec& spec, uint64_t seed);

}  // namespace patchrex
