#pragma once

#include <cstdint>
#include <vector>

#include "patchrex/rng.hpp"
#include "patchrex/timeseries.hpp"

namespace patchrex {

// Recurrent state of one sLSTM layer. c/n/h follow the cell equations; m is
// the log-domain stabilizer that keeps the exp-activated gates finite. The
// hidden output is invariant to m, so backprop treats m as a constant.
struct SLstmState {
  Vec c, n, h, m;
  static SLstmState zero(int d);
};

// Gate order everywhere: z (cell input), i, f, o.
struct SLstmLayerParams {
  Mat w_z, w_i, w_f, w_o;  // [d x d_in]
  Mat r_z, r_i, r_f, r_o;  // [d x d], block-diagonal with n_heads blocks
  Vec b_z, b_i, b_f, b_o;  // [d]
  int n_heads = 1;

  int dim() const { return static_cast<int>(w_z.rows()); }
  int input_dim() const { return static_cast<int>(w_z.cols()); }
};

struct BlockParams {
  SLstmLayerParams slstm;
  Vec norm1_gain, norm2_gain;  // [d]
  Mat ffn_in;                  // [d_ff x d]
  Vec ffn_b_in;                // [d_ff]
  Mat ffn_out;                 // [d x d_ff]
  Vec ffn_b_out;               // [d]
};

struct BackboneParams {
  std::vector<BlockParams> blocks;
  Vec final_norm_gain;
};

inline constexpr double kRmsNormEps = 1e-6;

// Zeroes every entry of r outside the n_heads diagonal blocks.
void apply_head_mask(Mat& r, int n_heads);

SLstmLayerParams init_slstm_layer(int d_in, int d, int n_heads, Rng& rng);
BlockParams init_block(int d, int d_ff, int n_heads, Rng& rng);
BackboneParams init_backbone(int d, int d_ff, int n_heads, int n_blocks, Rng& rng);

SLstmLayerParams zeros_like(const SLstmLayerParams& p);
BlockParams zeros_like(const BlockParams& p);
BackboneParams zeros_like(const BackboneParams& p);

double gelu(double u);
double gelu_grad(double u);

// ---- forward caches -------------------------------------------------------

struct RmsNormCache {
  Mat x;        // input rows
  Vec inv_rms;  // 1/sqrt(mean(x^2)+eps) per row
};

struct SLstmLayerCache {
  Mat x;                      // [T x d_in]
  Mat z, o, iprime, fprime;   // activated gates, [T x d]
  Mat c, n, hbefore, h, m;    // states per step, [T x d]
  SLstmState init;
};

struct BlockCache {
  RmsNormCache norm1;
  SLstmLayerCache slstm;
  Mat y1;  // after first residual
  RmsNormCache norm2;
  Mat norm2_out;
  Mat ffn_pre;  // [T x d_ff]
};

struct BackboneCache {
  std::vector<BlockCache> blocks;
  RmsNormCache final_norm;
};

// ---- ops ------------------------------------------------------------------

// y_i = x_i / sqrt(mean_j(x_j^2) + eps) * gain_i, applied per row.
Mat rmsnorm(const Mat& x, const Vec& gain, RmsNormCache* cache = nullptr);
Mat rmsnorm_backward(const Mat& dy, const RmsNormCache& cache, const Vec& gain, Vec& dgain);

// One recurrence step in stabilized form; equals the naive exp-gate form
// exactly in exact arithmetic.
std::pair<Vec, SLstmState> slstm_step(const Vec& x, const SLstmState& state,
                                      const SLstmLayerParams& p);

// Sequential unroll; output row t depends only on input rows <= t.
Mat slstm_layer_forward(const Mat& x, const SLstmLayerParams& p, const SLstmState& init,
                        SLstmLayerCache* cache = nullptr);
// Returns dX; accumulates parameter gradients (head mask applied to dR).
Mat slstm_layer_backward(const Mat& dh, const SLstmLayerCache& cache, const SLstmLayerParams& p,
                         SLstmLayerParams& grads);

// y1 = x + slstm(rmsnorm(x)); y = y1 + ffn(rmsnorm(y1)), ffn with GELU.
Mat block_forward(const Mat& x, const BlockParams& p, BlockCache* cache = nullptr);
Mat block_backward(const Mat& dy, const BlockCache& cache, const BlockParams& p,
                   BlockParams& grads);

// Stacked blocks followed by a final RMSNorm.
Mat backbone_forward(const Mat& x, const BackboneParams& p, BackboneCache* cache = nullptr);
Mat backbone_backward(const Mat& dy, const BackboneCache& cache, const BackboneParams& p,
                      BackboneParams& grads);

// Forward-pass counter for structural tests of the inference paths.
extern thread_local uint64_t backbone_forward_calls;

}  // namespace patchrex
