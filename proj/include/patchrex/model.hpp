#pragma once

#include <functional>
#include <iosfwd>
#include <string>
#include <vector>

#include "patchrex/slstm.hpp"
#include "patchrex/timeseries.hpp"

namespace patchrex {

struct ModelConfig {
  int m_in = 32;
  int m_out = 32;
  int d = 512;
  int d_ff = 2048;
  int n_heads = 4;
  int n_blocks = 12;
  int max_ctx_patches = 64;  // training context limit, in patches
  std::vector<double> quantiles = {0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9};

  int n_quantiles() const { return static_cast<int>(quantiles.size()); }
  void validate() const;  // throws ConfigError
};

// Two-layer residual block: y = w_out * gelu(w_in*u + b_in) + b_out + w_skip*u.
// Shared across all token positions.
struct ResidualBlockParams {
  Mat w_in;    // [hidden x in]
  Vec b_in;    // [hidden]
  Mat w_out;   // [out x hidden]
  Vec b_out;   // [out]
  Mat w_skip;  // [out x in]
};

struct ModelParams {
  ModelConfig config;
  ResidualBlockParams input_block;   // R^{2*m_in} -> R^d
  BackboneParams backbone;
  ResidualBlockParams output_block;  // R^d -> R^{m_out*|Q|}
};

ModelParams init_model(const ModelConfig& config, Rng& rng);
ModelParams zeros_like(const ModelParams& p);
long param_count(const ModelParams& p);

// Flat addressable view over every learnable array, in a fixed order. Data
// pointers alias Eigen storage (column-major).
struct ParamView {
  std::string name;
  double* data;
  long rows, cols;
  bool is_vector;
  bool decay;  // weight decay applies (matrices yes, biases/gains no)
  long size() const { return rows * cols; }
};
std::vector<ParamView> collect_params(ModelParams& p);

// ---- residual blocks (vectorized over token rows) --------------------------

ResidualBlockParams init_residual_block(int in, int hidden, int out, Rng& rng);
ResidualBlockParams zeros_like(const ResidualBlockParams& p);

Mat residual_block_forward(const Mat& u, const ResidualBlockParams& p, Mat* pre_cache = nullptr);
Mat residual_block_backward(const Mat& dy, const Mat& u, const Mat& pre,
                            const ResidualBlockParams& p, ResidualBlockParams& grads);

// Per-token views of the spec operations.
Vec input_residual_block(const Vec& token, const ResidualBlockParams& p);
Mat output_residual_block(const Vec& token, const ResidualBlockParams& p, int m_out, int n_q);

// ---- loss -------------------------------------------------------------------

// Pinball loss averaged over quantiles and observed target positions; 0 when
// nothing is observed.
double quantile_loss(const Mat& pred, const Vec& target, const std::vector<uint8_t>& observed,
                     const std::vector<double>& quantiles);
// Also fills d(loss)/d(pred).
double quantile_loss_grad(const Mat& pred, const Vec& target,
                          const std::vector<uint8_t>& observed,
                          const std::vector<double>& quantiles, Mat& dpred);

// ---- full model -------------------------------------------------------------

struct ModelCache {
  Mat tokens;
  Mat in_pre;        // input block hidden pre-activation
  Mat embedded;      // [n x d]
  BackboneCache backbone;
  Mat backbone_out;  // [n x d]
  Mat out_pre;       // output block hidden pre-activation
};

struct ModelOutput {
  // Row k holds token k's predictions, laid out position-major:
  // pred(k, t*|Q| + q) = quantile q at step t of the output window.
  Mat predictions;  // [n x m_out*|Q|]
  double loss = 0.0;
  int eligible_tokens = 0;  // tokens with >= 1 observed target position
};

ModelOutput model_forward(const PatchBatch& batch, const ModelParams& params,
                          ModelCache* cache = nullptr);
// Gradients of the batch-mean loss; returns them in `grads`.
void model_backward(const PatchBatch& batch, const ModelParams& params, const ModelCache& cache,
                    const ModelOutput& out, ModelParams& grads);

struct QuantileForecast {
  Mat values;  // [h x |Q|], original scale, nondecreasing across quantiles
  std::vector<double> quantile_levels;
};

// Multi-patch forecast: one forward pass with appended missing-value
// placeholder tokens, outputs denormalized and monotone-rearranged.
QuantileForecast forecast(const TimeSeries& context, int h, const ModelParams& params);

// Patch-wise autoregressive baseline: k forward passes feeding back the
// predicted median patch (ablation comparison path, not the primary one).
QuantileForecast forecast_autoregressive(const TimeSeries& context, int h,
                                         const ModelParams& params);

// ---- checkpoint ("PRXW") ----------------------------------------------------

void save_checkpoint(const ModelParams& params, std::ostream& out);
void save_checkpoint(const ModelParams& params, const std::string& path);
ModelParams load_checkpoint(std::istream& in);
ModelParams load_checkpoint(const std::string& path);

}  // namespace patchrex
