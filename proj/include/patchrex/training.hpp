#pragma once

#include <string>
#include <vector>

#include "patchrex/augment.hpp"
#include "patchrex/cpm.hpp"
#include "patchrex/model.hpp"

namespace patchrex {

struct CpmConfig {
  int c_max = 5;
  double p_max = 0.25;
};

struct TrainConfig {
  int steps = 1000;
  int batch_size = 16;
  double peak_lr = 1e-3;
  double min_lr = 1e-4;
  double weight_decay = 0.01;
  double warmup_ratio = 0.05;
  int context_len = 2048;
  uint64_t seed = 0;
  CpmConfig cpm;
  AugmentProbs augment;
  double clip_norm = 1.0;
  int log_every = 10;
  int workers = 1;

  // Training-time input masking. kCpm is the standard path; kTailRollout
  // always masks the final tail_patches patches; kNone trains next-patch only.
  enum class MaskPolicy { kCpm, kTailRollout, kNone };
  MaskPolicy mask_policy = MaskPolicy::kCpm;
  int tail_patches = 4;

  void validate() const;  // throws ConfigError
};

// Linear warmup to peak_lr over ceil(warmup_ratio*steps) steps, then cosine
// decay to min_lr at the final step.
double lr_at(int step, const TrainConfig& cfg);

struct AdamWState {
  ModelParams m, v;
  long t = 0;
};
AdamWState init_adamw(const ModelParams& params);

// Decoupled weight decay; beta1=0.9, beta2=0.999, eps=1e-8. Decay skips
// biases and gains (per the ParamView decay flag).
void adamw_step(ModelParams& params, const ModelParams& grads, AdamWState& state, double lr,
                double weight_decay);

// Scales all gradients so the global L2 norm is at most max_norm; returns the
// pre-clip norm.
double clip_grad_norm(ModelParams& grads, double max_norm);

struct SampleCounters {
  int masked_base_units = 0;  // CPM base-mask bits set
  int total_base_units = 0;
  int c_mask = 0;
};

// One training sample: crop/left-pad to context_len, augment, mask the input
// side, normalize over the pre-mask observed positions, patchify.
// Deterministic given the rng stream. Throws DataError when the crop has no
// observed value (caller resamples).
PatchBatch assemble_training_sample(const TimeSeries& raw, const TrainConfig& cfg,
                                    const ModelConfig& mcfg, Rng& rng,
                                    SampleCounters* counters = nullptr);

struct TrainResult {
  std::vector<double> loss;  // entry s-1 = batch loss at step s
  std::vector<double> lr;
};

// Runs steps (start_step, cfg.steps]. Per-(step,slot) RNG streams derive from
// cfg.seed only, so the trajectory is independent of worker scheduling and a
// resumed run continues the uninterrupted one exactly.
TrainResult train(const std::vector<TimeSeries>& corpus, const TrainConfig& cfg,
                  ModelParams& model, AdamWState& opt, int start_step = 0,
                  const std::vector<double>* sample_weights = nullptr);
TrainResult train(const std::vector<TimeSeries>& corpus, const TrainConfig& cfg,
                  ModelParams& model);

void write_loss_csv(const TrainResult& result, int log_every, const std::string& path);

// Training state sidecar ("PRXS"): model + optimizer moments at full f64
// precision plus the step counter, enough to resume bit-exactly.
struct TrainState {
  ModelParams model;
  AdamWState opt;
  int next_step = 0;
  uint64_t seed = 0;
};
void save_train_state(const TrainState& state, const std::string& path);
TrainState load_train_state(const std::string& path);

}  // namespace patchrex
