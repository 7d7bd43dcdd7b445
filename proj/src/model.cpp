#include "patchrex/model.hpp"

#include <algorithm>
#include <cmath>

#include "patchrex/errors.hpp"

namespace patchrex {

void ModelConfig::validate() const {
  if (m_in <= 0 || m_out <= 0) throw ConfigError("model: patch sizes must be positive");
  if (m_in != m_out) throw ConfigError("model: m_in must equal m_out");
  if (d <= 0 || d_ff <= 0 || n_blocks <= 0) throw ConfigError("model: dims must be positive");
  if (n_heads <= 0 || d % n_heads != 0) throw ConfigError("model: d must be divisible by n_heads");
  if (max_ctx_patches <= 0) throw ConfigError("model: max_ctx_patches must be positive");
  if (quantiles.empty()) throw ConfigError("model: quantile list is empty");
  for (size_t i = 0; i < quantiles.size(); ++i) {
    if (quantiles[i] <= 0.0 || quantiles[i] >= 1.0) {
      throw ConfigError("model: quantile levels must lie in (0,1)");
    }
    if (i > 0 && quantiles[i] <= quantiles[i - 1]) {
      throw ConfigError("model: quantile levels must be strictly increasing");
    }
  }
}

ResidualBlockParams init_residual_block(int in, int hidden, int out, Rng& rng) {
  auto fanin = [&rng](int r, int c) {
    const double a = std::sqrt(3.0 / c);
    Mat w(r, c);
    for (int j = 0; j < c; ++j) {
      for (int i = 0; i < r; ++i) w(i, j) = rng.uniform(-a, a);
    }
    return w;
  };
  ResidualBlockParams p;
  p.w_in = fanin(hidden, in);
  p.b_in = Vec::Zero(hidden);
  p.w_out = fanin(out, hidden);
  p.b_out = Vec::Zero(out);
  p.w_skip = fanin(out, in);
  return p;
}

ResidualBlockParams zeros_like(const ResidualBlockParams& p) {
  ResidualBlockParams g;
  g.w_in = Mat::Zero(p.w_in.rows(), p.w_in.cols());
  g.b_in = Vec::Zero(p.b_in.size());
  g.w_out = Mat::Zero(p.w_out.rows(), p.w_out.cols());
  g.b_out = Vec::Zero(p.b_out.size());
  g.w_skip = Mat::Zero(p.w_skip.rows(), p.w_skip.cols());
  return g;
}

ModelParams init_model(const ModelConfig& config, Rng& rng) {
  config.validate();
  ModelParams p;
  p.config = config;
  p.input_block = init_residual_block(2 * config.m_in, config.d, config.d, rng);
  p.backbone = init_backbone(config.d, config.d_ff, config.n_heads, config.n_blocks, rng);
  p.output_block =
      init_residual_block(config.d, config.d, config.m_out * config.n_quantiles(), rng);
  return p;
}

ModelParams zeros_like(const ModelParams& p) {
  ModelParams g;
  g.config = p.config;
  g.input_block = zeros_like(p.input_block);
  g.backbone = zeros_like(p.backbone);
  g.output_block = zeros_like(p.output_block);
  return g;
}

namespace {

void collect_residual(const std::string& prefix, ResidualBlockParams& p,
                      std::vector<ParamView>& out) {
  out.push_back({prefix + ".w_in", p.w_in.data(), p.w_in.rows(), p.w_in.cols(), false, true});
  out.push_back({prefix + ".b_in", p.b_in.data(), p.b_in.size(), 1, true, false});
  out.push_back({prefix + ".w_out", p.w_out.data(), p.w_out.rows(), p.w_out.cols(), false, true});
  out.push_back({prefix + ".b_out", p.b_out.data(), p.b_out.size(), 1, true, false});
  out.push_back(
      {prefix + ".w_skip", p.w_skip.data(), p.w_skip.rows(), p.w_skip.cols(), false, true});
}

void collect_slstm(const std::string& prefix, SLstmLayerParams& p, std::vector<ParamView>& out) {
  auto mat = [&](const char* n, Mat& m) {
    out.push_back({prefix + "." + n, m.data(), m.rows(), m.cols(), false, true});
  };
  auto vec = [&](const char* n, Vec& v) {
    out.push_back({prefix + "." + n, v.data(), v.size(), 1, true, false});
  };
  mat("w_z", p.w_z);
  mat("w_i", p.w_i);
  mat("w_f", p.w_f);
  mat("w_o", p.w_o);
  mat("r_z", p.r_z);
  mat("r_i", p.r_i);
  mat("r_f", p.r_f);
  mat("r_o", p.r_o);
  vec("b_z", p.b_z);
  vec("b_i", p.b_i);
  vec("b_f", p.b_f);
  vec("b_o", p.b_o);
}

}  // namespace

std::vector<ParamView> collect_params(ModelParams& p) {
  std::vector<ParamView> out;
  collect_residual("input_block", p.input_block, out);
  for (size_t b = 0; b < p.backbone.blocks.size(); ++b) {
    const std::string prefix = "blocks." + std::to_string(b);
    BlockParams& blk = p.backbone.blocks[b];
    out.push_back({prefix + ".norm1.gain", blk.norm1_gain.data(), blk.norm1_gain.size(), 1, true,
                   false});
    collect_slstm(prefix + ".slstm", blk.slstm, out);
    out.push_back({prefix + ".norm2.gain", blk.norm2_gain.data(), blk.norm2_gain.size(), 1, true,
                   false});
    out.push_back({prefix + ".ffn.w_in", blk.ffn_in.data(), blk.ffn_in.rows(), blk.ffn_in.cols(),
                   false, true});
    out.push_back({prefix + ".ffn.b_in", blk.ffn_b_in.data(), blk.ffn_b_in.size(), 1, true,
                   false});
    out.push_back({prefix + ".ffn.w_out", blk.ffn_out.data(), blk.ffn_out.rows(),
                   blk.ffn_out.cols(), false, true});
    out.push_back({prefix + ".ffn.b_out", blk.ffn_b_out.data(), blk.ffn_b_out.size(), 1, true,
                   false});
  }
  out.push_back({"final_norm.gain", p.backbone.final_norm_gain.data(),
                 p.backbone.final_norm_gain.size(), 1, true, false});
  collect_residual("output_block", p.output_block, out);
  return out;
}

long param_count(const ModelParams& p) {
  long n = 0;
  auto views = collect_params(const_cast<ModelParams&>(p));
  for (const auto& v : views) n += v.size();
  return n;
}

Mat residual_block_forward(const Mat& u, const ResidualBlockParams& p, Mat* pre_cache) {
  Mat pre = u * p.w_in.transpose();
  pre.rowwise() += p.b_in.transpose();
  Mat act = pre.unaryExpr([](double v) { return gelu(v); });
  Mat y = act * p.w_out.transpose() + u * p.w_skip.transpose();
  y.rowwise() += p.b_out.transpose();
  if (pre_cache != nullptr) *pre_cache = std::move(pre);
  return y;
}

Mat residual_block_backward(const Mat& dy, const Mat& u, const Mat& pre,
                            const ResidualBlockParams& p, ResidualBlockParams& grads) {
  const Mat act = pre.unaryExpr([](double v) { return gelu(v); });
  grads.w_out += dy.transpose() * act;
  grads.b_out += dy.colwise().sum().transpose();
  grads.w_skip += dy.transpose() * u;
  Mat dact = dy * p.w_out;
  Mat dpre = dact.array() * pre.unaryExpr([](double v) { return gelu_grad(v); }).array();
  grads.w_in += dpre.transpose() * u;
  grads.b_in += dpre.colwise().sum().transpose();
  return dpre * p.w_in + dy * p.w_skip;
}

Vec input_residual_block(const Vec& token, const ResidualBlockParams& p) {
  return residual_block_forward(token.transpose(), p).row(0).transpose();
}

Mat output_residual_block(const Vec& token, const ResidualBlockParams& p, int m_out, int n_q) {
  const Mat flat = residual_block_forward(token.transpose(), p);
  Mat out(m_out, n_q);
  for (int t = 0; t < m_out; ++t) {
    for (int q = 0; q < n_q; ++q) out(t, q) = flat(0, t * n_q + q);
  }
  return out;
}

double quantile_loss(const Mat& pred, const Vec& target, const std::vector<uint8_t>& observed,
                     const std::vector<double>& quantiles) {
  const int m = static_cast<int>(target.size());
  const int nq = static_cast<int>(quantiles.size());
  int n_obs = 0;
  double sum = 0.0;
  for (int t = 0; t < m; ++t) {
    if (!observed[static_cast<size_t>(t)]) continue;
    ++n_obs;
    for (int q = 0; q < nq; ++q) {
      const double yhat = pred(t, q);
      const double y = target(t);
      sum += yhat <= y ? quantiles[static_cast<size_t>(q)] * (y - yhat)
                       : (1.0 - quantiles[static_cast<size_t>(q)]) * (yhat - y);
    }
  }
  if (n_obs == 0) return 0.0;
  return sum / (static_cast<double>(nq) * n_obs);
}

double quantile_loss_grad(const Mat& pred, const Vec& target,
                          const std::vector<uint8_t>& observed,
                          const std::vector<double>& quantiles, Mat& dpred) {
  const int m = static_cast<int>(target.size());
  const int nq = static_cast<int>(quantiles.size());
  dpred = Mat::Zero(m, nq);
  int n_obs = 0;
  for (int t = 0; t < m; ++t) n_obs += observed[static_cast<size_t>(t)] ? 1 : 0;
  if (n_obs == 0) return 0.0;
  const double scale = 1.0 / (static_cast<double>(nq) * n_obs);
  double sum = 0.0;
  for (int t = 0; t < m; ++t) {
    if (!observed[static_cast<size_t>(t)]) continue;
    for (int q = 0; q < nq; ++q) {
      const double yhat = pred(t, q);
      const double y = target(t);
      const double qv = quantiles[static_cast<size_t>(q)];
      if (yhat <= y) {
        sum += qv * (y - yhat);
        dpred(t, q) = -qv * scale;
      } else {
        sum += (1.0 - qv) * (yhat - y);
        dpred(t, q) = (1.0 - qv) * scale;
      }
    }
  }
  return sum * scale;
}

ModelOutput model_forward(const PatchBatch& batch, const ModelParams& params, ModelCache* cache) {
  const auto& cfg = params.config;
  const int n = batch.n_patches();
  const int nq = cfg.n_quantiles();

  ModelCache local;
  ModelCache& c = cache != nullptr ? *cache : local;
  c.tokens = batch.tokens;
  c.embedded = residual_block_forward(batch.tokens, params.input_block, &c.in_pre);
  c.backbone_out = backbone_forward(c.embedded, params.backbone, &c.backbone);

  ModelOutput out;
  out.predictions =
      residual_block_forward(c.backbone_out, params.output_block, &c.out_pre);

  double loss_sum = 0.0;
  int eligible = 0;
  std::vector<uint8_t> obs(static_cast<size_t>(cfg.m_out));
  for (int k = 0; k < n; ++k) {
    int n_obs = 0;
    for (int t = 0; t < cfg.m_out; ++t) {
      obs[static_cast<size_t>(t)] = batch.target_observed(k, t);
      n_obs += obs[static_cast<size_t>(t)];
    }
    if (n_obs == 0) continue;
    Mat pred(cfg.m_out, nq);
    for (int t = 0; t < cfg.m_out; ++t) {
      for (int q = 0; q < nq; ++q) pred(t, q) = out.predictions(k, t * nq + q);
    }
    loss_sum += quantile_loss(pred, batch.targets.row(k).transpose(), obs, cfg.quantiles);
    ++eligible;
  }
  out.eligible_tokens = eligible;
  out.loss = eligible > 0 ? loss_sum / eligible : 0.0;
  return out;
}

void model_backward(const PatchBatch& batch, const ModelParams& params, const ModelCache& cache,
                    const ModelOutput& out, ModelParams& grads) {
  const auto& cfg = params.config;
  const int n = batch.n_patches();
  const int nq = cfg.n_quantiles();
  if (out.eligible_tokens == 0) return;

  Mat dflat = Mat::Zero(n, static_cast<long>(cfg.m_out) * nq);
  const double token_weight = 1.0 / out.eligible_tokens;
  std::vector<uint8_t> obs(static_cast<size_t>(cfg.m_out));
  for (int k = 0; k < n; ++k) {
    int n_obs = 0;
    for (int t = 0; t < cfg.m_out; ++t) {
      obs[static_cast<size_t>(t)] = batch.target_observed(k, t);
      n_obs += obs[static_cast<size_t>(t)];
    }
    if (n_obs == 0) continue;
    Mat pred(cfg.m_out, nq);
    for (int t = 0; t < cfg.m_out; ++t) {
      for (int q = 0; q < nq; ++q) pred(t, q) = out.predictions(k, t * nq + q);
    }
    Mat dpred;
    quantile_loss_grad(pred, batch.targets.row(k).transpose(), obs, cfg.quantiles, dpred);
    for (int t = 0; t < cfg.m_out; ++t) {
      for (int q = 0; q < nq; ++q) dflat(k, t * nq + q) = dpred(t, q) * token_weight;
    }
  }

  const Mat dbackbone_out = residual_block_backward(dflat, cache.backbone_out, cache.out_pre,
                                                    params.output_block, grads.output_block);
  const Mat dembedded =
      backbone_backward(dbackbone_out, cache.backbone, params.backbone, grads.backbone);
  residual_block_backward(dembedded, cache.tokens, cache.in_pre, params.input_block,
                          grads.input_block);
}

namespace {

TimeSeries truncate_context(const TimeSeries& context, const ModelConfig& cfg) {
  const int limit = cfg.max_ctx_patches * cfg.m_in;
  if (context.length() <= limit) return context;
  TimeSeries out = context;
  const int drop = context.length() - limit;
  out.values.erase(out.values.begin(), out.values.begin() + drop);
  out.observed.erase(out.observed.begin(), out.observed.begin() + drop);
  return out;
}

void sort_rows_ascending(Mat& values) {
  for (Eigen::Index t = 0; t < values.rows(); ++t) {
    std::vector<double> row(static_cast<size_t>(values.cols()));
    for (Eigen::Index q = 0; q < values.cols(); ++q) row[static_cast<size_t>(q)] = values(t, q);
    std::sort(row.begin(), row.end());
    for (Eigen::Index q = 0; q < values.cols(); ++q) values(t, q) = row[static_cast<size_t>(q)];
  }
}

}  // namespace

QuantileForecast forecast(const TimeSeries& context, int h, const ModelParams& params) {
  const auto& cfg = params.config;
  if (h < 1) throw DataError("forecast: horizon must be >= 1");
  if (context.length() < 1) throw DataError("forecast: empty context");

  const TimeSeries clipped = truncate_context(context, cfg);
  auto [normed, stats] = zscore_normalize(clipped);
  PatchBatch batch = patchify(normed, cfg.m_in, cfg.m_out, stats);

  const int k = (h + cfg.m_out - 1) / cfg.m_out;
  const int n_ctx = batch.n_patches();
  const int n_total = n_ctx + (k - 1);
  // Future tokens are missing-value placeholders: value 0, presence 0.
  Mat tokens = Mat::Zero(n_total, 2 * cfg.m_in);
  tokens.topRows(n_ctx) = batch.tokens;
  PatchBatch extended = batch;
  extended.tokens = std::move(tokens);
  extended.token_observed.conservativeResize(n_total, cfg.m_in);
  extended.token_observed.bottomRows(k - 1).setZero();
  extended.targets = Mat::Zero(n_total, cfg.m_out);
  extended.target_observed = MaskMat::Zero(n_total, cfg.m_out);

  const ModelOutput out = model_forward(extended, params);

  const int nq = cfg.n_quantiles();
  Mat future(static_cast<long>(k) * cfg.m_out, nq);
  for (int j = 0; j < k; ++j) {
    const int row = n_ctx - 1 + j;
    for (int t = 0; t < cfg.m_out; ++t) {
      for (int q = 0; q < nq; ++q) future(j * cfg.m_out + t, q) = out.predictions(row, t * nq + q);
    }
  }

  QuantileForecast fc;
  fc.quantile_levels = cfg.quantiles;
  fc.values = denormalize(Mat(future.topRows(h)), stats);
  sort_rows_ascending(fc.values);
  return fc;
}

QuantileForecast forecast_autoregressive(const TimeSeries& context, int h,
                                         const ModelParams& params) {
  const auto& cfg = params.config;
  if (h < 1) throw DataError("forecast: horizon must be >= 1");
  if (context.length() < 1) throw DataError("forecast: empty context");

  const int nq = cfg.n_quantiles();
  int median_idx = 0;
  double best = 2.0;
  for (int q = 0; q < nq; ++q) {
    const double gap = std::abs(cfg.quantiles[static_cast<size_t>(q)] - 0.5);
    if (gap < best) {
      best = gap;
      median_idx = q;
    }
  }

  const int k = (h + cfg.m_out - 1) / cfg.m_out;
  TimeSeries rolling = context;
  Mat future(static_cast<long>(k) * cfg.m_out, nq);
  for (int j = 0; j < k; ++j) {
    const TimeSeries clipped = truncate_context(rolling, cfg);
    auto [normed, stats] = zscore_normalize(clipped);
    const PatchBatch batch = patchify(normed, cfg.m_in, cfg.m_out, stats);
    const ModelOutput out = model_forward(batch, params);
    const int last = batch.n_patches() - 1;
    for (int t = 0; t < cfg.m_out; ++t) {
      for (int q = 0; q < nq; ++q) {
        future(j * cfg.m_out + t, q) =
            out.predictions(last, t * nq + q) * stats.std + stats.mean;
      }
    }
    // Feed the median patch back as observed context.
    for (int t = 0; t < cfg.m_out; ++t) {
      rolling.values.push_back(future(j * cfg.m_out + t, median_idx));
      rolling.observed.push_back(1);
    }
  }

  QuantileForecast fc;
  fc.quantile_levels = cfg.quantiles;
  fc.values = future.topRows(h);
  sort_rows_ascending(fc.values);
  return fc;
}

}  // namespace patchrex
