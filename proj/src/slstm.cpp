#include "patchrex/slstm.hpp"

#include <cmath>

#include "patchrex/errors.hpp"

namespace patchrex {

thread_local uint64_t backbone_forward_calls = 0;

SLstmState SLstmState::zero(int d) {
  SLstmState s;
  s.c = Vec::Zero(d);
  s.n = Vec::Zero(d);
  s.h = Vec::Zero(d);
  s.m = Vec::Zero(d);
  return s;
}

void apply_head_mask(Mat& r, int n_heads) {
  const int d = static_cast<int>(r.rows());
  const int head = d / n_heads;
  for (int i = 0; i < d; ++i) {
    for (int j = 0; j < d; ++j) {
      if (i / head != j / head) r(i, j) = 0.0;
    }
  }
}

namespace {

Mat fanin_uniform(int rows, int cols, Rng& rng) {
  const double a = std::sqrt(3.0 / cols);
  Mat w(rows, cols);
  for (int j = 0; j < cols; ++j) {
    for (int i = 0; i < rows; ++i) w(i, j) = rng.uniform(-a, a);
  }
  return w;
}

Mat recurrent_init(int d, int n_heads, Rng& rng) {
  const double std = 1.0 / std::sqrt(static_cast<double>(d) / n_heads);
  Mat r(d, d);
  for (int j = 0; j < d; ++j) {
    for (int i = 0; i < d; ++i) r(i, j) = rng.normal(0.0, std);
  }
  apply_head_mask(r, n_heads);
  return r;
}

double sigmoid(double v) { return 1.0 / (1.0 + std::exp(-v)); }

}  // namespace

SLstmLayerParams init_slstm_layer(int d_in, int d, int n_heads, Rng& rng) {
  if (d % n_heads != 0) throw ConfigError("slstm: d must be divisible by n_heads");
  SLstmLayerParams p;
  p.n_heads = n_heads;
  p.w_z = fanin_uniform(d, d_in, rng);
  p.w_i = fanin_uniform(d, d_in, rng);
  p.w_f = fanin_uniform(d, d_in, rng);
  p.w_o = fanin_uniform(d, d_in, rng);
  p.r_z = recurrent_init(d, n_heads, rng);
  p.r_i = recurrent_init(d, n_heads, rng);
  p.r_f = recurrent_init(d, n_heads, rng);
  p.r_o = recurrent_init(d, n_heads, rng);
  p.b_z = Vec::Zero(d);
  p.b_i = Vec::Zero(d);
  p.b_f = Vec::Constant(d, 2.0);  // favor memory retention early in training
  p.b_o = Vec::Zero(d);
  return p;
}

BlockParams init_block(int d, int d_ff, int n_heads, Rng& rng) {
  BlockParams p;
  p.slstm = init_slstm_layer(d, d, n_heads, rng);
  p.norm1_gain = Vec::Ones(d);
  p.norm2_gain = Vec::Ones(d);
  p.ffn_in = fanin_uniform(d_ff, d, rng);
  p.ffn_b_in = Vec::Zero(d_ff);
  p.ffn_out = fanin_uniform(d, d_ff, rng);
  p.ffn_b_out = Vec::Zero(d);
  return p;
}

BackboneParams init_backbone(int d, int d_ff, int n_heads, int n_blocks, Rng& rng) {
  BackboneParams p;
  p.blocks.reserve(static_cast<size_t>(n_blocks));
  for (int b = 0; b < n_blocks; ++b) p.blocks.push_back(init_block(d, d_ff, n_heads, rng));
  p.final_norm_gain = Vec::Ones(d);
  return p;
}

SLstmLayerParams zeros_like(const SLstmLayerParams& p) {
  SLstmLayerParams g;
  g.n_heads = p.n_heads;
  g.w_z = Mat::Zero(p.w_z.rows(), p.w_z.cols());
  g.w_i = Mat::Zero(p.w_i.rows(), p.w_i.cols());
  g.w_f = Mat::Zero(p.w_f.rows(), p.w_f.cols());
  g.w_o = Mat::Zero(p.w_o.rows(), p.w_o.cols());
  g.r_z = Mat::Zero(p.r_z.rows(), p.r_z.cols());
  g.r_i = Mat::Zero(p.r_i.rows(), p.r_i.cols());
  g.r_f = Mat::Zero(p.r_f.rows(), p.r_f.cols());
  g.r_o = Mat::Zero(p.r_o.rows(), p.r_o.cols());
  g.b_z = Vec::Zero(p.b_z.size());
  g.b_i = Vec::Zero(p.b_i.size());
  g.b_f = Vec::Zero(p.b_f.size());
  g.b_o = Vec::Zero(p.b_o.size());
  return g;
}

BlockParams zeros_like(const BlockParams& p) {
  BlockParams g;
  g.slstm = zeros_like(p.slstm);
  g.norm1_gain = Vec::Zero(p.norm1_gain.size());
  g.norm2_gain = Vec::Zero(p.norm2_gain.size());
  g.ffn_in = Mat::Zero(p.ffn_in.rows(), p.ffn_in.cols());
  g.ffn_b_in = Vec::Zero(p.ffn_b_in.size());
  g.ffn_out = Mat::Zero(p.ffn_out.rows(), p.ffn_out.cols());
  g.ffn_b_out = Vec::Zero(p.ffn_b_out.size());
  return g;
}

BackboneParams zeros_like(const BackboneParams& p) {
  BackboneParams g;
  g.blocks.reserve(p.blocks.size());
  for (const auto& b : p.blocks) g.blocks.push_back(zeros_like(b));
  g.final_norm_gain = Vec::Zero(p.final_norm_gain.size());
  return g;
}

double gelu(double u) { return 0.5 * u * (1.0 + std::erf(u * M_SQRT1_2)); }

double gelu_grad(double u) {
  const double cdf = 0.5 * (1.0 + std::erf(u * M_SQRT1_2));
  const double pdf = std::exp(-0.5 * u * u) / std::sqrt(2.0 * M_PI);
  return cdf + u * pdf;
}

Mat rmsnorm(const Mat& x, const Vec& gain, RmsNormCache* cache) {
  const auto rows = x.rows();
  const auto d = x.cols();
  Vec inv(rows);
  Mat y(rows, d);
  for (Eigen::Index i = 0; i < rows; ++i) {
    const double ms = x.row(i).squaredNorm() / static_cast<double>(d);
    inv(i) = 1.0 / std::sqrt(ms + kRmsNormEps);
    y.row(i) = (x.row(i).array() * gain.transpose().array()) * inv(i);
  }
  if (cache != nullptr) {
    cache->x = x;
    cache->inv_rms = inv;
  }
  return y;
}

Mat rmsnorm_backward(const Mat& dy, const RmsNormCache& cache, const Vec& gain, Vec& dgain) {
  const auto rows = dy.rows();
  const auto d = dy.cols();
  Mat dx(rows, d);
  for (Eigen::Index i = 0; i < rows; ++i) {
    const double inv = cache.inv_rms(i);
    const auto xi = cache.x.row(i).array();
    const auto dyi = dy.row(i).array();
    dgain.array() += (dyi * xi * inv).transpose();
    const double dot = (dyi * gain.transpose().array() * xi).sum();
    dx.row(i) = (dyi * gain.transpose().array() * inv) -
                xi * (dot * inv * inv * inv / static_cast<double>(d));
  }
  return dx;
}

namespace {

// Shared stabilized step; writes row t of the cache matrices when given.
void step_core(const Vec& wx_z, const Vec& wx_i, const Vec& wx_f, const Vec& wx_o,
               const SLstmLayerParams& p, const SLstmState& prev, SLstmState& out,
               SLstmLayerCache* cache, int t) {
  const Vec ztil = wx_z + p.r_z * prev.h + p.b_z;
  const Vec itil = wx_i + p.r_i * prev.h + p.b_i;
  const Vec ftil = wx_f + p.r_f * prev.h + p.b_f;
  const Vec otil = wx_o + p.r_o * prev.h + p.b_o;

  const int d = p.dim();
  out.c.resize(d);
  out.n.resize(d);
  out.h.resize(d);
  out.m.resize(d);
  Vec z(d), o(d), ip(d), fp(d), hb(d);
  for (int k = 0; k < d; ++k) {
    z(k) = std::tanh(ztil(k));
    o(k) = sigmoid(otil(k));
    const double m_new = std::max(ftil(k) + prev.m(k), itil(k));
    ip(k) = std::exp(itil(k) - m_new);
    fp(k) = std::exp(ftil(k) + prev.m(k) - m_new);
    out.c(k) = fp(k) * prev.c(k) + ip(k) * z(k);
    out.n(k) = fp(k) * prev.n(k) + ip(k);
    hb(k) = out.c(k) / out.n(k);
    out.h(k) = o(k) * hb(k);
    out.m(k) = m_new;
  }
  if (cache != nullptr) {
    cache->z.row(t) = z;
    cache->o.row(t) = o;
    cache->iprime.row(t) = ip;
    cache->fprime.row(t) = fp;
    cache->c.row(t) = out.c;
    cache->n.row(t) = out.n;
    cache->hbefore.row(t) = hb;
    cache->h.row(t) = out.h;
    cache->m.row(t) = out.m;
  }
}

}  // namespace

std::pair<Vec, SLstmState> slstm_step(const Vec& x, const SLstmState& state,
                                      const SLstmLayerParams& p) {
  if (x.size() != p.input_dim() || state.h.size() != p.dim()) {
    throw NumericError("slstm_step: dimension mismatch");
  }
  SLstmState next;
  step_core(p.w_z * x, p.w_i * x, p.w_f * x, p.w_o * x, p, state, next, nullptr, 0);
  return {next.h, next};
}

Mat slstm_layer_forward(const Mat& x, const SLstmLayerParams& p, const SLstmState& init,
                        SLstmLayerCache* cache) {
  const int T = static_cast<int>(x.rows());
  const int d = p.dim();
  if (cache != nullptr) {
    cache->x = x;
    cache->z.resize(T, d);
    cache->o.resize(T, d);
    cache->iprime.resize(T, d);
    cache->fprime.resize(T, d);
    cache->c.resize(T, d);
    cache->n.resize(T, d);
    cache->hbefore.resize(T, d);
    cache->h.resize(T, d);
    cache->m.resize(T, d);
    cache->init = init;
  }
  // Input projections for the whole sequence at once.
  const Mat wx_z = x * p.w_z.transpose();
  const Mat wx_i = x * p.w_i.transpose();
  const Mat wx_f = x * p.w_f.transpose();
  const Mat wx_o = x * p.w_o.transpose();

  Mat out(T, d);
  SLstmState state = init;
  SLstmState next;
  for (int t = 0; t < T; ++t) {
    step_core(wx_z.row(t).transpose(), wx_i.row(t).transpose(), wx_f.row(t).transpose(),
              wx_o.row(t).transpose(), p, state, next, cache, t);
    out.row(t) = next.h;
    state = next;
  }
  return out;
}

Mat slstm_layer_backward(const Mat& dh_in, const SLstmLayerCache& cache,
                         const SLstmLayerParams& p, SLstmLayerParams& grads) {
  const int T = static_cast<int>(cache.x.rows());
  const int d = p.dim();
  Mat dx(T, p.input_dim());
  Mat dgate_z(T, d), dgate_i(T, d), dgate_f(T, d), dgate_o(T, d);

  Vec dh = Vec::Zero(d);       // running grad wrt h_t (recurrent + external)
  Vec dc = Vec::Zero(d);       // carried grad wrt c_t
  Vec dn = Vec::Zero(d);       // carried grad wrt n_t
  for (int t = T - 1; t >= 0; --t) {
    dh += dh_in.row(t).transpose();
    const Vec c_prev = t > 0 ? Vec(cache.c.row(t - 1)) : cache.init.c;
    const Vec n_prev = t > 0 ? Vec(cache.n.row(t - 1)) : cache.init.n;
    const Vec h_prev = t > 0 ? Vec(cache.h.row(t - 1)) : cache.init.h;

    Vec dztil(d), ditil(d), dftil(d), dotil(d);
    Vec dc_prev(d), dn_prev(d);
    for (int k = 0; k < d; ++k) {
      const double o = cache.o(t, k);
      const double hb = cache.hbefore(t, k);
      const double n = cache.n(t, k);
      const double c = cache.c(t, k);
      const double ip = cache.iprime(t, k);
      const double fp = cache.fprime(t, k);
      const double z = cache.z(t, k);

      const double d_o = dh(k) * hb;
      const double d_hb = dh(k) * o;
      const double d_c = dc(k) + d_hb / n;
      const double d_n = dn(k) - d_hb * c / (n * n);
      const double d_fp = d_c * c_prev(k) + d_n * n_prev(k);
      const double d_ip = d_c * z + d_n;
      dztil(k) = d_c * ip * (1.0 - z * z);
      // d exp(g - m)/dg = exp(g - m); the stabilizer m is constant in backprop.
      ditil(k) = d_ip * ip;
      dftil(k) = d_fp * fp;
      dotil(k) = d_o * o * (1.0 - o);
      dc_prev(k) = d_c * fp;
      dn_prev(k) = d_n * fp;
    }
    dgate_z.row(t) = dztil;
    dgate_i.row(t) = ditil;
    dgate_f.row(t) = dftil;
    dgate_o.row(t) = dotil;

    grads.b_z += dztil;
    grads.b_i += ditil;
    grads.b_f += dftil;
    grads.b_o += dotil;
    grads.r_z += dztil * h_prev.transpose();
    grads.r_i += ditil * h_prev.transpose();
    grads.r_f += dftil * h_prev.transpose();
    grads.r_o += dotil * h_prev.transpose();

    dh = p.r_z.transpose() * dztil + p.r_i.transpose() * ditil + p.r_f.transpose() * dftil +
         p.r_o.transpose() * dotil;
    dc = dc_prev;
    dn = dn_prev;
  }
  grads.w_z += dgate_z.transpose() * cache.x;
  grads.w_i += dgate_i.transpose() * cache.x;
  grads.w_f += dgate_f.transpose() * cache.x;
  grads.w_o += dgate_o.transpose() * cache.x;
  dx = dgate_z * p.w_z + dgate_i * p.w_i + dgate_f * p.w_f + dgate_o * p.w_o;

  apply_head_mask(grads.r_z, p.n_heads);
  apply_head_mask(grads.r_i, p.n_heads);
  apply_head_mask(grads.r_f, p.n_heads);
  apply_head_mask(grads.r_o, p.n_heads);
  return dx;
}

Mat block_forward(const Mat& x, const BlockParams& p, BlockCache* cache) {
  RmsNormCache norm1_local;
  RmsNormCache* norm1 = cache != nullptr ? &cache->norm1 : &norm1_local;
  const Mat normed1 = rmsnorm(x, p.norm1_gain, norm1);
  const Mat mixed = slstm_layer_forward(normed1, p.slstm, SLstmState::zero(p.slstm.dim()),
                                        cache != nullptr ? &cache->slstm : nullptr);
  const Mat y1 = x + mixed;

  RmsNormCache norm2_local;
  RmsNormCache* norm2 = cache != nullptr ? &cache->norm2 : &norm2_local;
  const Mat normed2 = rmsnorm(y1, p.norm2_gain, norm2);
  Mat pre = normed2 * p.ffn_in.transpose();
  pre.rowwise() += p.ffn_b_in.transpose();
  Mat act = pre.unaryExpr([](double u) { return gelu(u); });
  Mat y = y1 + act * p.ffn_out.transpose();
  y.rowwise() += p.ffn_b_out.transpose();

  if (cache != nullptr) {
    cache->y1 = y1;
    cache->norm2_out = normed2;
    cache->ffn_pre = pre;
  }
  return y;
}

Mat block_backward(const Mat& dy, const BlockCache& cache, const BlockParams& p,
                   BlockParams& grads) {
  // FFN path.
  const Mat act = cache.ffn_pre.unaryExpr([](double u) { return gelu(u); });
  grads.ffn_out += dy.transpose() * act;
  grads.ffn_b_out += dy.colwise().sum().transpose();
  Mat dact = dy * p.ffn_out;
  Mat dpre = dact.array() * cache.ffn_pre.unaryExpr([](double u) { return gelu_grad(u); }).array();
  grads.ffn_in += dpre.transpose() * cache.norm2_out;
  grads.ffn_b_in += dpre.colwise().sum().transpose();
  const Mat dnormed2 = dpre * p.ffn_in;
  Mat dy1 = dy + rmsnorm_backward(dnormed2, cache.norm2, p.norm2_gain, grads.norm2_gain);

  // sLSTM path.
  const Mat dnormed1 = slstm_layer_backward(dy1, cache.slstm, p.slstm, grads.slstm);
  Mat dx = dy1 + rmsnorm_backward(dnormed1, cache.norm1, p.norm1_gain, grads.norm1_gain);
  return dx;
}

Mat backbone_forward(const Mat& x, const BackboneParams& p, BackboneCache* cache) {
  if (p.blocks.empty()) throw ConfigError("backbone: needs at least one block");
  ++backbone_forward_calls;
  if (cache != nullptr) cache->blocks.resize(p.blocks.size());
  Mat h = x;
  for (size_t b = 0; b < p.blocks.size(); ++b) {
    h = block_forward(h, p.blocks[b], cache != nullptr ? &cache->blocks[b] : nullptr);
  }
  RmsNormCache local;
  return rmsnorm(h, p.final_norm_gain, cache != nullptr ? &cache->final_norm : &local);
}

Mat backbone_backward(const Mat& dy, const BackboneCache& cache, const BackboneParams& p,
                      BackboneParams& grads) {
  Mat dh = rmsnorm_backward(dy, cache.final_norm, p.final_norm_gain, grads.final_norm_gain);
  for (int b = static_cast<int>(p.blocks.size()) - 1; b >= 0; --b) {
    dh = block_backward(dh, cache.blocks[static_cast<size_t>(b)], p.blocks[static_cast<size_t>(b)],
                        grads.blocks[static_cast<size_t>(b)]);
  }
  return dh;
}

}  // namespace patchrex
