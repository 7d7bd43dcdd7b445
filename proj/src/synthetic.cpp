#include "patchrex/synthetic.hpp"

#include <Eigen/Cholesky>
#include <cmath>

#include "patchrex/errors.hpp"
#include "patchrex/log.hpp"

namespace patchrex {

double kernel_value(const GpKernelLeaf& leaf, double t1, double t2) {
  const double r = std::abs(t1 - t2);
  switch (leaf.kind) {
    case GpKernelKind::kPeriodic: {
      const double s = std::sin(M_PI * r / leaf.periodicity);
      return std::exp(-2.0 * s * s / (leaf.length_scale * leaf.length_scale));
    }
    case GpKernelKind::kRbf:
      return std::exp(-r * r / (2.0 * leaf.length_scale * leaf.length_scale));
    case GpKernelKind::kRationalQuadratic:
      return std::pow(
          1.0 + r * r / (2.0 * leaf.alpha * leaf.length_scale * leaf.length_scale), -leaf.alpha);
    case GpKernelKind::kPiecewisePolynomial: {
      // Compactly supported (q=1): (1-u)_+^3 (3u + 1) with u = r/length_scale.
      const double u = r / leaf.length_scale;
      if (u >= 1.0) return 0.0;
      const double b = 1.0 - u;
      return b * b * b * (3.0 * u + 1.0);
    }
  }
  return 0.0;
}

double expr_value(const GpKernelExpr& expr, double t1, double t2) {
  double v = kernel_value(expr.leaves.at(0), t1, t2);
  for (size_t i = 0; i < expr.ops.size(); ++i) {
    const double leaf = kernel_value(expr.leaves.at(i + 1), t1, t2);
    v = expr.ops[i] == '+' ? v + leaf : v * leaf;
  }
  return v;
}

namespace {

double log_uniform(Rng& rng, double lo, double hi) {
  return std::exp(rng.uniform(std::log(lo), std::log(hi)));
}

GpKernelLeaf sample_leaf(Rng& rng, int series_len) {
  static const double kSeasonalSet[] = {24.0, 7.0, 12.0, 52.0, 168.0};
  const double L = series_len;
  GpKernelLeaf leaf;
  leaf.kind = static_cast<GpKernelKind>(rng.uniform_int(0, 3));
  switch (leaf.kind) {
    case GpKernelKind::kPeriodic:
      if (rng.bernoulli(0.5)) {
        leaf.periodicity = kSeasonalSet[rng.uniform_int(0, 4)];
      } else {
        leaf.periodicity = log_uniform(rng, 4.0, std::max(8.0, L / 2.0));
      }
      leaf.length_scale = log_uniform(rng, 0.5, 4.0);
      break;
    case GpKernelKind::kRbf:
    case GpKernelKind::kPiecewisePolynomial:
      leaf.length_scale = log_uniform(rng, 1.0, std::max(2.0, L / 4.0));
      break;
    case GpKernelKind::kRationalQuadratic:
      leaf.length_scale = log_uniform(rng, 1.0, std::max(2.0, L / 4.0));
      leaf.alpha = log_uniform(rng, 0.1, 10.0);
      break;
  }
  return leaf;
}

}  // namespace

GpKernelExpr sample_kernel_expr(Rng& rng, int J, int series_len) {
  if (J < 1) throw ConfigError("kernel expr: J must be >= 1");
  GpKernelExpr expr;
  const int j = static_cast<int>(rng.uniform_int(1, J));
  expr.leaves.reserve(static_cast<size_t>(j));
  for (int i = 0; i < j; ++i) expr.leaves.push_back(sample_leaf(rng, series_len));
  for (int i = 0; i + 1 < j; ++i) expr.ops.push_back(rng.bernoulli(0.5) ? '+' : '*');
  return expr;
}

Mat gram_matrix(const GpKernelExpr& expr, int L) {
  Mat gram(L, L);
  for (int i = 0; i < L; ++i) {
    for (int j = i; j < L; ++j) {
      const double v = expr_value(expr, i, j);
      gram(i, j) = v;
      gram(j, i) = v;
    }
  }
  return gram;
}

std::optional<TimeSeries> gp_sample(const GpKernelExpr& expr, int L, Rng& rng) {
  if (L < 2) throw DataError("gp_sample: L must be >= 2");
  const Mat gram = gram_matrix(expr, L);
  Eigen::LLT<Mat> llt;
  bool ok = false;
  for (double jitter : {1e-6, 1e-4}) {
    Mat k = gram;
    k.diagonal().array() += jitter;
    llt.compute(k);
    if (llt.info() == Eigen::Success) {
      ok = true;
      break;
    }
  }
  if (!ok) return std::nullopt;

  Vec gauss(L);
  for (int i = 0; i < L; ++i) gauss(i) = rng.normal();
  const Vec draw = llt.matrixL() * gauss;

  TimeSeries out;
  out.values.assign(draw.data(), draw.data() + L);
  out.observed.assign(static_cast<size_t>(L), 1);
  return out;
}

TimeSeries tsmixup(const std::vector<TimeSeries>& base, const MixupSpec& spec, Rng& rng) {
  if (base.empty()) throw DataError("tsmixup: empty base corpus");
  const int k = static_cast<int>(rng.uniform_int(1, spec.k_max));
  std::vector<const TimeSeries*> chosen(static_cast<size_t>(k));
  int shortest = spec.l_max;
  for (auto& c : chosen) {
    c = &base[static_cast<size_t>(rng.uniform_int(0, static_cast<int64_t>(base.size()) - 1))];
    shortest = std::min(shortest, (*c).length());
  }
  int l = static_cast<int>(rng.uniform_int(spec.l_min, spec.l_max));
  l = std::min(l, shortest);
  if (l < 2) throw DataError("tsmixup: no series long enough");

  const std::vector<double> lambda = rng.dirichlet(spec.alpha, k);
  std::vector<double> mixed(static_cast<size_t>(l), 0.0);
  for (int i = 0; i < k; ++i) {
    const TimeSeries& src = *chosen[static_cast<size_t>(i)];
    const auto start = static_cast<int>(rng.uniform_int(0, src.length() - l));
    TimeSeries segment;
    segment.id = src.id;
    segment.values.assign(src.values.begin() + start, src.values.begin() + start + l);
    segment.observed.assign(src.observed.begin() + start, src.observed.begin() + start + l);
    if (segment.observed_count() == 0) continue;  // contributes nothing
    auto [normed, stats] = zscore_normalize(segment);
    (void)stats;
    for (int t = 0; t < l; ++t) {
      if (normed.observed[static_cast<size_t>(t)]) {
        mixed[static_cast<size_t>(t)] += lambda[static_cast<size_t>(i)] * normed.values[static_cast<size_t>(t)];
      }
    }
  }
  TimeSeries out;
  out.values = std::move(mixed);
  out.observed.assign(static_cast<size_t>(l), 1);
  return out;
}

namespace {

GpKernelExpr locally_periodic_expr(Rng& rng, int series_len) {
  // periodic x rbf: a periodic pattern under a slowly drifting envelope.
  GpKernelExpr expr;
  GpKernelLeaf periodic;
  periodic.kind = GpKernelKind::kPeriodic;
  periodic.periodicity = rng.uniform(16.0, 48.0);
  periodic.length_scale = rng.uniform(0.75, 1.5);
  GpKernelLeaf envelope;
  envelope.kind = GpKernelKind::kRbf;
  envelope.length_scale = rng.uniform(series_len / 4.0, series_len);
  expr.leaves = {periodic, envelope};
  expr.ops = {'*'};
  return expr;
}

int extract_season(const GpKernelExpr& expr) {
  for (const auto& leaf : expr.leaves) {
    if (leaf.kind == GpKernelKind::kPeriodic) {
      return std::max(1, static_cast<int>(std::lround(leaf.periodicity)));
    }
  }
  return 0;
}

}  // namespace

std::vector<TimeSeries> generate_corpus(const CorpusSpec& spec, uint64_t seed) {
  if (spec.family != "random" && spec.family != "locally_periodic") {
    throw ConfigError("corpus: unknown family '" + spec.family + "'");
  }
  std::vector<TimeSeries> corpus;
  corpus.reserve(static_cast<size_t>(spec.count) + static_cast<size_t>(spec.tsmixup_count));
  for (int i = 0; i < spec.count; ++i) {
    Rng rng(Rng::derive(seed, 0x6770, static_cast<uint64_t>(i)));
    TimeSeries series;
    for (int attempt = 0;; ++attempt) {
      const GpKernelExpr expr = spec.family == "locally_periodic"
                                    ? locally_periodic_expr(rng, spec.length)
                                    : sample_kernel_expr(rng, spec.j_max, spec.length);
      auto drawn = gp_sample(expr, spec.length, rng);
      if (drawn.has_value()) {
        series = std::move(*drawn);
        series.season_period = extract_season(expr);
        break;
      }
      if (attempt >= 16) throw NumericError("corpus: persistent Cholesky failure");
      log_debug("corpus: resampling kernel expression after Cholesky failure");
    }
    if (spec.noise_std > 0.0) {
      for (auto& v : series.values) v += rng.normal(0.0, spec.noise_std);
    }
    char id[32];
    std::snprintf(id, sizeof(id), "gp-%06d", i);
    series.id = id;
    corpus.push_back(std::move(series));
  }
  std::vector<TimeSeries> mixes;
  mixes.reserve(static_cast<size_t>(spec.tsmixup_count));
  for (int i = 0; i < spec.tsmixup_count; ++i) {
    Rng rng(Rng::derive(seed, 0x6D69, static_cast<uint64_t>(i)));
    MixupSpec mix = spec.mixup;
    mix.l_max = std::min(mix.l_max, spec.length);
    mix.l_min = std::min(mix.l_min, mix.l_max);
    TimeSeries series = tsmixup(corpus, mix, rng);
    char id[32];
    std::snprintf(id, sizeof(id), "mix-%06d", i);
    series.id = id;
    mixes.push_back(std::move(series));
  }
  corpus.insert(corpus.end(), std::make_move_iterator(mixes.begin()),
                std::make_move_iterator(mixes.end()));
  return corpus;
}

}  // namespace patchrex
