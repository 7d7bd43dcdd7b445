#include "patchrex/timeseries.hpp"

#include <cmath>
#include <fstream>
#include <nlohmann/json.hpp>

#include "patchrex/errors.hpp"

namespace patchrex {

using nlohmann::json;

int TimeSeries::observed_count() const {
  int n = 0;
  for (uint8_t o : observed) n += o ? 1 : 0;
  return n;
}

TimeSeries TimeSeries::from_values(std::string id, std::vector<double> v) {
  TimeSeries s;
  s.id = std::move(id);
  s.observed.assign(v.size(), 1);
  s.values = std::move(v);
  return s;
}

std::pair<TimeSeries, NormStats> zscore_normalize(const TimeSeries& series) {
  double sum = 0.0;
  int n = 0;
  for (int t = 0; t < series.length(); ++t) {
    if (series.observed[t]) {
      sum += series.values[t];
      ++n;
    }
  }
  if (n == 0) throw DataError("zscore_normalize: no observed values in series '" + series.id + "'");
  const double mean = sum / n;
  double sq = 0.0;
  for (int t = 0; t < series.length(); ++t) {
    if (series.observed[t]) {
      const double d = series.values[t] - mean;
      sq += d * d;
    }
  }
  const double std_pop = std::sqrt(sq / n);  // population (1/N) estimator
  NormStats stats{mean, std::max(std_pop, kStdFloor)};

  TimeSeries out = series;
  for (int t = 0; t < series.length(); ++t) {
    out.values[t] = series.observed[t] ? (series.values[t] - stats.mean) / stats.std : 0.0;
  }
  return {std::move(out), stats};
}

std::vector<double> denormalize(const std::vector<double>& values, NormStats stats) {
  std::vector<double> out(values.size());
  for (size_t i = 0; i < values.size(); ++i) out[i] = values[i] * stats.std + stats.mean;
  return out;
}

Mat denormalize(const Mat& values, NormStats stats) {
  return (values.array() * stats.std + stats.mean).matrix();
}

PatchBatch patchify(const TimeSeries& series, int m_in, int m_out, NormStats stats,
                    const std::vector<uint8_t>* input_mask) {
  if (m_in <= 0 || m_out <= 0) throw DataError("patchify: patch size must be positive");
  if (m_in != m_out) throw DataError("patchify: m_in must equal m_out");
  const int T = series.length();
  if (T < 1) throw DataError("patchify: empty series");
  if (input_mask != nullptr && static_cast<int>(input_mask->size()) != T) {
    throw DataError("patchify: input mask length mismatch");
  }

  const int pad = (m_in - T % m_in) % m_in;
  const int n = (T + pad) / m_in;

  PatchBatch batch;
  batch.stats = stats;
  batch.m_in = m_in;
  batch.m_out = m_out;
  batch.left_pad = pad;
  batch.tokens = Mat::Zero(n, 2 * m_in);
  batch.token_observed = MaskMat::Zero(n, m_in);
  batch.targets = Mat::Zero(n, m_out);
  batch.target_observed = MaskMat::Zero(n, m_out);

  auto at = [&](int padded_idx, bool for_target) -> std::pair<double, bool> {
    const int t = padded_idx - pad;
    if (t < 0 || t >= T) return {0.0, false};
    bool present = series.observed[t] != 0;
    if (!for_target && input_mask != nullptr && (*input_mask)[t]) present = false;
    return {present ? series.values[t] : 0.0, present};
  };

  for (int k = 0; k < n; ++k) {
    for (int j = 0; j < m_in; ++j) {
      const auto [v, p] = at(k * m_in + j, /*for_target=*/false);
      batch.tokens(k, j) = v;
      batch.tokens(k, m_in + j) = p ? 1.0 : 0.0;
      batch.token_observed(k, j) = p ? 1 : 0;
      const auto [tv, tp] = at((k + 1) * m_in + j, /*for_target=*/true);
      batch.targets(k, j) = tv;
      batch.target_observed(k, j) = tp ? 1 : 0;
    }
  }
  return batch;
}

std::string to_jsonl_line(const TimeSeries& series) {
  json j;
  j["id"] = series.id;
  json vals = json::array();
  for (int t = 0; t < series.length(); ++t) {
    if (series.observed[t]) {
      vals.push_back(series.values[t]);
    } else {
      vals.push_back(nullptr);
    }
  }
  j["values"] = std::move(vals);
  if (!series.freq.empty()) j["freq"] = series.freq;
  if (series.season_period > 0) j["season_period"] = series.season_period;
  return j.dump();
}

TimeSeries from_jsonl_line(const std::string& line, int line_no) {
  json j;
  try {
    j = json::parse(line);
  } catch (const json::exception& e) {
    throw DataError("dataset line " + std::to_string(line_no) + ": " + e.what());
  }
  if (!j.is_object() || !j.contains("id") || !j.contains("values")) {
    throw DataError("dataset line " + std::to_string(line_no) + ": expected {id, values}");
  }
  TimeSeries s;
  s.id = j.at("id").get<std::string>();
  const auto& vals = j.at("values");
  if (!vals.is_array()) throw DataError("dataset line " + std::to_string(line_no) + ": values must be an array");
  s.values.reserve(vals.size());
  s.observed.reserve(vals.size());
  for (const auto& v : vals) {
    if (v.is_null()) {
      s.values.push_back(0.0);
      s.observed.push_back(0);
    } else if (v.is_number()) {
      s.values.push_back(v.get<double>());
      s.observed.push_back(1);
    } else {
      throw DataError("dataset line " + std::to_string(line_no) + ": values must be numbers or null");
    }
  }
  if (j.contains("freq")) s.freq = j.at("freq").get<std::string>();
  if (j.contains("season_period")) {
    s.season_period = j.at("season_period").get<int>();
    if (s.season_period <= 0) {
      throw DataError("dataset line " + std::to_string(line_no) + ": season_period must be positive");
    }
  }
  return s;
}

std::vector<TimeSeries> read_jsonl(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open dataset file: " + path);
  std::vector<TimeSeries> corpus;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    corpus.push_back(from_jsonl_line(line, line_no));
  }
  return corpus;
}

void write_jsonl(const std::vector<TimeSeries>& corpus, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write dataset file: " + path);
  for (const auto& s : corpus) out << to_jsonl_line(s) << "\n";
}

}  // namespace patchrex
