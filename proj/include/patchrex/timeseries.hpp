#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <string>
#include <utility>
#include <vector>

namespace patchrex {

using Mat = Eigen::MatrixXd;
using Vec = Eigen::VectorXd;
// Presence/observation masks as bytes; 1 = observed/present.
using MaskMat = Eigen::Matrix<uint8_t, Eigen::Dynamic, Eigen::Dynamic>;

// Univariate series with an observation mask. Unobserved positions always
// carry the placeholder value 0.0 and are never read by consumers.
struct TimeSeries {
  std::string id;
  std::vector<double> values;
  std::vector<uint8_t> observed;  // same length as values
  int season_period = 0;          // 0 = unknown
  std::string freq;               // optional, round-trips the dataset files

  int length() const { return static_cast<int>(values.size()); }
  int observed_count() const;
  static TimeSeries from_values(std::string id, std::vector<double> v);
};

struct NormStats {
  double mean = 0.0;
  double std = 1.0;  // floored at kStdFloor
};

inline constexpr double kStdFloor = 1e-6;

// z-score over observed positions only (population std, floored).
// Throws DataError when the series has no observed value.
std::pair<TimeSeries, NormStats> zscore_normalize(const TimeSeries& series);

std::vector<double> denormalize(const std::vector<double>& values, NormStats stats);
Mat denormalize(const Mat& values, NormStats stats);

// Non-overlapping patch view of a (normalized) series.
//
// tokens row k = [values of window k | presence of window k], so each row has
// 2*m_in entries. targets row k holds the values of window k+1; the final
// row's target window is appended unobserved padding. The series is
// left-padded with unobserved placeholders up to a multiple of m_in so the
// most recent data lands in the last token.
struct PatchBatch {
  Mat tokens;           // [n_patches x 2*m_in]
  MaskMat token_observed;   // [n_patches x m_in]
  Mat targets;          // [n_patches x m_out]
  MaskMat target_observed;  // [n_patches x m_out]
  NormStats stats;
  int m_in = 0;
  int m_out = 0;
  int left_pad = 0;

  int n_patches() const { return static_cast<int>(tokens.rows()); }
};

// `input_mask` (optional, length T, 1 = masked) removes positions from the
// token side only; targets keep the true values and observation flags.
PatchBatch patchify(const TimeSeries& series, int m_in, int m_out,
                    NormStats stats = NormStats{},
                    const std::vector<uint8_t>* input_mask = nullptr);

// JSON-lines dataset IO. One object per line:
//   {"id": str, "values": [number|null, ...], "freq"?: str, "season_period"?: int}
// null encodes an unobserved position.
std::string to_jsonl_line(const TimeSeries& series);
TimeSeries from_jsonl_line(const std::string& line, int line_no = 0);
std::vector<TimeSeries> read_jsonl(const std::string& path);
void write_jsonl(const std::vector<TimeSeries>& corpus, const std::string& path);

}  // namespace patchrex
