#include <cstring>
#include <fstream>
#include <map>
#include <sstream>

#include "patchrex/errors.hpp"
#include "patchrex/model.hpp"

namespace patchrex {

// Checkpoint layout (all integers little-endian):
//   magic "PRXW" | version u32 | config | entry count u32 | entries
// config: m_in, m_out, d, d_ff, n_heads, n_blocks, max_ctx_patches u32 each,
//         n_quantiles u32, quantile levels f64 each
// entry:  name_len u32, name bytes, ndim u32, dims u32 each, f32 data
//         row-major
namespace {

constexpr char kMagic[4] = {'P', 'R', 'X', 'W'};
constexpr uint32_t kVersion = 1;

void write_u32(std::ostream& out, uint32_t v) {
  unsigned char b[4];
  for (int i = 0; i < 4; ++i) b[i] = static_cast<unsigned char>((v >> (8 * i)) & 0xFF);
  out.write(reinterpret_cast<const char*>(b), 4);
}

uint32_t read_u32(std::istream& in) {
  unsigned char b[4];
  in.read(reinterpret_cast<char*>(b), 4);
  if (!in) throw DataError("checkpoint: truncated file");
  uint32_t v = 0;
  for (int i = 0; i < 4; ++i) v |= static_cast<uint32_t>(b[i]) << (8 * i);
  return v;
}

void write_f32(std::ostream& out, float v) {
  uint32_t bits;
  std::memcpy(&bits, &v, 4);
  write_u32(out, bits);
}

float read_f32(std::istream& in) {
  const uint32_t bits = read_u32(in);
  float v;
  std::memcpy(&v, &bits, 4);
  return v;
}

void write_f64(std::ostream& out, double v) {
  uint64_t bits;
  std::memcpy(&bits, &v, 8);
  write_u32(out, static_cast<uint32_t>(bits & 0xFFFFFFFFULL));
  write_u32(out, static_cast<uint32_t>(bits >> 32));
}

double read_f64(std::istream& in) {
  const uint64_t lo = read_u32(in);
  const uint64_t hi = read_u32(in);
  const uint64_t bits = lo | (hi << 32);
  double v;
  std::memcpy(&v, &bits, 8);
  return v;
}

}  // namespace

void save_checkpoint(const ModelParams& params, std::ostream& out) {
  out.write(kMagic, 4);
  write_u32(out, kVersion);
  const auto& cfg = params.config;
  write_u32(out, static_cast<uint32_t>(cfg.m_in));
  write_u32(out, static_cast<uint32_t>(cfg.m_out));
  write_u32(out, static_cast<uint32_t>(cfg.d));
  write_u32(out, static_cast<uint32_t>(cfg.d_ff));
  write_u32(out, static_cast<uint32_t>(cfg.n_heads));
  write_u32(out, static_cast<uint32_t>(cfg.n_blocks));
  write_u32(out, static_cast<uint32_t>(cfg.max_ctx_patches));
  write_u32(out, static_cast<uint32_t>(cfg.quantiles.size()));
  for (double q : cfg.quantiles) write_f64(out, q);

  auto views = collect_params(const_cast<ModelParams&>(params));
  write_u32(out, static_cast<uint32_t>(views.size()));
  for (const auto& v : views) {
    write_u32(out, static_cast<uint32_t>(v.name.size()));
    out.write(v.name.data(), static_cast<std::streamsize>(v.name.size()));
    if (v.is_vector) {
      write_u32(out, 1);
      write_u32(out, static_cast<uint32_t>(v.rows));
      for (long i = 0; i < v.rows; ++i) write_f32(out, static_cast<float>(v.data[i]));
    } else {
      write_u32(out, 2);
      write_u32(out, static_cast<uint32_t>(v.rows));
      write_u32(out, static_cast<uint32_t>(v.cols));
      // Eigen storage is column-major; the file is row-major.
      for (long r = 0; r < v.rows; ++r) {
        for (long c = 0; c < v.cols; ++c) {
          write_f32(out, static_cast<float>(v.data[c * v.rows + r]));
        }
      }
    }
  }
  if (!out) throw DataError("checkpoint: write failed");
}

void save_checkpoint(const ModelParams& params, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("checkpoint: cannot open for write: " + path);
  save_checkpoint(params, out);
}

ModelParams load_checkpoint(std::istream& in) {
  char magic[4];
  in.read(magic, 4);
  if (!in || std::memcmp(magic, kMagic, 4) != 0) {
    throw DataError("checkpoint: bad magic (not a PRXW file)");
  }
  const uint32_t version = read_u32(in);
  if (version != kVersion) {
    throw DataError("checkpoint: unsupported version " + std::to_string(version));
  }
  ModelConfig cfg;
  cfg.m_in = static_cast<int>(read_u32(in));
  cfg.m_out = static_cast<int>(read_u32(in));
  cfg.d = static_cast<int>(read_u32(in));
  cfg.d_ff = static_cast<int>(read_u32(in));
  cfg.n_heads = static_cast<int>(read_u32(in));
  cfg.n_blocks = static_cast<int>(read_u32(in));
  cfg.max_ctx_patches = static_cast<int>(read_u32(in));
  const uint32_t nq = read_u32(in);
  cfg.quantiles.resize(nq);
  for (uint32_t i = 0; i < nq; ++i) cfg.quantiles[i] = read_f64(in);
  cfg.validate();

  // Allocate the full parameter set, then require the file to cover it
  // exactly: unknown names, shape mismatches, and missing entries all fail.
  Rng rng(0);
  ModelParams params = init_model(cfg, rng);
  auto views = collect_params(params);
  std::map<std::string, ParamView*> by_name;
  for (auto& v : views) by_name[v.name] = &v;
  std::map<std::string, bool> seen;

  const uint32_t count = read_u32(in);
  for (uint32_t e = 0; e < count; ++e) {
    const uint32_t name_len = read_u32(in);
    std::string name(name_len, '\0');
    in.read(name.data(), name_len);
    if (!in) throw DataError("checkpoint: truncated entry name");
    auto it = by_name.find(name);
    if (it == by_name.end()) throw DataError("checkpoint: unknown parameter '" + name + "'");
    if (seen.count(name) != 0) throw DataError("checkpoint: duplicate parameter '" + name + "'");
    seen[name] = true;
    ParamView& v = *it->second;
    const uint32_t ndim = read_u32(in);
    if (v.is_vector) {
      if (ndim != 1 || static_cast<long>(read_u32(in)) != v.rows) {
        throw DataError("checkpoint: shape mismatch for '" + name + "'");
      }
      for (long i = 0; i < v.rows; ++i) v.data[i] = static_cast<double>(read_f32(in));
    } else {
      if (ndim != 2) throw DataError("checkpoint: shape mismatch for '" + name + "'");
      const long rows = static_cast<long>(read_u32(in));
      const long cols = static_cast<long>(read_u32(in));
      if (rows != v.rows || cols != v.cols) {
        throw DataError("checkpoint: shape mismatch for '" + name + "'");
      }
      for (long r = 0; r < rows; ++r) {
        for (long c = 0; c < cols; ++c) {
          v.data[c * rows + r] = static_cast<double>(read_f32(in));
        }
      }
    }
  }
  if (seen.size() != views.size()) {
    throw DataError("checkpoint: file does not cover every parameter");
  }
  return params;
}

ModelParams load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("checkpoint: cannot open: " + path);
  return load_checkpoint(in);
}

}  // namespace patchrex
