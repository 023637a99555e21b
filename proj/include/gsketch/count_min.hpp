#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numbers>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "gsketch/bytes.hpp"
#include "gsketch/error.hpp"
#include "gsketch/random.hpp"
#include "gsketch/stream.hpp"

namespace gsketch {

struct SketchDims {
  std::uint64_t width = 1;
  std::uint64_t depth = 1;

  std::uint64_t cells() const { return width * depth; }
  std::uint64_t bytes() const { return cells() * sizeof(std::uint64_t); }

  friend bool operator==(const SketchDims&, const SketchDims&) = default;
};

/// w = ceil(e / epsilon), d = ceil(ln(1 / delta)).
inline SketchDims dims_for_error(double epsilon, double delta) {
  if (!(epsilon > 0.0 && epsilon < 1.0))
    throw Error(ErrorCode::kConfig, "epsilon must lie in (0, 1)");
  if (!(delta > 0.0 && delta < 1.0)) throw Error(ErrorCode::kConfig, "delta must lie in (0, 1)");
  const auto width = static_cast<std::uint64_t>(std::ceil(std::numbers::e / epsilon));
  const auto depth = static_cast<std::uint64_t>(std::ceil(std::log(1.0 / delta)));
  return {width, std::max<std::uint64_t>(depth, 1)};
}

/// Width of a depth-d sketch of 64-bit counters fitting in `budget_bytes`.
inline std::uint64_t width_for_budget(std::uint64_t budget_bytes, std::uint64_t depth) {
  if (depth == 0) throw Error(ErrorCode::kConfig, "depth must be positive");
  const std::uint64_t width = budget_bytes / (sizeof(std::uint64_t) * depth);
  if (width == 0)
    throw Error(ErrorCode::kConfig, "budget of " + std::to_string(budget_bytes) +
                                        " bytes is too small for depth " + std::to_string(depth));
  return width;
}

/// Seedless 64-bit byte hash used to fingerprint edge keys before row
/// hashing. Distinct keys may share a fingerprint with probability ~2^-64.
inline std::uint64_t fingerprint64(std::string_view data) {
  constexpr std::uint64_t kMul = 0x9fb21c651e98df25ULL;
  std::uint64_t h = 0x243f6a8885a308d3ULL ^ (data.size() * kMul);
  std::size_t i = 0;
  for (; i + 8 <= data.size(); i += 8) {
    std::uint64_t chunk = 0;
    for (int b = 0; b < 8; ++b)
      chunk |= static_cast<std::uint64_t>(static_cast<unsigned char>(data[i + b])) << (8 * b);
    h = (h ^ splitmix64(chunk)) * kMul;
    h ^= h >> 29;
  }
  std::uint64_t tail = 0;
  for (int b = 0; i < data.size(); ++i, ++b)
    tail |= static_cast<std::uint64_t>(static_cast<unsigned char>(data[i])) << (8 * b);
  h = (h ^ splitmix64(tail ^ 0x5851f42d4c957f2dULL)) * kMul;
  return splitmix64(h);
}

/// ((a * x + b) mod p) mod width with p = 2^61 - 1.
class RowHash {
 public:
  static constexpr std::uint64_t kPrime = (std::uint64_t{1} << 61) - 1;

  RowHash() = default;
  RowHash(std::uint64_t a, std::uint64_t b) : a_(a), b_(b) {}

  static RowHash draw(Rng& rng) {
    const std::uint64_t a = 1 + rng.below(kPrime - 1);
    const std::uint64_t b = rng.below(kPrime);
    return {a, b};
  }

  std::uint64_t operator()(std::uint64_t fingerprint, std::uint64_t width) const {
    const std::uint64_t x = mod_prime(fingerprint);
    const unsigned __int128 prod = static_cast<unsigned __int128>(a_) * x + b_;
    return mod_prime128(prod) % width;
  }

  std::uint64_t a() const { return a_; }
  std::uint64_t b() const { return b_; }

 private:
  static std::uint64_t mod_prime(std::uint64_t x) {
    x = (x & kPrime) + (x >> 61);
    return x >= kPrime ? x - kPrime : x;
  }

  static std::uint64_t mod_prime128(unsigned __int128 x) {
    const std::uint64_t lo = static_cast<std::uint64_t>(x & kPrime);
    const std::uint64_t hi = static_cast<std::uint64_t>(x >> 61);
    return mod_prime(lo + mod_prime(hi));
  }

  std::uint64_t a_ = 1;
  std::uint64_t b_ = 0;
};

/// CountMin sketch over EdgeKeys: depth rows of width 64-bit counters.
/// Estimates never fall below the true inserted frequency.
///
/// Updates must be serialized by the caller; const members are safe to call
/// concurrently once updates have stopped.
class CountMinSketch {
 public:
  static constexpr char kMagic[4] = {'G', 'S', 'C', 'M'};
  static constexpr std::uint32_t kVersion = 1;

  CountMinSketch(std::uint64_t width, std::uint64_t depth, std::uint64_t seed)
      : dims_{width, depth}, seed_(seed) {
    if (width == 0 || depth == 0)
      throw Error(ErrorCode::kConfig, "sketch width and depth must be positive");
    Rng rng(seed);
    rows_.reserve(depth);
    for (std::uint64_t i = 0; i < depth; ++i) rows_.push_back(RowHash::draw(rng));
    counters_.assign(width * depth, 0);
  }

  CountMinSketch(SketchDims dims, std::uint64_t seed)
      : CountMinSketch(dims.width, dims.depth, seed) {}

  static CountMinSketch from_error_bounds(double epsilon, double delta, std::uint64_t seed) {
    return CountMinSketch(dims_for_error(epsilon, delta), seed);
  }

  const SketchDims& dims() const { return dims_; }
  std::uint64_t width() const { return dims_.width; }
  std::uint64_t depth() const { return dims_.depth; }
  std::uint64_t seed() const { return seed_; }
  std::uint64_t total_mass() const { return total_mass_; }
  std::span<const std::uint64_t> counters() const { return counters_; }
  std::span<const RowHash> row_hashes() const { return rows_; }

  std::uint64_t cell(std::uint64_t row, std::uint64_t col) const {
    return counters_[row * dims_.width + col];
  }

  std::uint64_t column(std::uint64_t row, std::string_view key) const {
    return rows_[row](fingerprint64(key), dims_.width);
  }

  void update(std::string_view key, std::uint64_t delta = 1) {
    if (delta == 0) throw Error(ErrorCode::kConfig, "update delta must be positive");
    if (total_mass_ > std::numeric_limits<std::uint64_t>::max() - delta)
      throw Error(ErrorCode::kOverflow, "total mass would exceed 2^64 - 1");
    const std::uint64_t fp = fingerprint64(key);
    // Every counter is bounded by total_mass, so the check above covers them.
    for (std::uint64_t r = 0; r < dims_.depth; ++r)
      counters_[r * dims_.width + rows_[r](fp, dims_.width)] += delta;
    total_mass_ += delta;
  }

  void update(const EdgeKey& key, std::uint64_t delta = 1) { update(key.bytes(), delta); }

  std::uint64_t estimate(std::string_view key) const {
    const std::uint64_t fp = fingerprint64(key);
    std::uint64_t best = std::numeric_limits<std::uint64_t>::max();
    for (std::uint64_t r = 0; r < dims_.depth; ++r)
      best = std::min(best, counters_[r * dims_.width + rows_[r](fp, dims_.width)]);
    return best;
  }

  std::uint64_t estimate(const EdgeKey& key) const { return estimate(key.bytes()); }

  /// Magic, version, width, depth, seed, per-row (a, b), row-major counters,
  /// total mass. All integers little-endian.
  std::string serialize() const {
    std::string out;
    out.reserve(48 + rows_.size() * 16 + counters_.size() * 8);
    out.append(kMagic, sizeof(kMagic));
    bytes::put_u32(out, kVersion);
    bytes::put_u64(out, dims_.width);
    bytes::put_u64(out, dims_.depth);
    bytes::put_u64(out, seed_);
    for (const auto& row : rows_) {
      bytes::put_u64(out, row.a());
      bytes::put_u64(out, row.b());
    }
    for (std::uint64_t c : counters_) bytes::put_u64(out, c);
    bytes::put_u64(out, total_mass_);
    return out;
  }

  static CountMinSketch deserialize(std::string_view data) {
    bytes::Reader in(data);
    if (in.raw(4) != std::string_view(kMagic, 4))
      throw Error(ErrorCode::kParse, "not a CountMin snapshot (bad magic)");
    if (const auto v = in.u32(); v != kVersion)
      throw Error(ErrorCode::kParse, "unsupported CountMin snapshot version " + std::to_string(v));
    const std::uint64_t width = in.u64();
    const std::uint64_t depth = in.u64();
    const std::uint64_t seed = in.u64();
    if (width == 0 || depth == 0 || depth > data.size() / 16 || width > data.size() / 8 / depth)
      throw Error(ErrorCode::kParse, "corrupt CountMin snapshot dimensions");
    CountMinSketch sketch(width, depth, seed);
    for (auto& row : sketch.rows_) {
      const std::uint64_t a = in.u64();
      const std::uint64_t b = in.u64();
      row = RowHash(a, b);
    }
    for (auto& c : sketch.counters_) c = in.u64();
    sketch.total_mass_ = in.u64();
    if (!in.done()) throw Error(ErrorCode::kParse, "trailing bytes after CountMin snapshot");
    return sketch;
  }

  friend bool operator==(const CountMinSketch& x, const CountMinSketch& y) {
    return x.dims_ == y.dims_ && x.seed_ == y.seed_ && x.total_mass_ == y.total_mass_ &&
           x.counters_ == y.counters_ &&
           std::equal(x.rows_.begin(), x.rows_.end(), y.rows_.begin(), y.rows_.end(),
                      [](const RowHash& p, const RowHash& q) {
                        return p.a() == q.a() && p.b() == q.b();
                      });
  }

 private:
  SketchDims dims_;
  std::uint64_t seed_;
  std::vector<RowHash> rows_;
  std::vector<std::uint64_t> counters_;
  std::uint64_t total_mass_ = 0;
};

}  // namespace gsketch
