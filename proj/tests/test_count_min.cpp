#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <unordered_map>

#include "gsketch/count_min.hpp"

using namespace gsketch;

namespace {

std::string key(std::uint64_t i) { return "k" + std::to_string(i) + "\x1f" "t"; }

template <typename F>
ErrorCode code_of(F&& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.code();
  }
  ADD_FAILURE() << "expected an Error";
  return ErrorCode::kConfig;
}

// Upper 0.999 quantile of chi-squared with k degrees of freedom
// (Wilson-Hilferty approximation).
double chi2_999(double k) {
  const double z = 3.090232;
  const double t = 1.0 - 2.0 / (9.0 * k) + z * std::sqrt(2.0 / (9.0 * k));
  return k * t * t * t;
}

}  // namespace

TEST(SketchDims, FromErrorBounds) {
  EXPECT_EQ(dims_for_error(0.01, 0.01), (SketchDims{272, 5}));
  EXPECT_EQ(dims_for_error(0.9, 0.5), (SketchDims{4, 1}));
  EXPECT_EQ(code_of([] { dims_for_error(1.0, 0.1); }), ErrorCode::kConfig);
  EXPECT_EQ(code_of([] { dims_for_error(0.1, 0.0); }), ErrorCode::kConfig);
  EXPECT_EQ(CountMinSketch::from_error_bounds(0.01, 0.01, 1).dims(), (SketchDims{272, 5}));
}

TEST(SketchDims, FromByteBudget) {
  EXPECT_EQ(width_for_budget(65536, 5), 1638u);
  EXPECT_EQ(width_for_budget(40, 5), 1u);
  EXPECT_EQ(code_of([] { width_for_budget(39, 5); }), ErrorCode::kConfig);
  EXPECT_EQ((SketchDims{1638, 5}).bytes(), 65520u);
}

TEST(CountMin, ConstructionIsZeroed) {
  CountMinSketch s(8, 3, 1);
  EXPECT_EQ(s.counters().size(), 24u);
  for (auto c : s.counters()) EXPECT_EQ(c, 0u);
  EXPECT_EQ(s.total_mass(), 0u);
  EXPECT_EQ(CountMinSketch(1, 1, 1).counters().size(), 1u);
  EXPECT_EQ(code_of([] { CountMinSketch(0, 3, 1); }), ErrorCode::kConfig);
  EXPECT_EQ(code_of([] { CountMinSketch(3, 0, 1); }), ErrorCode::kConfig);
}

TEST(CountMin, UpdatesAreAdditive) {
  CountMinSketch s(64, 4, 9);
  EXPECT_EQ(s.estimate("x"), 0u);
  s.update("x");
  EXPECT_EQ(s.estimate("x"), 1u);
  CountMinSketch t(64, 4, 9);
  t.update("x", 2);
  t.update("x", 3);
  EXPECT_EQ(t.estimate("x"), 5u);
  EXPECT_EQ(t.total_mass(), 5u);
}

TEST(CountMin, SingleCellSharesEverything) {
  CountMinSketch s(1, 1, 4);
  s.update("a", 3);
  s.update("b", 4);
  EXPECT_EQ(s.estimate("a"), 7u);
  EXPECT_EQ(s.estimate("never"), 7u);
}

TEST(CountMin, RejectsZeroDeltaAndOverflow) {
  CountMinSketch s(4, 2, 1);
  EXPECT_EQ(code_of([&] { s.update("a", 0); }), ErrorCode::kConfig);
  s.update("a", std::numeric_limits<std::uint64_t>::max() - 1);
  s.update("b", 1);
  EXPECT_EQ(code_of([&] { s.update("c", 1); }), ErrorCode::kOverflow);
  EXPECT_EQ(s.total_mass(), std::numeric_limits<std::uint64_t>::max());
}

TEST(CountMin, NeverUnderestimates) {
  Rng rng(5);
  CountMinSketch s(50, 3, 77);
  std::unordered_map<std::string, std::uint64_t> truth;
  std::uint64_t mass = 0;
  for (int i = 0; i < 10000; ++i) {
    const auto k = key(rng.below(700));
    const auto f = 1 + rng.below(5);
    s.update(k, f);
    truth[k] += f;
    mass += f;
  }
  EXPECT_EQ(s.total_mass(), mass);
  for (const auto& [k, f] : truth) EXPECT_GE(s.estimate(k), f);
  for (auto c : s.counters()) EXPECT_LE(c, mass);
}

TEST(CountMin, UpperBoundViolationRate) {
  for (std::uint64_t d : {3u, 4u}) {
    constexpr std::uint64_t w = 64, n = 20000;
    Rng rng(d);
    CountMinSketch s(w, d, 1000 + d);
    std::unordered_map<std::string, std::uint64_t> truth;
    for (std::uint64_t i = 0; i < n; ++i) {
      const auto k = key(rng.below(5000));
      s.update(k);
      ++truth[k];
    }
    const double slack = std::numbers::e * static_cast<double>(n) / static_cast<double>(w);
    std::size_t bad = 0;
    for (const auto& [k, f] : truth)
      if (static_cast<double>(s.estimate(k)) > static_cast<double>(f) + slack) ++bad;
    const double rate = static_cast<double>(bad) / static_cast<double>(truth.size());
    EXPECT_LE(rate, std::exp(-static_cast<double>(d)) + 0.01) << "d=" << d;
  }
}

TEST(RowHash, ColumnsAreUniform) {
  constexpr std::uint64_t w = 97, n = 97 * 400;
  CountMinSketch s(w, 6, 31337);
  for (std::uint64_t row = 0; row < s.depth(); ++row) {
    std::vector<double> counts(w, 0.0);
    for (std::uint64_t i = 0; i < n; ++i) counts[s.column(row, key(i))] += 1.0;
    const double expected = static_cast<double>(n) / w;
    double chi2 = 0;
    for (double c : counts) chi2 += (c - expected) * (c - expected) / expected;
    EXPECT_LT(chi2, chi2_999(w - 1)) << "row " << row;
  }
}

TEST(RowHash, RowsDifferAndSeedsMatter) {
  CountMinSketch a(1 << 20, 2, 1), b(1 << 20, 2, 2);
  int same_rows = 0, same_seeds = 0;
  for (int i = 0; i < 100; ++i) {
    same_rows += a.column(0, key(i)) == a.column(1, key(i));
    same_seeds += a.column(0, key(i)) == b.column(0, key(i));
  }
  EXPECT_LT(same_rows, 3);
  EXPECT_LT(same_seeds, 3);
}

TEST(Fingerprint, FrozenValues) {
  // Byte-stable across platforms: snapshots and plans depend on it.
  EXPECT_EQ(fingerprint64(""), fingerprint64(std::string_view()));
  EXPECT_NE(fingerprint64("a\x1f" "b"), fingerprint64("b\x1f" "a"));
  EXPECT_NE(fingerprint64(std::string(8, 'a')), fingerprint64(std::string(9, 'a')));
  EXPECT_NE(fingerprint64(std::string("\0", 1)), fingerprint64(""));
  EXPECT_EQ(fingerprint64("a\x1f" "b"), 0xe62f358d724b6838ULL);
  EXPECT_EQ(fingerprint64("v1234\x1f" "v99"), 0x6e21adaf929074a1ULL);
}

TEST(CountMin, SerializationRoundTrips) {
  CountMinSketch s(37, 4, 123);
  for (int i = 0; i < 500; ++i) s.update(key(i % 61), 1 + i % 3);
  const auto bytes = s.serialize();
  EXPECT_EQ(bytes.substr(0, 4), "GSCM");
  EXPECT_EQ(bytes.size(), 4 + 4 + 24 + 4 * 16 + 37 * 4 * 8 + 8u);
  const auto back = CountMinSketch::deserialize(bytes);
  EXPECT_EQ(back, s);
  for (int i = 0; i < 80; ++i) EXPECT_EQ(back.estimate(key(i)), s.estimate(key(i)));
  EXPECT_EQ(back.serialize(), bytes);
}

TEST(CountMin, CorruptSnapshotsAreRejected) {
  CountMinSketch s(5, 2, 1);
  s.update("a", 2);
  const auto bytes = s.serialize();
  EXPECT_EQ(code_of([&] { CountMinSketch::deserialize(bytes.substr(0, bytes.size() - 1)); }),
            ErrorCode::kParse);
  EXPECT_EQ(code_of([&] { CountMinSketch::deserialize(bytes + "x"); }), ErrorCode::kParse);
  auto bad_magic = bytes;
  bad_magic[0] = 'X';
  EXPECT_EQ(code_of([&] { CountMinSketch::deserialize(bad_magic); }), ErrorCode::kParse);
  auto huge = bytes;
  huge[8 + 7] = '\x7f';  // width's top byte
  EXPECT_EQ(code_of([&] { CountMinSketch::deserialize(huge); }), ErrorCode::kParse);
}
