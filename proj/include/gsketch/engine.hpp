#pragma once

#include <algorithm>
#include <cstdint>
#include <limits>
#include <numeric>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "gsketch/bytes.hpp"
#include "gsketch/count_min.hpp"
#include "gsketch/error.hpp"
#include "gsketch/partitioner.hpp"
#include "gsketch/random.hpp"
#include "gsketch/stream.hpp"

namespace gsketch {

enum class Aggregate { kSum, kMin, kAverage };

inline const char* aggregate_name(Aggregate a) {
  switch (a) {
    case Aggregate::kSum: return "sum";
    case Aggregate::kMin: return "min";
    case Aggregate::kAverage: return "average";
  }
  return "?";
}

inline Aggregate parse_aggregate(std::string_view name) {
  if (name == "sum") return Aggregate::kSum;
  if (name == "min") return Aggregate::kMin;
  if (name == "average" || name == "avg") return Aggregate::kAverage;
  throw Error(ErrorCode::kConfig, "unknown aggregate '" + std::string(name) +
                                      "' (expected sum, min or average)");
}

/// Exact non-negative rational, kept in lowest terms.
struct Ratio {
  std::uint64_t num = 0;
  std::uint64_t den = 1;

  double value() const { return static_cast<double>(num) / static_cast<double>(den); }

  friend bool operator==(const Ratio& a, const Ratio& b) { return a.num == b.num && a.den == b.den; }
};

inline Ratio make_ratio(std::uint64_t num, std::uint64_t den) {
  if (den == 0) throw Error(ErrorCode::kConfig, "ratio with zero denominator");
  const std::uint64_t g = std::gcd(num, den);
  return g == 0 ? Ratio{0, 1} : Ratio{num / g, den / g};
}

inline std::string to_string(const Ratio& r) {
  return r.den == 1 ? std::to_string(r.num) : std::to_string(r.num) + "/" + std::to_string(r.den);
}

inline Ratio aggregate_values(std::span<const std::uint64_t> values, Aggregate aggregate) {
  if (values.empty()) throw Error(ErrorCode::kMalformedQuery, "aggregate over no edges");
  std::uint64_t sum = 0;
  for (std::uint64_t v : values) {
    if (sum > std::numeric_limits<std::uint64_t>::max() - v)
      throw Error(ErrorCode::kOverflow, "aggregate sum exceeds 2^64 - 1");
    sum += v;
  }
  switch (aggregate) {
    case Aggregate::kSum: return {sum, 1};
    case Aggregate::kMin: return {*std::min_element(values.begin(), values.end()), 1};
    case Aggregate::kAverage: return make_ratio(sum, values.size());
  }
  return {};
}

struct SubgraphQuery {
  std::vector<std::pair<VertexLabel, VertexLabel>> edges;
  Aggregate aggregate = Aggregate::kSum;
};

namespace detail {

template <typename EstimateEdge>
Ratio estimate_subgraph_with(const SubgraphQuery& query, EstimateEdge&& estimate_edge) {
  if (query.edges.empty()) throw Error(ErrorCode::kMalformedQuery, "subgraph query has no edges");
  std::vector<std::uint64_t> estimates;
  estimates.reserve(query.edges.size());
  for (const auto& [src, dst] : query.edges) estimates.push_back(estimate_edge(src, dst));
  return aggregate_values(estimates, query.aggregate);
}

}  // namespace detail

/// Partitioned sketches materialized from a plan. Each source vertex in the
/// plan's routing owns one leaf sketch; every other source falls through
/// to the outlier sketch.
class GSketchEngine {
 public:
  static GSketchEngine build(PartitionPlan plan, std::uint64_t seed) {
    plan.validate();
    GSketchEngine engine;
    engine.seed_ = seed;
    engine.leaves_.reserve(plan.leaves.size());
    for (const auto& leaf : plan.leaves)
      engine.leaves_.emplace_back(leaf.width, plan.depth, derive_seed(seed, leaf.id));
    engine.outlier_.emplace(plan.outlier_width, plan.depth, derive_seed(seed, "outlier"));
    engine.plan_ = std::move(plan);
    return engine;
  }

  void ingest(const StreamElement& e) {
    if (frozen_) throw Error(ErrorCode::kFrozen, "cannot ingest into a frozen engine");
    if (ingested_mass_ > std::numeric_limits<std::uint64_t>::max() - e.freq)
      throw Error(ErrorCode::kOverflow, "ingested mass exceeds 2^64 - 1");
    sketch_for_mut(e.src).update(make_edge_key(e.src, e.dst), e.freq);
    ingested_mass_ += e.freq;
  }

  void ingest(std::span<const StreamElement> stream) {
    for (const auto& e : stream) ingest(e);
  }

  /// Ends the ingest phase. Afterwards the engine is read-only and may be
  /// queried from any number of threads.
  void freeze() { frozen_ = true; }
  bool frozen() const { return frozen_; }

  bool is_routed(const VertexLabel& src) const { return plan_.route(src).has_value(); }

  /// Leaf index answering for src, or nullopt for the outlier sketch.
  std::optional<std::size_t> route(const VertexLabel& src) const { return plan_.route(src); }

  const CountMinSketch& sketch_for(const VertexLabel& src) const {
    const auto leaf = plan_.route(src);
    return leaf ? leaves_[*leaf] : *outlier_;
  }

  std::uint64_t estimate_edge(const VertexLabel& src, const VertexLabel& dst) const {
    return sketch_for(src).estimate(make_edge_key(src, dst));
  }

  Ratio estimate_subgraph(const SubgraphQuery& query) const {
    return detail::estimate_subgraph_with(
        query, [this](const VertexLabel& s, const VertexLabel& d) { return estimate_edge(s, d); });
  }

  const PartitionPlan& plan() const { return plan_; }
  std::span<const CountMinSketch> leaf_sketches() const { return leaves_; }
  const CountMinSketch& outlier() const { return *outlier_; }
  std::uint64_t ingested_mass() const { return ingested_mass_; }
  std::uint64_t seed() const { return seed_; }

  std::uint64_t memory_bytes() const {
    std::uint64_t bytes = outlier_->dims().bytes();
    for (const auto& s : leaves_) bytes += s.dims().bytes();
    return bytes;
  }

 private:
  friend class SnapshotCodec;

  GSketchEngine() = default;

  CountMinSketch& sketch_for_mut(const VertexLabel& src) {
    const auto leaf = plan_.route(src);
    return leaf ? leaves_[*leaf] : *outlier_;
  }

  PartitionPlan plan_;
  std::vector<CountMinSketch> leaves_;
  std::optional<CountMinSketch> outlier_;
  std::uint64_t ingested_mass_ = 0;
  std::uint64_t seed_ = 0;
  bool frozen_ = false;
};

/// Baseline: one CountMin sketch over the whole stream, sized to the full
/// byte budget.
class GlobalSketchEngine {
 public:
  GlobalSketchEngine(std::uint64_t budget_bytes, std::uint64_t depth, std::uint64_t seed)
      : sketch_(width_for_budget(budget_bytes, depth), depth, derive_seed(seed, "global")) {}

  explicit GlobalSketchEngine(CountMinSketch sketch) : sketch_(std::move(sketch)) {}

  void ingest(const StreamElement& e) {
    if (frozen_) throw Error(ErrorCode::kFrozen, "cannot ingest into a frozen engine");
    sketch_.update(make_edge_key(e.src, e.dst), e.freq);
  }

  void ingest(std::span<const StreamElement> stream) {
    for (const auto& e : stream) ingest(e);
  }

  void freeze() { frozen_ = true; }
  bool frozen() const { return frozen_; }

  std::uint64_t estimate_edge(const VertexLabel& src, const VertexLabel& dst) const {
    return sketch_.estimate(make_edge_key(src, dst));
  }

  Ratio estimate_subgraph(const SubgraphQuery& query) const {
    return detail::estimate_subgraph_with(
        query, [this](const VertexLabel& s, const VertexLabel& d) { return estimate_edge(s, d); });
  }

  const CountMinSketch& sketch() const { return sketch_; }
  std::uint64_t ingested_mass() const { return sketch_.total_mass(); }

 private:
  CountMinSketch sketch_;
  bool frozen_ = false;
};

struct Snapshot {
  GSketchEngine engine;
  std::optional<GlobalSketchEngine> global;
};

/// Snapshot container: magic "GSKSNAP1", entry count, a table of contents of
/// (name, offset, length) relative to the payload start, then the payloads.
/// Entries: "plan" (plan JSON), "meta", "leaf/<id>", "outlier", and
/// optionally "global".
class SnapshotCodec {
 public:
  static constexpr std::string_view kMagic = "GSKSNAP1";

  static std::string encode(const GSketchEngine& engine,
                            const GlobalSketchEngine* global = nullptr) {
    std::vector<std::pair<std::string, std::string>> entries;
    entries.emplace_back("plan", engine.plan_.dump());
    std::string meta;
    bytes::put_u64(meta, engine.seed_);
    bytes::put_u64(meta, engine.ingested_mass_);
    bytes::put_u32(meta, engine.frozen_ ? 1 : 0);
    entries.emplace_back("meta", std::move(meta));
    for (std::size_t i = 0; i < engine.leaves_.size(); ++i)
      entries.emplace_back("leaf/" + std::to_string(i), engine.leaves_[i].serialize());
    entries.emplace_back("outlier", engine.outlier_->serialize());
    if (global != nullptr) entries.emplace_back("global", global->sketch().serialize());

    std::string out(kMagic);
    bytes::put_u32(out, static_cast<std::uint32_t>(entries.size()));
    std::uint64_t offset = 0;
    for (const auto& [name, payload] : entries) {
      bytes::put_blob(out, name);
      bytes::put_u64(out, offset);
      bytes::put_u64(out, payload.size());
      offset += payload.size();
    }
    for (const auto& [name, payload] : entries) out += payload;
    return out;
  }

  static Snapshot decode(std::string_view data) {
    bytes::Reader in(data);
    if (in.raw(kMagic.size()) != kMagic)
      throw Error(ErrorCode::kParse, "not a gsketch snapshot (bad magic)");
    const std::uint32_t count = in.u32();
    struct Entry {
      std::string name;
      std::uint64_t offset, length;
    };
    std::vector<Entry> toc;
    for (std::uint32_t i = 0; i < count; ++i) {
      Entry e;
      e.name = std::string(in.blob());
      e.offset = in.u64();
      e.length = in.u64();
      toc.push_back(std::move(e));
    }
    const std::string_view payload = data.substr(in.position());
    auto find = [&](std::string_view name) -> std::optional<std::string_view> {
      for (const auto& e : toc) {
        if (e.name != name) continue;
        if (e.offset > payload.size() || e.length > payload.size() - e.offset)
          throw Error(ErrorCode::kParse, "snapshot entry " + e.name + " out of bounds");
        return payload.substr(e.offset, e.length);
      }
      return std::nullopt;
    };
    auto require = [&](std::string_view name) {
      auto blob = find(name);
      if (!blob) throw Error(ErrorCode::kParse, "snapshot lacks entry " + std::string(name));
      return *blob;
    };

    GSketchEngine engine;
    engine.plan_ = PartitionPlan::parse(require("plan"));
    bytes::Reader meta(require("meta"));
    engine.seed_ = meta.u64();
    engine.ingested_mass_ = meta.u64();
    engine.frozen_ = meta.u32() != 0;
    for (std::size_t i = 0; i < engine.plan_.leaves.size(); ++i) {
      engine.leaves_.push_back(CountMinSketch::deserialize(require("leaf/" + std::to_string(i))));
      if (engine.leaves_.back().width() != engine.plan_.leaves[i].width)
        throw Error(ErrorCode::kParse, "leaf sketch width disagrees with the plan");
    }
    engine.outlier_ = CountMinSketch::deserialize(require("outlier"));
    std::optional<GlobalSketchEngine> global;
    if (auto blob = find("global")) global.emplace(CountMinSketch::deserialize(*blob));
    return Snapshot{std::move(engine), std::move(global)};
  }
};

}  // namespace gsketch
