#pragma once

#include <algorithm>
#include <charconv>
#include <cstdint>
#include <functional>
#include <istream>
#include <map>
#include <optional>
#include <ostream>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "gsketch/error.hpp"
#include "gsketch/random.hpp"

namespace gsketch {

/// Byte separating the two labels inside an EdgeKey.
inline constexpr char kKeySeparator = '\x1f';

/// Non-empty vertex label. Ordering is bytewise (std::string compares
/// through char_traits, which orders as unsigned char).
class VertexLabel {
 public:
  VertexLabel() = default;
  explicit VertexLabel(std::string label) : label_(std::move(label)) {
    if (label_.empty()) throw Error(ErrorCode::kMalformedLabel, "vertex label is empty");
  }
  explicit VertexLabel(const char* label) : VertexLabel(std::string(label)) {}

  const std::string& str() const noexcept { return label_; }

  friend bool operator==(const VertexLabel&, const VertexLabel&) = default;
  friend auto operator<=>(const VertexLabel&, const VertexLabel&) = default;

 private:
  std::string label_;
};

inline std::ostream& operator<<(std::ostream& os, const VertexLabel& v) { return os << v.str(); }

struct StreamElement {
  VertexLabel src;
  VertexLabel dst;
  std::uint64_t freq = 1;
  std::uint64_t ts = 0;

  friend bool operator==(const StreamElement&, const StreamElement&) = default;
};

enum class Direction { kDirected, kUndirected };

/// Byte key of a directed edge: src, 0x1F, dst.
class EdgeKey {
 public:
  const std::string& bytes() const noexcept { return bytes_; }

  std::pair<VertexLabel, VertexLabel> decode() const {
    const auto sep = bytes_.find(kKeySeparator);
    return {VertexLabel(bytes_.substr(0, sep)), VertexLabel(bytes_.substr(sep + 1))};
  }

  friend bool operator==(const EdgeKey&, const EdgeKey&) = default;
  friend auto operator<=>(const EdgeKey&, const EdgeKey&) = default;

 private:
  friend EdgeKey make_edge_key(const VertexLabel&, const VertexLabel&, Direction);
  explicit EdgeKey(std::string bytes) : bytes_(std::move(bytes)) {}

  std::string bytes_;
};

inline EdgeKey make_edge_key(const VertexLabel& src, const VertexLabel& dst,
                             Direction direction = Direction::kDirected) {
  for (const auto* label : {&src, &dst}) {
    if (label->str().empty())
      throw Error(ErrorCode::kMalformedLabel, "vertex label is empty");
    if (label->str().find(kKeySeparator) != std::string::npos)
      throw Error(ErrorCode::kMalformedLabel, "label contains the 0x1F separator byte");
  }
  const bool swap = direction == Direction::kUndirected && dst < src;
  const auto& first = swap ? dst : src;
  const auto& second = swap ? src : dst;
  std::string bytes;
  bytes.reserve(first.str().size() + 1 + second.str().size());
  bytes.append(first.str());
  bytes.push_back(kKeySeparator);
  bytes.append(second.str());
  return EdgeKey(std::move(bytes));
}

inline EdgeKey make_edge_key(const StreamElement& e) { return make_edge_key(e.src, e.dst); }

struct DataSample {
  std::vector<StreamElement> elements;
  std::size_t capacity = 0;
};

/// Streaming reservoir (Algorithm R). Each offered element ends up in the
/// reservoir with probability capacity / offered.
class Reservoir {
 public:
  Reservoir(std::size_t capacity, std::uint64_t seed) : capacity_(capacity), rng_(seed) {
    if (capacity == 0) throw Error(ErrorCode::kConfig, "reservoir capacity must be positive");
  }

  void offer(const StreamElement& e) {
    ++seen_;
    if (items_.size() < capacity_) {
      items_.push_back(e);
      return;
    }
    const std::uint64_t j = rng_.below(seen_);
    if (j < capacity_) items_[j] = e;
  }

  std::uint64_t seen() const { return seen_; }

  DataSample take() && { return DataSample{std::move(items_), capacity_}; }

 private:
  std::size_t capacity_;
  Rng rng_;
  std::uint64_t seen_ = 0;
  std::vector<StreamElement> items_;
};

inline DataSample reservoir_sample(std::span<const StreamElement> stream, std::size_t k,
                                   std::uint64_t seed) {
  Reservoir reservoir(k, seed);
  for (const auto& e : stream) reservoir.offer(e);
  return std::move(reservoir).take();
}

struct VertexStat {
  std::uint64_t fv = 0;   // sum of sampled frequencies on out-edges
  std::uint64_t deg = 0;  // distinct sampled out-edges

  friend bool operator==(const VertexStat&, const VertexStat&) = default;
};

/// Per-source-vertex sample statistics, ordered by label.
using VertexStats = std::map<VertexLabel, VertexStat>;

inline VertexStats compute_vertex_stats(const DataSample& sample) {
  VertexStats stats;
  std::set<std::pair<VertexLabel, VertexLabel>> seen;
  for (const auto& e : sample.elements) {
    auto& s = stats[e.src];
    s.fv += e.freq;
    if (seen.emplace(e.src, e.dst).second) ++s.deg;
  }
  return stats;
}

/// Relative query weight per vertex as numerator / shared denominator, so
/// orderings on weights can be decided in exact integer arithmetic.
class WorkloadWeights {
 public:
  WorkloadWeights() = default;
  WorkloadWeights(std::map<VertexLabel, std::uint64_t> numerators, std::uint64_t denominator)
      : numerators_(std::move(numerators)), denominator_(denominator) {
    if (denominator_ == 0) throw Error(ErrorCode::kConfig, "weight denominator must be positive");
    for (const auto& [v, n] : numerators_)
      if (n == 0) throw Error(ErrorCode::kConfig, "weight of " + v.str() + " must be positive");
  }

  bool contains(const VertexLabel& v) const { return numerators_.count(v) != 0; }

  std::uint64_t numerator(const VertexLabel& v) const {
    auto it = numerators_.find(v);
    if (it == numerators_.end())
      throw Error(ErrorCode::kConfig, "no workload weight for vertex " + v.str());
    return it->second;
  }

  std::uint64_t denominator() const { return denominator_; }

  double weight(const VertexLabel& v) const {
    return static_cast<double>(numerator(v)) / static_cast<double>(denominator_);
  }

  const std::map<VertexLabel, std::uint64_t>& numerators() const { return numerators_; }
  std::size_t size() const { return numerators_.size(); }

 private:
  std::map<VertexLabel, std::uint64_t> numerators_;
  std::uint64_t denominator_ = 1;
};

/// Add-one smoothed share of workload queries leaving each known vertex:
/// w(n) = (c(n) + 1) / (T + V). Queries from unknown sources are ignored.
inline WorkloadWeights compute_workload_weights(const DataSample& workload,
                                                const std::set<VertexLabel>& known_vertices) {
  if (known_vertices.empty())
    throw Error(ErrorCode::kConfig, "workload weights need at least one known vertex");
  std::map<VertexLabel, std::uint64_t> counts;
  for (const auto& v : known_vertices) counts.emplace(v, 1);
  std::uint64_t total = 0;
  for (const auto& q : workload.elements) {
    auto it = counts.find(q.src);
    if (it == counts.end()) continue;
    ++it->second;
    ++total;
  }
  return WorkloadWeights(std::move(counts), total + known_vertices.size());
}

inline std::set<VertexLabel> source_vertices(const VertexStats& stats) {
  std::set<VertexLabel> out;
  for (const auto& [v, _] : stats) out.insert(out.end(), v);
  return out;
}

// ---------------------------------------------------------------------------
// Stream text format: src<TAB>dst[<TAB>freq[<TAB>ts]] per line.

namespace detail {

inline std::uint64_t parse_u64(std::string_view field, std::size_t line_no, const char* what) {
  std::uint64_t value = 0;
  const auto* end = field.data() + field.size();
  auto [ptr, ec] = std::from_chars(field.data(), end, value);
  if (ec != std::errc() || ptr != end || field.empty())
    throw Error(ErrorCode::kParse, "line " + std::to_string(line_no) + ": bad " + what +
                                       " field '" + std::string(field) + "'");
  return value;
}

inline std::vector<std::string_view> split_tabs(std::string_view line) {
  std::vector<std::string_view> fields;
  std::size_t start = 0;
  while (true) {
    const auto tab = line.find('\t', start);
    fields.push_back(line.substr(start, tab == std::string_view::npos ? tab : tab - start));
    if (tab == std::string_view::npos) break;
    start = tab + 1;
  }
  return fields;
}

inline VertexLabel parse_label(std::string_view field, std::size_t line_no) {
  if (field.empty())
    throw Error(ErrorCode::kParse, "line " + std::to_string(line_no) + ": empty vertex label");
  if (field.find(kKeySeparator) != std::string_view::npos)
    throw Error(ErrorCode::kParse,
                "line " + std::to_string(line_no) + ": label contains the 0x1F separator byte");
  return VertexLabel(std::string(field));
}

}  // namespace detail

inline StreamElement parse_stream_line(std::string_view line, std::size_t line_no) {
  if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
  const auto fields = detail::split_tabs(line);
  if (fields.size() < 2 || fields.size() > 4)
    throw Error(ErrorCode::kParse, "line " + std::to_string(line_no) +
                                       ": expected 2 to 4 tab-separated fields, got " +
                                       std::to_string(fields.size()));
  StreamElement e{detail::parse_label(fields[0], line_no), detail::parse_label(fields[1], line_no),
                  1, line_no};
  if (fields.size() >= 3) {
    e.freq = detail::parse_u64(fields[2], line_no, "freq");
    if (e.freq == 0)
      throw Error(ErrorCode::kParse, "line " + std::to_string(line_no) + ": freq must be >= 1");
  }
  if (fields.size() == 4) e.ts = detail::parse_u64(fields[3], line_no, "ts");
  return e;
}

/// Calls sink(element) for every non-blank line. Line numbers are 1-based.
template <typename Sink>
void for_each_stream_element(std::istream& in, Sink&& sink) {
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line == "\r") continue;
    sink(parse_stream_line(line, line_no));
  }
}

inline std::vector<StreamElement> read_stream(std::istream& in) {
  std::vector<StreamElement> out;
  for_each_stream_element(in, [&](StreamElement e) { out.push_back(std::move(e)); });
  return out;
}

inline void write_stream(std::ostream& out, std::span<const StreamElement> stream) {
  for (const auto& e : stream)
    out << e.src.str() << '\t' << e.dst.str() << '\t' << e.freq << '\t' << e.ts << '\n';
}

}  // namespace gsketch

template <>
struct std::hash<gsketch::VertexLabel> {
  std::size_t operator()(const gsketch::VertexLabel& v) const noexcept {
    return std::hash<std::string>{}(v.str());
  }
};

template <>
struct std::hash<gsketch::EdgeKey> {
  std::size_t operator()(const gsketch::EdgeKey& k) const noexcept {
    return std::hash<std::string>{}(k.bytes());
  }
};
