#pragma once

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <deque>
#include <iomanip>
#include <limits>
#include <optional>
#include <ostream>
#include <span>
#include <sstream>
#include <string>
#include <type_traits>
#include <unordered_map>
#include <unordered_set>
#include <utility>
#include <vector>

#include "gsketch/count_min.hpp"
#include "gsketch/engine.hpp"
#include "gsketch/error.hpp"
#include "gsketch/partitioner.hpp"
#include "gsketch/random.hpp"
#include "gsketch/stream.hpp"

namespace gsketch {

using Edge = std::pair<VertexLabel, VertexLabel>;

/// Exact per-edge frequencies of an ingested stream. Desk scale only: memory
/// grows with the number of distinct edges.
class ExactOracle {
 public:
  struct EdgeRecord {
    VertexLabel src;
    VertexLabel dst;
    std::uint64_t freq = 0;
  };

  ExactOracle() = default;
  explicit ExactOracle(std::span<const StreamElement> stream) { add(stream); }

  void add(const StreamElement& e) {
    auto key = make_edge_key(e.src, e.dst);
    auto [it, inserted] = index_.try_emplace(std::move(key), records_.size());
    if (inserted) {
      auto [out, new_source] = out_edges_.try_emplace(e.src);
      if (new_source) sources_.push_back(e.src);
      out->second.push_back(records_.size());
      records_.push_back({e.src, e.dst, 0});
    }
    records_[it->second].freq += e.freq;
    total_mass_ += e.freq;
  }

  void add(std::span<const StreamElement> stream) {
    for (const auto& e : stream) add(e);
  }

  std::uint64_t truth(const VertexLabel& src, const VertexLabel& dst) const {
    auto it = index_.find(make_edge_key(src, dst));
    return it == index_.end() ? 0 : records_[it->second].freq;
  }

  /// Distinct edges in order of first arrival.
  std::span<const EdgeRecord> edges() const { return records_; }

  std::vector<Edge> distinct_edges() const {
    std::vector<Edge> out;
    out.reserve(records_.size());
    for (const auto& r : records_) out.emplace_back(r.src, r.dst);
    return out;
  }

  /// Source vertices in order of first arrival.
  std::span<const VertexLabel> sources() const { return sources_; }

  /// Indices into edges() of the out-edges of src, in arrival order.
  std::span<const std::size_t> out_edges(const VertexLabel& src) const {
    auto it = out_edges_.find(src);
    if (it == out_edges_.end()) return {};
    return it->second;
  }

  std::size_t distinct_edge_count() const { return records_.size(); }
  std::uint64_t total_mass() const { return total_mass_; }
  bool empty() const { return records_.empty(); }

 private:
  std::unordered_map<EdgeKey, std::size_t> index_;
  std::vector<EdgeRecord> records_;
  std::unordered_map<VertexLabel, std::vector<std::size_t>> out_edges_;
  std::vector<VertexLabel> sources_;
  std::uint64_t total_mass_ = 0;
};

// ---------------------------------------------------------------------------
// Accuracy metrics.

inline constexpr double kDefaultG0 = 5.0;

/// er(q) = estimate / truth - 1.
inline double relative_error(double estimate, double truth) {
  if (!(truth > 0.0))
    throw Error(ErrorCode::kUndefinedTruth, "relative error needs a positive true frequency");
  return (estimate - truth) / truth;
}

inline double average_relative_error(std::span<const double> errors) {
  if (errors.empty()) throw Error(ErrorCode::kEmptyQuerySet, "no relative errors to average");
  double sum = 0.0;
  for (double e : errors) sum += e;
  return sum / static_cast<double>(errors.size());
}

/// Number of queries with er(q) <= G0 (inclusive).
inline std::size_t effective_queries(std::span<const double> errors, double g0 = kDefaultG0) {
  if (!(g0 > 0.0)) throw Error(ErrorCode::kConfig, "G0 must be positive");
  return static_cast<std::size_t>(
      std::count_if(errors.begin(), errors.end(), [g0](double e) { return e <= g0; }));
}

/// er(g) = Gamma(estimates) / Gamma(truths) - 1.
inline double subgraph_relative_error(std::span<const std::uint64_t> estimates,
                                      std::span<const std::uint64_t> truths, Aggregate aggregate) {
  if (estimates.empty() || estimates.size() != truths.size())
    throw Error(ErrorCode::kMalformedQuery, "estimates and truths must be equal, non-zero length");
  const Ratio truth = aggregate_values(truths, aggregate);
  if (truth.num == 0)
    throw Error(ErrorCode::kUndefinedTruth, "true aggregate of the subgraph is zero");
  const Ratio estimate = aggregate_values(estimates, aggregate);
  // Same-shape aggregates share a denominator for SUM, MIN and AVERAGE.
  return static_cast<double>(estimate.num) * static_cast<double>(truth.den) /
             (static_cast<double>(estimate.den) * static_cast<double>(truth.num)) -
         1.0;
}

struct VarianceRatio {
  double global_variance = 0.0;  // sigma_G over distinct-edge frequencies
  double local_variance = 0.0;   // sigma_V: mean per-source variance
  std::optional<double> ratio;   // nullopt when sigma_V == 0
};

/// Population variances. Single-out-edge sources contribute a local
/// variance of 0 unless excluded.
inline VarianceRatio variance_ratio(const ExactOracle& oracle,
                                    bool include_single_edge_sources = true) {
  if (oracle.distinct_edge_count() < 2)
    throw Error(ErrorCode::kInsufficientData, "variance ratio needs at least two distinct edges");
  auto variance = [](auto&& values_begin, auto&& values_end) {
    double n = 0.0, mean = 0.0, m2 = 0.0;
    for (auto it = values_begin; it != values_end; ++it) {
      n += 1.0;
      const double x = static_cast<double>(*it);
      const double d = x - mean;
      mean += d / n;
      m2 += d * (x - mean);
    }
    return n > 0.0 ? m2 / n : 0.0;
  };
  std::vector<std::uint64_t> freqs;
  freqs.reserve(oracle.distinct_edge_count());
  for (const auto& r : oracle.edges()) freqs.push_back(r.freq);

  VarianceRatio out;
  out.global_variance = variance(freqs.begin(), freqs.end());
  double local_sum = 0.0;
  std::size_t local_count = 0;
  std::vector<std::uint64_t> local;
  for (const auto& src : oracle.sources()) {
    const auto idx = oracle.out_edges(src);
    if (idx.size() < 2 && !include_single_edge_sources) continue;
    local.clear();
    for (std::size_t i : idx) local.push_back(oracle.edges()[i].freq);
    local_sum += variance(local.begin(), local.end());
    ++local_count;
  }
  out.local_variance = local_count ? local_sum / static_cast<double>(local_count) : 0.0;
  if (out.local_variance > 0.0) out.ratio = out.global_variance / out.local_variance;
  return out;
}

// ---------------------------------------------------------------------------
// Synthetic streams.

/// Recursive-matrix graph parameters. The quadrant defaults are the usual
/// R-MAT choice (a, b, c, d) = (0.45, 0.15, 0.15, 0.25).
struct RmatParams {
  unsigned scale = 10;
  std::uint64_t edge_count = 0;
  double a = 0.45;
  double b = 0.15;
  double c = 0.15;
  double d = 0.25;
  std::uint64_t seed = 0;

  void validate() const {
    if (scale == 0 || scale > 62) throw Error(ErrorCode::kConfig, "R-MAT scale must be in [1, 62]");
    for (double p : {a, b, c, d})
      if (!(p >= 0.0 && p <= 1.0))
        throw Error(ErrorCode::kConfig, "R-MAT quadrant probabilities must lie in [0, 1]");
    if (std::abs(a + b + c + d - 1.0) > 1e-9)
      throw Error(ErrorCode::kConfig, "R-MAT quadrant probabilities a+b+c+d must sum to 1");
  }
};

inline std::string vertex_name(std::uint64_t id) { return "v" + std::to_string(id); }

namespace detail {

/// Inverse-CDF sampler of Zipf(alpha) over {1, ..., n}.
class ZipfTable {
 public:
  ZipfTable(double alpha, std::size_t n) : cdf_(n) {
    double acc = 0.0;
    for (std::size_t k = 0; k < n; ++k) {
      acc += std::pow(static_cast<double>(k + 1), -alpha);
      cdf_[k] = acc;
    }
    for (auto& x : cdf_) x /= acc;
  }

  std::uint64_t draw(Rng& rng) const {
    const double u = rng.unit();
    return static_cast<std::uint64_t>(std::upper_bound(cdf_.begin(), cdf_.end(), u) -
                                      cdf_.begin()) + 1;
  }

 private:
  std::vector<double> cdf_;
};

}  // namespace detail

/// Zipf(alpha) frequency weights in [1, max_weight] layered over R-MAT
/// arrivals. Per source: every arrival leaving v carries the same weight, a
/// pure function of (seed, v), which gives each vertex its own frequency
/// level. Per arrival: each arrival draws its own weight independently.
/// Plain R-MAT at desk scale almost never repeats a pair, so without an
/// overlay nearly every edge has frequency 1.
struct FrequencyOverlay {
  enum class Mode { kPerSource, kPerArrival };
  double alpha = 1.5;
  std::uint64_t max_weight = 1024;
  Mode mode = Mode::kPerSource;
};

/// Arrivals by recursive quadrant descent. Repeated pairs are kept: they are
/// the stream's frequency mass.
inline std::vector<StreamElement> generate_rmat_stream(
    const RmatParams& params, std::optional<FrequencyOverlay> overlay = std::nullopt) {
  params.validate();
  Rng rng(derive_seed(params.seed, "rmat"));
  std::optional<detail::ZipfTable> zipf;
  if (overlay) {
    if (!(overlay->alpha > 0.0)) throw Error(ErrorCode::kConfig, "Zipf alpha must be positive");
    if (overlay->max_weight == 0) throw Error(ErrorCode::kConfig, "max weight must be positive");
    zipf.emplace(overlay->alpha, overlay->max_weight);
  }
  const bool per_source = overlay && overlay->mode == FrequencyOverlay::Mode::kPerSource;
  const std::uint64_t weight_seed = derive_seed(params.seed, "rmat-weight");
  Rng arrival_rng(derive_seed(params.seed, "rmat-freq"));
  std::unordered_map<std::uint64_t, std::uint64_t> source_weights;
  auto weight_of = [&](std::uint64_t src) -> std::uint64_t {
    if (!zipf) return 1;
    if (!per_source) return zipf->draw(arrival_rng);
    auto [it, fresh] = source_weights.try_emplace(src, 0);
    if (fresh) {
      Rng vertex_rng(derive_seed(weight_seed, src));
      it->second = zipf->draw(vertex_rng);
    }
    return it->second;
  };
  const double ab = params.a + params.b;
  const double abc = ab + params.c;
  std::vector<StreamElement> out;
  out.reserve(params.edge_count);
  for (std::uint64_t i = 0; i < params.edge_count; ++i) {
    std::uint64_t src = 0, dst = 0;
    for (unsigned level = 0; level < params.scale; ++level) {
      const double r = rng.unit();
      src <<= 1;
      dst <<= 1;
      if (r < params.a) {
      } else if (r < ab) {
        dst |= 1;
      } else if (r < abc) {
        src |= 1;
      } else {
        src |= 1;
        dst |= 1;
      }
    }
    out.push_back({VertexLabel(vertex_name(src)), VertexLabel(vertex_name(dst)), weight_of(src),
                   i + 1});
  }
  return out;
}

// ---------------------------------------------------------------------------
// Zipf-ranked sampling without replacement.

/// Random rank order over the population (rank 1 first).
template <typename T>
std::vector<T> zipf_ranking(std::vector<T> population, std::uint64_t seed) {
  Rng rng(seed);
  rng.shuffle(population.begin(), population.end());
  return population;
}

/// Picks `size` distinct rank positions, each draw proportional to
/// rank^-alpha among those not yet drawn. Implemented with exponential
/// keys (Efraimidis-Spirakis), which has the same distribution as the
/// sequential draws. Returned in draw order.
inline std::vector<std::size_t> zipf_sample_ranks(std::size_t population, double alpha,
                                                  std::size_t size, std::uint64_t seed) {
  if (!(alpha > 0.0)) throw Error(ErrorCode::kConfig, "Zipf alpha must be positive");
  if (size > population)
    throw Error(ErrorCode::kInsufficientPopulation,
                "cannot draw " + std::to_string(size) + " items without replacement from " +
                    std::to_string(population));
  Rng rng(seed);
  // key = ln(u) / weight = ln(u) * rank^alpha; the largest keys win.
  std::vector<std::pair<double, std::size_t>> keys(population);
  for (std::size_t i = 0; i < population; ++i) {
    const double u = rng.unit_open_low();
    keys[i] = {std::log(u) * std::pow(static_cast<double>(i + 1), alpha), i};
  }
  auto by_key = [](const auto& x, const auto& y) {
    return x.first != y.first ? x.first > y.first : x.second < y.second;
  };
  std::partial_sort(keys.begin(), keys.begin() + static_cast<std::ptrdiff_t>(size), keys.end(),
                    by_key);
  std::vector<std::size_t> out(size);
  for (std::size_t i = 0; i < size; ++i) out[i] = keys[i].second;
  return out;
}

/// Zipf workload over the distinct edges. The rank order comes from the
/// "zipf-rank" sub-seed, so workloads and Zipf query sets drawn from the
/// same seed agree on which edges are popular.
inline DataSample generate_zipf_workload(const std::vector<Edge>& edges, double alpha,
                                         std::size_t size, std::uint64_t seed) {
  const auto ranked = zipf_ranking(edges, derive_seed(seed, "zipf-rank"));
  const auto picks = zipf_sample_ranks(ranked.size(), alpha, size, derive_seed(seed, "zipf-workload"));
  DataSample out;
  out.capacity = size;
  out.elements.reserve(size);
  for (std::size_t i = 0; i < picks.size(); ++i)
    out.elements.push_back({ranked[picks[i]].first, ranked[picks[i]].second, 1, i + 1});
  return out;
}

// ---------------------------------------------------------------------------
// Query sets.

enum class QueryKind { kUniformEdges, kZipfEdges, kBfsSubgraphs };

inline const char* query_kind_name(QueryKind k) {
  switch (k) {
    case QueryKind::kUniformEdges: return "uniform";
    case QueryKind::kZipfEdges: return "zipf";
    case QueryKind::kBfsSubgraphs: return "bfs";
  }
  return "?";
}

inline QueryKind parse_query_kind(std::string_view s) {
  if (s == "uniform") return QueryKind::kUniformEdges;
  if (s == "zipf") return QueryKind::kZipfEdges;
  if (s == "bfs") return QueryKind::kBfsSubgraphs;
  throw Error(ErrorCode::kConfig,
              "unknown query kind '" + std::string(s) + "' (expected uniform, zipf or bfs)");
}

struct QuerySpec {
  QueryKind kind = QueryKind::kUniformEdges;
  std::size_t count = 0;
  double alpha = 1.5;               // zipf_edges only
  std::size_t subgraph_edges = 10;  // bfs_subgraphs only
  Aggregate aggregate = Aggregate::kSum;
};

struct QuerySet {
  std::vector<Edge> edges;
  std::vector<SubgraphQuery> subgraphs;

  std::size_t size() const { return edges.size() + subgraphs.size(); }
};

/// Randomized BFS along out-edges from `seed_vertex`: each dequeued vertex
/// contributes its unused out-edges in random order until `limit` edges are
/// collected or the reachable edges run out.
inline SubgraphQuery bfs_subgraph(const ExactOracle& oracle, const VertexLabel& seed_vertex,
                                  std::size_t limit, Rng& rng, Aggregate aggregate) {
  SubgraphQuery q;
  q.aggregate = aggregate;
  std::deque<VertexLabel> frontier{seed_vertex};
  std::unordered_set<VertexLabel> queued{seed_vertex};
  while (!frontier.empty() && q.edges.size() < limit) {
    const VertexLabel u = frontier.front();
    frontier.pop_front();
    const auto out = oracle.out_edges(u);
    std::vector<std::size_t> order(out.begin(), out.end());
    rng.shuffle(order.begin(), order.end());
    for (std::size_t idx : order) {
      if (q.edges.size() >= limit) break;
      const auto& r = oracle.edges()[idx];
      q.edges.emplace_back(r.src, r.dst);
      if (queued.insert(r.dst).second) frontier.push_back(r.dst);
    }
  }
  return q;
}

inline QuerySet generate_queries(const ExactOracle& oracle, const QuerySpec& spec,
                                 std::uint64_t seed) {
  QuerySet out;
  if (spec.count == 0) return out;
  if (oracle.empty()) throw Error(ErrorCode::kInsufficientData, "no ingested edges to query");
  switch (spec.kind) {
    case QueryKind::kUniformEdges: {
      Rng rng(derive_seed(seed, "uniform-queries"));
      const auto edges = oracle.edges();
      for (std::size_t i = 0; i < spec.count; ++i) {
        const auto& r = edges[rng.below(edges.size())];
        out.edges.emplace_back(r.src, r.dst);
      }
      break;
    }
    case QueryKind::kZipfEdges: {
      const auto ranked = zipf_ranking(oracle.distinct_edges(), derive_seed(seed, "zipf-rank"));
      const auto picks =
          zipf_sample_ranks(ranked.size(), spec.alpha, spec.count, derive_seed(seed, "zipf-queries"));
      for (std::size_t p : picks) out.edges.push_back(ranked[p]);
      break;
    }
    case QueryKind::kBfsSubgraphs: {
      Rng rng(derive_seed(seed, "bfs-queries"));
      const auto sources = oracle.sources();
      for (std::size_t i = 0; i < spec.count; ++i) {
        const auto& start = sources[rng.below(sources.size())];
        out.subgraphs.push_back(bfs_subgraph(oracle, start, spec.subgraph_edges, rng, spec.aggregate));
      }
      break;
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Benchmark driver.

struct QueryErrors {
  std::vector<double> errors;
  std::vector<bool> via_outlier;  // gSketch only; empty for the global sketch
  double seconds_per_query = 0.0;
};

template <typename Engine>
QueryErrors evaluate_queries(const Engine& engine, const QuerySet& queries,
                             const ExactOracle& oracle) {
  QueryErrors out;
  out.errors.reserve(queries.size());
  std::vector<std::uint64_t> estimates;
  const auto start = std::chrono::steady_clock::now();
  for (const auto& [src, dst] : queries.edges)
    estimates.push_back(engine.estimate_edge(src, dst));
  std::vector<Ratio> subgraph_estimates;
  for (const auto& q : queries.subgraphs) subgraph_estimates.push_back(engine.estimate_subgraph(q));
  const auto stop = std::chrono::steady_clock::now();
  if (queries.size() > 0)
    out.seconds_per_query =
        std::chrono::duration<double>(stop - start).count() / static_cast<double>(queries.size());

  for (std::size_t i = 0; i < queries.edges.size(); ++i) {
    const auto& [src, dst] = queries.edges[i];
    out.errors.push_back(relative_error(static_cast<double>(estimates[i]),
                                        static_cast<double>(oracle.truth(src, dst))));
  }
  for (std::size_t i = 0; i < queries.subgraphs.size(); ++i) {
    const auto& q = queries.subgraphs[i];
    std::vector<std::uint64_t> est, truth;
    for (const auto& [src, dst] : q.edges) {
      est.push_back(engine.estimate_edge(src, dst));
      truth.push_back(oracle.truth(src, dst));
    }
    out.errors.push_back(subgraph_relative_error(est, truth, q.aggregate));
  }
  if constexpr (std::is_same_v<Engine, GSketchEngine>) {
    for (const auto& [src, dst] : queries.edges) out.via_outlier.push_back(!engine.is_routed(src));
    for (const auto& q : queries.subgraphs) {
      bool any = false;
      for (const auto& [src, dst] : q.edges) any = any || !engine.is_routed(src);
      out.via_outlier.push_back(any);
    }
  }
  return out;
}

struct MetricsReport {
  std::string engine;  // "gsketch" or "global"
  Scenario scenario = Scenario::kDataOnly;
  std::uint64_t budget_bytes = 0;
  std::optional<double> alpha;
  double avg_relative_error = 0.0;
  std::size_t effective_count = 0;
  std::size_t query_count = 0;
  double g0 = kDefaultG0;
  double t_construct_s = 0.0;
  double t_query_s = 0.0;
  std::uint64_t seed = 0;

  // gSketch only: queries whose source (any source, for subgraphs) fell to
  // the outlier sketch.
  std::size_t outlier_query_count = 0;
  std::optional<double> outlier_avg_relative_error;
  std::size_t leaf_count = 0;
};

struct BenchmarkSpec {
  std::size_t sample_size = 0;
  Scenario scenario = Scenario::kDataOnly;
  double workload_alpha = 1.5;
  std::size_t workload_size = 0;
  std::vector<std::uint64_t> budgets;
  std::uint64_t depth = 5;
  std::uint64_t w0 = 64;
  double collision_bound = 0.5;
  double outlier_fraction = 0.1;
  QuerySpec queries;
  double g0 = kDefaultG0;
  // Fraction of the stream's source vertices whose edges are kept out of
  // the data sample, simulating vertices that first appear after sampling.
  double withheld_source_fraction = 0.0;
  bool include_global = true;
  std::uint64_t seed = 0;
};

/// Inputs shared by every budget point of a benchmark run.
struct BenchmarkFixture {
  ExactOracle oracle;
  DataSample sample;
  std::optional<WorkloadWeights> weights;
  QuerySet queries;
};

inline BenchmarkFixture prepare_benchmark(std::span<const StreamElement> stream,
                                          const BenchmarkSpec& spec) {
  if (spec.sample_size == 0) throw Error(ErrorCode::kConfig, "sample size must be positive");
  BenchmarkFixture fx;
  fx.oracle.add(stream);

  std::unordered_set<VertexLabel> withheld;
  if (spec.withheld_source_fraction > 0.0) {
    if (!(spec.withheld_source_fraction < 1.0))
      throw Error(ErrorCode::kConfig, "withheld source fraction must lie in [0, 1)");
    std::vector<VertexLabel> sources(fx.oracle.sources().begin(), fx.oracle.sources().end());
    Rng rng(derive_seed(spec.seed, "withhold"));
    rng.shuffle(sources.begin(), sources.end());
    const auto n = static_cast<std::size_t>(
        std::floor(static_cast<double>(sources.size()) * spec.withheld_source_fraction));
    withheld.insert(sources.begin(), sources.begin() + static_cast<std::ptrdiff_t>(n));
  }
  Reservoir reservoir(spec.sample_size, derive_seed(spec.seed, "sample"));
  for (const auto& e : stream)
    if (!withheld.count(e.src)) reservoir.offer(e);
  fx.sample = std::move(reservoir).take();

  if (spec.scenario == Scenario::kDataAndWorkload) {
    const auto workload = generate_zipf_workload(fx.oracle.distinct_edges(), spec.workload_alpha,
                                                 spec.workload_size, spec.seed);
    const auto known = source_vertices(compute_vertex_stats(fx.sample));
    if (!known.empty()) fx.weights = compute_workload_weights(workload, known);
  }
  fx.queries = generate_queries(fx.oracle, spec.queries, spec.seed);
  return fx;
}

inline PartitionConfig partition_config_for(const BenchmarkSpec& spec, std::uint64_t budget) {
  PartitionConfig config;
  config.total_width = width_for_budget(budget, spec.depth);
  config.depth = spec.depth;
  config.w0 = std::min(spec.w0, config.total_width);
  config.collision_bound = spec.collision_bound;
  config.outlier_fraction = spec.outlier_fraction;
  config.scenario = spec.scenario;
  return config;
}

inline std::optional<double> report_alpha(const BenchmarkSpec& spec) {
  if (spec.scenario == Scenario::kDataAndWorkload) return spec.workload_alpha;
  if (spec.queries.kind == QueryKind::kZipfEdges) return spec.queries.alpha;
  return std::nullopt;
}

/// One budget point for gSketch: sample -> plan -> engine -> full ingest,
/// then the shared query set scored against the oracle.
inline MetricsReport bench_gsketch(std::span<const StreamElement> stream,
                                   const BenchmarkFixture& fx, const BenchmarkSpec& spec,
                                   std::uint64_t budget,
                                   std::optional<GSketchEngine>* keep = nullptr) {
  const auto start = std::chrono::steady_clock::now();
  const auto config = partition_config_for(spec, budget);
  auto plan = build_plan(fx.sample, config, fx.weights ? &*fx.weights : nullptr);
  auto engine = GSketchEngine::build(std::move(plan), derive_seed(spec.seed, "engine"));
  engine.ingest(stream);
  engine.freeze();
  const auto built = std::chrono::steady_clock::now();

  const auto result = evaluate_queries(engine, fx.queries, fx.oracle);
  MetricsReport r;
  r.engine = "gsketch";
  r.scenario = spec.scenario;
  r.budget_bytes = budget;
  r.alpha = report_alpha(spec);
  r.avg_relative_error = average_relative_error(result.errors);
  r.effective_count = effective_queries(result.errors, spec.g0);
  r.query_count = result.errors.size();
  r.g0 = spec.g0;
  r.t_construct_s = std::chrono::duration<double>(built - start).count();
  r.t_query_s = result.seconds_per_query;
  r.seed = spec.seed;
  r.leaf_count = engine.plan().leaves.size();
  std::vector<double> outlier_errors;
  for (std::size_t i = 0; i < result.errors.size(); ++i)
    if (result.via_outlier[i]) outlier_errors.push_back(result.errors[i]);
  r.outlier_query_count = outlier_errors.size();
  if (!outlier_errors.empty()) r.outlier_avg_relative_error = average_relative_error(outlier_errors);
  if (keep != nullptr) keep->emplace(std::move(engine));
  return r;
}

inline MetricsReport bench_global(std::span<const StreamElement> stream,
                                  const BenchmarkFixture& fx, const BenchmarkSpec& spec,
                                  std::uint64_t budget) {
  const auto start = std::chrono::steady_clock::now();
  GlobalSketchEngine engine(budget, spec.depth, derive_seed(spec.seed, "engine"));
  engine.ingest(stream);
  engine.freeze();
  const auto built = std::chrono::steady_clock::now();

  const auto result = evaluate_queries(engine, fx.queries, fx.oracle);
  MetricsReport r;
  r.engine = "global";
  r.scenario = spec.scenario;
  r.budget_bytes = budget;
  r.alpha = report_alpha(spec);
  r.avg_relative_error = average_relative_error(result.errors);
  r.effective_count = effective_queries(result.errors, spec.g0);
  r.query_count = result.errors.size();
  r.g0 = spec.g0;
  r.t_construct_s = std::chrono::duration<double>(built - start).count();
  r.t_query_s = result.seconds_per_query;
  r.seed = spec.seed;
  return r;
}

/// For every budget, gSketch and (optionally) the global sketch with the
/// same byte budget, scored on one shared query set.
inline std::vector<MetricsReport> run_benchmark(std::span<const StreamElement> stream,
                                                const BenchmarkSpec& spec) {
  if (spec.budgets.empty()) throw Error(ErrorCode::kConfig, "no budgets to benchmark");
  const auto fx = prepare_benchmark(stream, spec);
  if (fx.queries.size() == 0) throw Error(ErrorCode::kEmptyQuerySet, "benchmark has no queries");
  std::vector<MetricsReport> out;
  for (std::uint64_t budget : spec.budgets) {
    out.push_back(bench_gsketch(stream, fx, spec, budget));
    if (spec.include_global) out.push_back(bench_global(stream, fx, spec, budget));
  }
  return out;
}

inline constexpr std::string_view kCsvHeader =
    "engine,scenario,budget_bytes,alpha,avg_rel_err,effective_count,query_count,G0,"
    "t_construct_s,t_query_s,seed";

inline std::string csv_row(const MetricsReport& r) {
  std::ostringstream os;
  os << std::setprecision(12);
  os << r.engine << ',' << scenario_name(r.scenario) << ',' << r.budget_bytes << ',';
  if (r.alpha) os << *r.alpha;
  os << ',' << r.avg_relative_error << ',' << r.effective_count << ',' << r.query_count << ','
     << r.g0 << ',' << r.t_construct_s << ',' << r.t_query_s << ',' << r.seed;
  return os.str();
}

inline void write_csv(std::ostream& out, std::span<const MetricsReport> reports) {
  out << kCsvHeader << '\n';
  for (const auto& r : reports) out << csv_row(r) << '\n';
}

}  // namespace gsketch
