#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "gsketch/error.hpp"
#include "gsketch/stream.hpp"

namespace gsketch {

enum class Scenario { kDataOnly, kDataAndWorkload };

inline const char* scenario_name(Scenario s) {
  return s == Scenario::kDataOnly ? "data" : "workload";
}

inline Scenario parse_scenario(std::string_view name) {
  if (name == "data") return Scenario::kDataOnly;
  if (name == "workload") return Scenario::kDataAndWorkload;
  throw Error(ErrorCode::kConfig, "unknown scenario '" + std::string(name) +
                                      "' (expected data or workload)");
}

struct PartitionConfig {
  std::uint64_t total_width = 0;
  std::uint64_t depth = 1;
  std::uint64_t w0 = 1;            // leaves are never split below this width
  double collision_bound = 0.2;    // C: stop once sum of degrees <= C * width
  double outlier_fraction = 0.1;
  Scenario scenario = Scenario::kDataOnly;

  void validate() const {
    if (total_width == 0) throw Error(ErrorCode::kConfig, "total width must be positive");
    if (depth == 0) throw Error(ErrorCode::kConfig, "depth must be positive");
    if (w0 == 0) throw Error(ErrorCode::kConfig, "w0 must be positive");
    if (w0 > total_width) throw Error(ErrorCode::kConfig, "w0 must not exceed the total width");
    if (!(collision_bound > 0.0 && collision_bound < 1.0))
      throw Error(ErrorCode::kConfig, "C must lie in (0, 1)");
    if (!(outlier_fraction > 0.0 && outlier_fraction < 1.0))
      throw Error(ErrorCode::kConfig, "outlier fraction must lie in (0, 1)");
  }

  friend bool operator==(const PartitionConfig&, const PartitionConfig&) = default;
};

/// One sampled source vertex as seen by the partitioner. The weight is the
/// per-vertex multiplier of the objective: the out-degree when only data is
/// available, the workload weight numerator / denominator otherwise.
struct PartitionVertex {
  VertexLabel label;
  std::uint64_t fv = 0;
  std::uint64_t deg = 0;
  std::uint64_t weight_num = 0;
  std::uint64_t weight_den = 1;

  double weight() const {
    return static_cast<double>(weight_num) / static_cast<double>(weight_den);
  }
};

/// F(S): summed estimated frequency of the vertices in S.
inline double estimated_partition_mass(std::span<const PartitionVertex> vertices) {
  double mass = 0.0;
  for (const auto& v : vertices) mass += static_cast<double>(v.fv);
  return mass;
}

namespace detail {

inline void require_nondegenerate(const PartitionVertex& v) {
  if (v.fv == 0 || v.deg == 0)
    throw Error(ErrorCode::kDegenerateStats,
                "vertex " + v.label.str() + " has zero frequency or zero degree");
}

/// sum over m in side of weight(m) * F(side) / (fv(m) / deg(m)).
inline double side_objective(std::span<const PartitionVertex> side) {
  const double mass = estimated_partition_mass(side);
  double total = 0.0;
  for (const auto& v : side) {
    require_nondegenerate(v);
    const double avg_freq = static_cast<double>(v.fv) / static_cast<double>(v.deg);
    total += v.weight() * mass / avg_freq;
  }
  return total;
}

inline std::vector<PartitionVertex> with_degree_weights(std::span<const PartitionVertex> side) {
  std::vector<PartitionVertex> out(side.begin(), side.end());
  for (auto& v : out) {
    v.weight_num = v.deg;
    v.weight_den = 1;
  }
  return out;
}

}  // namespace detail

/// E' of a data-only split: each vertex weighs in by its out-degree.
inline double split_objective_data(std::span<const PartitionVertex> s1,
                                   std::span<const PartitionVertex> s2) {
  const auto a = detail::with_degree_weights(s1);
  const auto b = detail::with_degree_weights(s2);
  return detail::side_objective(a) + detail::side_objective(b);
}

/// E' of a workload-aware split: each vertex weighs in by its query weight.
inline double split_objective_workload(std::span<const PartitionVertex> s1,
                                       std::span<const PartitionVertex> s2) {
  return detail::side_objective(s1) + detail::side_objective(s2);
}

/// Builds partitioner input for the given labels. Vertices without stats are
/// an error; under the workload scenario so are vertices without a weight.
inline std::vector<PartitionVertex> make_partition_vertices(
    std::span<const VertexLabel> labels, const VertexStats& stats,
    const WorkloadWeights* weights = nullptr) {
  std::vector<PartitionVertex> out;
  out.reserve(labels.size());
  for (const auto& label : labels) {
    auto it = stats.find(label);
    if (it == stats.end())
      throw Error(ErrorCode::kDegenerateStats, "no sample stats for vertex " + label.str());
    PartitionVertex v{label, it->second.fv, it->second.deg, it->second.deg, 1};
    if (weights != nullptr) {
      v.weight_num = weights->numerator(label);
      v.weight_den = weights->denominator();
    }
    out.push_back(std::move(v));
  }
  return out;
}

inline double split_objective_data(std::span<const VertexLabel> s1,
                                   std::span<const VertexLabel> s2, const VertexStats& stats) {
  return split_objective_data(make_partition_vertices(s1, stats),
                              make_partition_vertices(s2, stats));
}

inline double split_objective_workload(std::span<const VertexLabel> s1,
                                       std::span<const VertexLabel> s2, const VertexStats& stats,
                                       const WorkloadWeights& weights) {
  return split_objective_workload(make_partition_vertices(s1, stats, &weights),
                                  make_partition_vertices(s2, stats, &weights));
}

/// Orders vertices ascending by fv/deg (data) or fv/weight (workload),
/// compared in exact integer arithmetic; ties fall back to label order.
inline void sort_for_scenario(std::vector<PartitionVertex>& vertices, Scenario scenario) {
  using u128 = unsigned __int128;
  std::sort(vertices.begin(), vertices.end(),
            [scenario](const PartitionVertex& a, const PartitionVertex& b) {
              // fv_a / x_a < fv_b / x_b  <=>  fv_a * x_b < fv_b * x_a (shared
              // weight denominators cancel).
              const std::uint64_t xa = scenario == Scenario::kDataOnly ? a.deg : a.weight_num;
              const std::uint64_t xb = scenario == Scenario::kDataOnly ? b.deg : b.weight_num;
              const u128 lhs = static_cast<u128>(a.fv) * xb;
              const u128 rhs = static_cast<u128>(b.fv) * xa;
              if (lhs != rhs) return lhs < rhs;
              return a.label < b.label;
            });
}

struct PivotChoice {
  std::size_t pivot = 0;  // S1 = [0, pivot), S2 = [pivot, n)
  double objective = 0.0;
};

/// Split position minimizing E' over an already sorted list. Ties prefer
/// the most balanced split, then the smaller index. Returns nullopt when
/// fewer than two vertices make the node unsplittable.
///
/// Candidates are screened in O(n) with prefix sums; the few whose screened
/// value lies within a hair of the minimum are re-scored with the direct
/// objective, so the reported value is exactly what split_objective_*
/// returns at that pivot. Values within a relative 1e-12 count as ties.
inline std::optional<PivotChoice> best_pivot(std::span<const PartitionVertex> ordered,
                                             Scenario scenario) {
  const std::size_t n = ordered.size();
  if (n < 2) return std::nullopt;
  for (const auto& v : ordered) detail::require_nondegenerate(v);

  auto weight_of = [scenario](const PartitionVertex& v) -> long double {
    return scenario == Scenario::kDataOnly ? static_cast<long double>(v.deg)
                                           : static_cast<long double>(v.weight());
  };
  // E'(p) = F(S1) * G(S1) + F(S2) * G(S2), G(S) = sum weight * deg / fv.
  std::vector<long double> mass_prefix(n + 1, 0.0L), g_prefix(n + 1, 0.0L);
  for (std::size_t i = 0; i < n; ++i) {
    const auto& v = ordered[i];
    mass_prefix[i + 1] = mass_prefix[i] + static_cast<long double>(v.fv);
    g_prefix[i + 1] = g_prefix[i] + weight_of(v) * static_cast<long double>(v.deg) /
                                        static_cast<long double>(v.fv);
  }
  std::vector<long double> screened(n, 0.0L);
  long double best_screen = 0.0L;
  for (std::size_t p = 1; p < n; ++p) {
    const long double e1 = mass_prefix[p] * g_prefix[p];
    const long double e2 = (mass_prefix[n] - mass_prefix[p]) * (g_prefix[n] - g_prefix[p]);
    screened[p] = e1 + e2;
    if (p == 1 || screened[p] < best_screen) best_screen = screened[p];
  }
  const long double slack = best_screen * 1e-9L + 1e-300L;

  auto exact = [&](std::size_t p) {
    const auto s1 = ordered.subspan(0, p);
    const auto s2 = ordered.subspan(p);
    return scenario == Scenario::kDataOnly ? split_objective_data(s1, s2)
                                           : split_objective_workload(s1, s2);
  };
  auto imbalance = [n](std::size_t p) {
    const auto twice = static_cast<std::int64_t>(2 * p) - static_cast<std::int64_t>(n);
    return twice < 0 ? -twice : twice;
  };

  std::optional<PivotChoice> best;
  for (std::size_t p = 1; p < n; ++p) {
    if (screened[p] > best_screen + slack) continue;
    const double value = exact(p);
    if (!best) {
      best = PivotChoice{p, value};
      continue;
    }
    // Equal objectives summed in different orders may differ in the last
    // bits; treat them as the tie they are.
    const double tol = 1e-12 * std::max(value, best->objective);
    const bool tie = std::abs(value - best->objective) <= tol;
    if ((!tie && value < best->objective) || (tie && imbalance(p) < imbalance(best->pivot)))
      best = PivotChoice{p, value};
  }
  return best;
}

enum class LeafReason {
  kMinWidth,        // width fell below w0
  kCollisionBound,  // sum of degrees <= C * width; width reset to that sum
  kUnsplittable,    // single vertex, or width too small to halve
};

inline const char* leaf_reason_name(LeafReason r) {
  switch (r) {
    case LeafReason::kMinWidth: return "min_width";
    case LeafReason::kCollisionBound: return "collision_bound";
    case LeafReason::kUnsplittable: return "unsplittable";
  }
  return "?";
}

inline LeafReason parse_leaf_reason(std::string_view s) {
  if (s == "min_width") return LeafReason::kMinWidth;
  if (s == "collision_bound") return LeafReason::kCollisionBound;
  if (s == "unsplittable") return LeafReason::kUnsplittable;
  throw Error(ErrorCode::kPlanInvalid, "unknown leaf reason '" + std::string(s) + "'");
}

struct PartitionLeaf {
  std::size_t id = 0;
  std::uint64_t width = 0;            // materialized width
  std::uint64_t allocated_width = 0;  // width when the leaf was created
  LeafReason reason = LeafReason::kMinWidth;
  std::vector<VertexLabel> vertices;  // in partitioner sort order

  friend bool operator==(const PartitionLeaf&, const PartitionLeaf&) = default;
};

struct PartitionPlan {
  static constexpr int kVersion = 1;

  std::vector<PartitionLeaf> leaves;
  std::map<VertexLabel, std::size_t> routing;
  std::uint64_t outlier_width = 1;
  std::uint64_t depth = 1;
  PartitionConfig config;

  std::optional<std::size_t> route(const VertexLabel& v) const {
    auto it = routing.find(v);
    if (it == routing.end()) return std::nullopt;
    return it->second;
  }

  std::uint64_t leaf_width_sum() const {
    std::uint64_t sum = 0;
    for (const auto& l : leaves) sum += l.width;
    return sum;
  }

  std::uint64_t used_width() const { return leaf_width_sum() + outlier_width; }

  void validate() const {
    if (depth == 0) throw Error(ErrorCode::kPlanInvalid, "plan depth is zero");
    if (outlier_width == 0) throw Error(ErrorCode::kPlanInvalid, "outlier width is zero");
    std::size_t routed = 0;
    for (std::size_t i = 0; i < leaves.size(); ++i) {
      const auto& leaf = leaves[i];
      if (leaf.id != i) throw Error(ErrorCode::kPlanInvalid, "leaf ids must be 0..n-1 in order");
      if (leaf.width == 0)
        throw Error(ErrorCode::kPlanInvalid, "leaf " + std::to_string(i) + " has width 0");
      for (const auto& v : leaf.vertices) {
        auto it = routing.find(v);
        if (it == routing.end() || it->second != i)
          throw Error(ErrorCode::kPlanInvalid, "routing disagrees with leaf " + std::to_string(i));
        ++routed;
      }
    }
    if (routed != routing.size())
      throw Error(ErrorCode::kPlanInvalid, "routing has vertices outside every leaf");
    if (config.total_width != 0 && used_width() > config.total_width)
      throw Error(ErrorCode::kPlanInvalid, "plan exceeds its width budget");
  }

  nlohmann::json to_json() const {
    nlohmann::json leaves_json = nlohmann::json::array();
    for (const auto& leaf : leaves) {
      nlohmann::json vertices = nlohmann::json::array();
      for (const auto& v : leaf.vertices) vertices.push_back(v.str());
      leaves_json.push_back({{"id", leaf.id},
                             {"width", leaf.width},
                             {"allocated_width", leaf.allocated_width},
                             {"reason", leaf_reason_name(leaf.reason)},
                             {"vertices", std::move(vertices)}});
    }
    return {{"version", kVersion},
            {"depth", depth},
            {"outlier_width", outlier_width},
            {"leaves", std::move(leaves_json)},
            {"config",
             {{"total_width", config.total_width},
              {"depth", config.depth},
              {"w0", config.w0},
              {"C", config.collision_bound},
              {"outlier_fraction", config.outlier_fraction},
              {"scenario", scenario_name(config.scenario)}}}};
  }

  std::string dump() const { return to_json().dump(2) + "\n"; }

  static PartitionPlan from_json(const nlohmann::json& j) {
    try {
      if (j.at("version").get<int>() != kVersion)
        throw Error(ErrorCode::kPlanInvalid, "unsupported plan version");
      PartitionPlan plan;
      plan.depth = j.at("depth").get<std::uint64_t>();
      plan.outlier_width = j.at("outlier_width").get<std::uint64_t>();
      const auto& c = j.at("config");
      plan.config.total_width = c.at("total_width").get<std::uint64_t>();
      plan.config.depth = c.at("depth").get<std::uint64_t>();
      plan.config.w0 = c.at("w0").get<std::uint64_t>();
      plan.config.collision_bound = c.at("C").get<double>();
      plan.config.outlier_fraction = c.at("outlier_fraction").get<double>();
      plan.config.scenario = parse_scenario(c.at("scenario").get<std::string>());
      for (const auto& lj : j.at("leaves")) {
        PartitionLeaf leaf;
        leaf.id = lj.at("id").get<std::size_t>();
        leaf.width = lj.at("width").get<std::uint64_t>();
        leaf.allocated_width = lj.at("allocated_width").get<std::uint64_t>();
        leaf.reason = parse_leaf_reason(lj.at("reason").get<std::string>());
        for (const auto& v : lj.at("vertices")) {
          leaf.vertices.emplace_back(v.get<std::string>());
          if (!plan.routing.emplace(leaf.vertices.back(), leaf.id).second)
            throw Error(ErrorCode::kPlanInvalid,
                        "vertex " + leaf.vertices.back().str() + " appears in two leaves");
        }
        plan.leaves.push_back(std::move(leaf));
      }
      plan.validate();
      return plan;
    } catch (const nlohmann::json::exception& e) {
      throw Error(ErrorCode::kPlanInvalid, std::string("malformed plan JSON: ") + e.what());
    }
  }

  static PartitionPlan parse(std::string_view text) {
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(text);
    } catch (const nlohmann::json::exception& e) {
      throw Error(ErrorCode::kPlanInvalid, std::string("malformed plan JSON: ") + e.what());
    }
    return from_json(j);
  }
};

/// Non-outlier root width: floor(total_width * (1 - outlier_fraction)).
inline std::uint64_t root_width_for(const PartitionConfig& config) {
  const long double w = static_cast<long double>(config.total_width) *
                        (1.0L - static_cast<long double>(config.outlier_fraction));
  return static_cast<std::uint64_t>(std::floor(w + 1e-9L));
}

inline std::uint64_t base_outlier_width_for(const PartitionConfig& config) {
  const long double w = static_cast<long double>(config.total_width) *
                        static_cast<long double>(config.outlier_fraction);
  return std::max<std::uint64_t>(1, static_cast<std::uint64_t>(std::floor(w + 1e-9L)));
}

namespace detail {

class PlanBuilder {
 public:
  PlanBuilder(const PartitionConfig& config, std::span<const PartitionVertex> ordered)
      : config_(config), ordered_(ordered) {}

  void run(std::uint64_t root_width) { visit(0, ordered_.size(), root_width); }

  std::vector<PartitionLeaf> take_leaves() && { return std::move(leaves_); }

 private:
  // A node stays active iff width >= w0 and sum of degrees > C * width
  // (plus the structural need of two vertices and a width that halves).
  void visit(std::size_t lo, std::size_t hi, std::uint64_t width) {
    std::uint64_t degree_sum = 0;
    for (std::size_t i = lo; i < hi; ++i) degree_sum += ordered_[i].deg;

    if (static_cast<double>(degree_sum) <= config_.collision_bound * static_cast<double>(width)) {
      emit(lo, hi, degree_sum, width, LeafReason::kCollisionBound);
      return;
    }
    if (width < config_.w0) {
      emit(lo, hi, width, width, LeafReason::kMinWidth);
      return;
    }
    const auto choice = width >= 2 ? best_pivot(ordered_.subspan(lo, hi - lo), config_.scenario)
                                   : std::nullopt;
    if (!choice) {
      emit(lo, hi, width, width, LeafReason::kUnsplittable);
      return;
    }
    const std::uint64_t left_width = width / 2;
    visit(lo, lo + choice->pivot, left_width);
    visit(lo + choice->pivot, hi, width - left_width);
  }

  void emit(std::size_t lo, std::size_t hi, std::uint64_t width, std::uint64_t allocated,
            LeafReason reason) {
    PartitionLeaf leaf;
    leaf.id = leaves_.size();
    leaf.width = width;
    leaf.allocated_width = allocated;
    leaf.reason = reason;
    for (std::size_t i = lo; i < hi; ++i) leaf.vertices.push_back(ordered_[i].label);
    leaves_.push_back(std::move(leaf));
  }

  const PartitionConfig& config_;
  std::span<const PartitionVertex> ordered_;
  std::vector<PartitionLeaf> leaves_;
};

}  // namespace detail

/// Partitions the width budget over the sample's source vertices.
///
/// The root gets floor(total_width * (1 - outlier_fraction)); each split
/// halves a node's width at the pivot minimizing E'. Width given back by
/// collision-bound leaves, whose width shrinks to their degree sum, goes to
/// the outlier sketch. An empty sample yields an outlier-only plan that owns
/// the whole budget.
inline PartitionPlan build_plan(const DataSample& sample, const PartitionConfig& config,
                                const WorkloadWeights* weights = nullptr) {
  config.validate();
  const bool workload = config.scenario == Scenario::kDataAndWorkload;
  if (workload != (weights != nullptr))
    throw Error(ErrorCode::kConfig,
                workload ? "workload scenario requires workload weights"
                         : "workload weights given for the data-only scenario");

  PartitionPlan plan;
  plan.depth = config.depth;
  plan.config = config;

  const VertexStats stats = compute_vertex_stats(sample);
  if (stats.empty()) {
    plan.outlier_width = config.total_width;
    return plan;
  }

  std::vector<VertexLabel> labels;
  labels.reserve(stats.size());
  for (const auto& [v, _] : stats) labels.push_back(v);
  auto ordered = make_partition_vertices(labels, stats, weights);
  sort_for_scenario(ordered, config.scenario);

  const std::uint64_t root_width = root_width_for(config);
  plan.outlier_width = base_outlier_width_for(config);
  if (root_width == 0)
    throw Error(ErrorCode::kConfig, "total width leaves no room for partitioned sketches");

  detail::PlanBuilder builder(config, ordered);
  builder.run(root_width);
  plan.leaves = std::move(builder).take_leaves();

  for (const auto& leaf : plan.leaves) {
    plan.outlier_width += leaf.allocated_width - leaf.width;
    for (const auto& v : leaf.vertices) plan.routing.emplace(v, leaf.id);
  }
  return plan;
}

inline PartitionPlan build_plan(const DataSample& sample, const PartitionConfig& config,
                                const WorkloadWeights& weights) {
  return build_plan(sample, config, &weights);
}

struct LeafBoundReport {
  std::size_t leaf_id = 0;
  LeafReason reason = LeafReason::kMinWidth;
  std::uint64_t degree_sum = 0;
  std::uint64_t allocated_width = 0;
  std::uint64_t width = 0;
  double creation_bound = 0.0;  // degree_sum / allocated_width
  double load_factor = 0.0;     // degree_sum / width, after any reset
  bool checked = false;         // collision-bound leaves only
  bool holds = true;            // creation_bound <= C
  bool width_reset = false;     // informational: load_factor is 1 after reset
};

/// Per-leaf collision bound: for collision-bound leaves, the sum of
/// degrees over the creation-time width must not exceed C; any collision
/// involving a given edge in one row then has probability at most C.
inline std::vector<LeafBoundReport> verify_collision_bound(const PartitionPlan& plan,
                                                           const VertexStats& stats, double c) {
  std::vector<LeafBoundReport> out;
  out.reserve(plan.leaves.size());
  for (const auto& leaf : plan.leaves) {
    LeafBoundReport r;
    r.leaf_id = leaf.id;
    r.reason = leaf.reason;
    for (const auto& v : leaf.vertices) {
      auto it = stats.find(v);
      if (it != stats.end()) r.degree_sum += it->second.deg;
    }
    r.allocated_width = leaf.allocated_width;
    r.width = leaf.width;
    r.creation_bound = static_cast<double>(r.degree_sum) / static_cast<double>(leaf.allocated_width);
    r.load_factor = static_cast<double>(r.degree_sum) / static_cast<double>(leaf.width);
    r.checked = leaf.reason == LeafReason::kCollisionBound;
    r.holds = !r.checked || r.creation_bound <= c;
    r.width_reset = r.checked && leaf.width != leaf.allocated_width;
    out.push_back(r);
  }
  return out;
}

}  // namespace gsketch
