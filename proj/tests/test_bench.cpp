#include <gtest/gtest.h>

#include <algorithm>
#include <map>
#include <set>
#include <sstream>

#include "gsketch/bench.hpp"

using namespace gsketch;

namespace {

StreamElement E(const std::string& s, const std::string& d, std::uint64_t f = 1) {
  return {VertexLabel(s), VertexLabel(d), f, 0};
}

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

std::vector<Edge> edges_of(std::size_t n) {
  std::vector<Edge> out;
  for (std::size_t i = 0; i < n; ++i)
    out.emplace_back(VertexLabel("s" + std::to_string(i)), VertexLabel("d"));
  return out;
}

std::vector<double> average_ranks(const std::vector<double>& x) {
  std::vector<std::size_t> idx(x.size());
  for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
  std::sort(idx.begin(), idx.end(), [&](auto a, auto b) { return x[a] < x[b]; });
  std::vector<double> r(x.size());
  for (std::size_t i = 0; i < idx.size();) {
    std::size_t j = i;
    while (j + 1 < idx.size() && x[idx[j + 1]] == x[idx[i]]) ++j;
    for (std::size_t k = i; k <= j; ++k) r[idx[k]] = (static_cast<double>(i + j) / 2.0) + 1.0;
    i = j + 1;
  }
  return r;
}

double spearman(const std::vector<double>& x, const std::vector<double>& y) {
  const auto rx = average_ranks(x), ry = average_ranks(y);
  const double n = static_cast<double>(x.size());
  double mx = 0, my = 0;
  for (std::size_t i = 0; i < x.size(); ++i) mx += rx[i] / n, my += ry[i] / n;
  double sxy = 0, sxx = 0, syy = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxy += (rx[i] - mx) * (ry[i] - my);
    sxx += (rx[i] - mx) * (rx[i] - mx);
    syy += (ry[i] - my) * (ry[i] - my);
  }
  return sxy / std::sqrt(sxx * syy);
}

}  // namespace

TEST(Metrics, RelativeError) {
  EXPECT_DOUBLE_EQ(relative_error(12, 10), 0.2);
  EXPECT_DOUBLE_EQ(relative_error(10, 10), 0.0);
  EXPECT_EQ(code_of([] { relative_error(3, 0); }), ErrorCode::kUndefinedTruth);
}

TEST(Metrics, AverageAndEffective) {
  const std::vector<double> two{0.2, 0.4};
  EXPECT_DOUBLE_EQ(average_relative_error(two), 0.3);
  EXPECT_EQ(code_of([] { average_relative_error({}); }), ErrorCode::kEmptyQuerySet);
  const std::vector<double> three{0.1, 6.0, 5.0};
  EXPECT_EQ(effective_queries(three, 5.0), 2u);
  EXPECT_EQ(effective_queries(three), 2u);
  EXPECT_EQ(code_of([&] { effective_queries(three, 0.0); }), ErrorCode::kConfig);
}

TEST(Metrics, SubgraphError) {
  auto err = [](std::vector<std::uint64_t> est, std::vector<std::uint64_t> truth, Aggregate a) {
    return subgraph_relative_error(est, truth, a);
  };
  EXPECT_DOUBLE_EQ(err({4, 4}, {3, 5}, Aggregate::kSum), 0.0);
  EXPECT_DOUBLE_EQ(err({6, 6}, {3, 3}, Aggregate::kSum), 1.0);
  EXPECT_DOUBLE_EQ(err({5, 9}, {4, 9}, Aggregate::kMin), 0.25);
  EXPECT_DOUBLE_EQ(err({5, 9}, {4, 9}, Aggregate::kAverage), 1.0 / 13.0);
  EXPECT_EQ(code_of([&] { err({1}, {0}, Aggregate::kSum); }), ErrorCode::kUndefinedTruth);
  EXPECT_EQ(code_of([&] { err({1, 2}, {1}, Aggregate::kSum); }), ErrorCode::kMalformedQuery);
}

TEST(VarianceRatio, ZeroLocalVarianceHasNoRatio) {
  const ExactOracle oracle(std::vector<StreamElement>{E("a", "x", 1), E("a", "y", 1),
                                                       E("b", "x", 9), E("b", "y", 9)});
  const auto vr = variance_ratio(oracle);
  EXPECT_DOUBLE_EQ(vr.global_variance, 16.0);
  EXPECT_DOUBLE_EQ(vr.local_variance, 0.0);
  EXPECT_FALSE(vr.ratio);
}

TEST(VarianceRatio, Example) {
  const ExactOracle oracle(std::vector<StreamElement>{E("a", "x", 1), E("a", "y", 3),
                                                       E("b", "x", 9), E("b", "y", 11)});
  const auto vr = variance_ratio(oracle);
  EXPECT_DOUBLE_EQ(vr.global_variance, 17.0);
  EXPECT_DOUBLE_EQ(vr.local_variance, 1.0);
  ASSERT_TRUE(vr.ratio);
  EXPECT_DOUBLE_EQ(*vr.ratio, 17.0);
  EXPECT_EQ(code_of([] { variance_ratio(ExactOracle(std::vector<StreamElement>{E("a", "b")})); }),
            ErrorCode::kInsufficientData);
}

TEST(Oracle, MatchesIndependentCount) {
  Rng rng(6);
  std::vector<StreamElement> stream;
  std::map<std::pair<std::string, std::string>, std::uint64_t> truth;
  for (int i = 0; i < 5000; ++i) {
    const auto s = "s" + std::to_string(rng.below(30)), d = "d" + std::to_string(rng.below(30));
    const auto f = 1 + rng.below(4);
    stream.push_back(E(s, d, f));
    truth[{s, d}] += f;
  }
  const ExactOracle oracle(stream);
  EXPECT_EQ(oracle.distinct_edge_count(), truth.size());
  for (const auto& [k, f] : truth) EXPECT_EQ(oracle.truth(VertexLabel(k.first), VertexLabel(k.second)), f);
  EXPECT_EQ(oracle.truth(VertexLabel("nobody"), VertexLabel("d1")), 0u);
  std::size_t listed = 0;
  for (const auto& src : oracle.sources()) listed += oracle.out_edges(src).size();
  EXPECT_EQ(listed, truth.size());
}

TEST(Rmat, DegenerateQuadrantGivesOneEdge) {
  RmatParams p;
  p.scale = 5;
  p.edge_count = 100;
  p.a = 1.0;
  p.b = p.c = p.d = 0.0;
  const auto stream = generate_rmat_stream(p);
  ASSERT_EQ(stream.size(), 100u);
  for (const auto& e : stream) {
    EXPECT_EQ(e.src.str(), "v0");
    EXPECT_EQ(e.dst.str(), "v0");
    EXPECT_EQ(e.freq, 1u);
  }
}

TEST(Rmat, RejectsBadProbabilities) {
  RmatParams p;
  p.edge_count = 1;
  p.a = 0.5;
  EXPECT_EQ(code_of([&] { generate_rmat_stream(p); }), ErrorCode::kConfig);
  p.a = 0.45;
  p.scale = 0;
  EXPECT_EQ(code_of([&] { generate_rmat_stream(p); }), ErrorCode::kConfig);
}

TEST(Rmat, DeterministicPerSeed) {
  RmatParams p;
  p.scale = 10;
  p.edge_count = 2000;
  p.seed = 3;
  EXPECT_EQ(generate_rmat_stream(p), generate_rmat_stream(p));
  auto q = p;
  q.seed = 4;
  EXPECT_NE(generate_rmat_stream(p), generate_rmat_stream(q));
}

TEST(Rmat, OutDegreeTailIsHeavierThanUniform) {
  RmatParams p;
  p.scale = 12;
  p.edge_count = 40000;
  p.seed = 1;
  std::map<std::string, int> rmat_deg;
  for (const auto& e : generate_rmat_stream(p)) ++rmat_deg[e.src.str()];
  Rng rng(1);
  std::map<std::uint64_t, int> uniform_deg;
  for (std::uint64_t i = 0; i < p.edge_count; ++i) ++uniform_deg[rng.below(1u << p.scale)];
  auto max_of = [](const auto& m) {
    int best = 0;
    for (const auto& [k, v] : m) best = std::max(best, v);
    return best;
  };
  EXPECT_GT(max_of(rmat_deg), 2 * max_of(uniform_deg));
}

TEST(Rmat, FrequencyOverlays) {
  RmatParams p;
  p.scale = 10;
  p.edge_count = 5000;
  p.seed = 9;
  const auto per_source = generate_rmat_stream(p, FrequencyOverlay{});
  std::map<std::string, std::set<std::uint64_t>> weights;
  std::uint64_t max_w = 0;
  for (const auto& e : per_source) {
    weights[e.src.str()].insert(e.freq);
    max_w = std::max(max_w, e.freq);
  }
  for (const auto& [src, w] : weights) EXPECT_EQ(w.size(), 1u) << src;
  EXPECT_LE(max_w, 1024u);
  EXPECT_GT(max_w, 1u);

  FrequencyOverlay arrival;
  arrival.mode = FrequencyOverlay::Mode::kPerArrival;
  arrival.max_weight = 8;
  const auto per_arrival = generate_rmat_stream(p, arrival);
  std::size_t mixed = 0;
  std::map<std::string, std::set<std::uint64_t>> seen;
  for (const auto& e : per_arrival) {
    EXPECT_GE(e.freq, 1u);
    EXPECT_LE(e.freq, 8u);
    seen[e.src.str()].insert(e.freq);
  }
  for (const auto& [src, w] : seen) mixed += w.size() > 1;
  EXPECT_GT(mixed, 0u);
  // The topology does not depend on the overlay.
  const auto plain = generate_rmat_stream(p);
  for (std::size_t i = 0; i < plain.size(); ++i) {
    EXPECT_EQ(plain[i].src, per_source[i].src);
    EXPECT_EQ(plain[i].dst, per_arrival[i].dst);
  }
}

TEST(Zipf, FullSizeTakesEveryEdgeOnce) {
  const auto edges = edges_of(40);
  const auto wl = generate_zipf_workload(edges, 1.5, 40, 2);
  std::set<Edge> distinct;
  for (const auto& e : wl.elements) distinct.emplace(e.src, e.dst);
  EXPECT_EQ(distinct.size(), 40u);
  EXPECT_TRUE(generate_zipf_workload(edges, 1.5, 0, 2).elements.empty());
  EXPECT_EQ(code_of([&] { generate_zipf_workload(edges, 1.5, 41, 2); }),
            ErrorCode::kInsufficientPopulation);
  EXPECT_EQ(code_of([] { zipf_sample_ranks(5, 0.0, 1, 1); }), ErrorCode::kConfig);
}

TEST(Zipf, FirstDrawFollowsRankPowerLaw) {
  constexpr std::size_t n = 20, trials = 20000;
  constexpr double alpha = 1.5;
  std::vector<double> hits(n, 0.0);
  for (std::uint64_t s = 0; s < trials; ++s) hits[zipf_sample_ranks(n, alpha, 3, s)[0]] += 1.0;
  double norm = 0;
  for (std::size_t i = 0; i < n; ++i) norm += std::pow(i + 1.0, -alpha);
  for (std::size_t i = 0; i < n; ++i)
    EXPECT_NEAR(hits[i] / trials, std::pow(i + 1.0, -alpha) / norm, 0.015) << "rank " << i + 1;
}

TEST(Zipf, HigherAlphaConcentratesOnTopRanks) {
  auto top_share = [](double alpha) {
    std::size_t top = 0;
    for (std::uint64_t s = 0; s < 200; ++s)
      for (auto r : zipf_sample_ranks(1000, alpha, 50, s)) top += r < 50;
    return top;
  };
  EXPECT_GT(top_share(2.0), top_share(1.2));
}

TEST(Zipf, InclusionDecreasesWithRank) {
  constexpr std::size_t n = 200;
  std::vector<double> rank(n), inclusion(n, 0.0);
  for (std::size_t i = 0; i < n; ++i) rank[i] = static_cast<double>(i);
  for (std::uint64_t s = 0; s < 200; ++s)
    for (auto r : zipf_sample_ranks(n, 1.5, 40, s)) inclusion[r] += 1.0;
  EXPECT_LT(spearman(rank, inclusion), -0.9);
}

TEST(Zipf, WorkloadAndQueriesShareTheRankOrder) {
  std::vector<StreamElement> stream;
  for (int i = 0; i < 300; ++i) stream.push_back(E("s" + std::to_string(i), "d"));
  const ExactOracle oracle(stream);
  QuerySpec spec;
  spec.kind = QueryKind::kZipfEdges;
  spec.count = 30;
  spec.alpha = 2.0;
  const auto queries = generate_queries(oracle, spec, 5);
  const auto wl = generate_zipf_workload(oracle.distinct_edges(), 2.0, 30, 5);
  std::set<Edge> q(queries.edges.begin(), queries.edges.end()), w;
  for (const auto& e : wl.elements) w.emplace(e.src, e.dst);
  std::size_t overlap = 0;
  for (const auto& e : q) overlap += w.count(e);
  EXPECT_GE(overlap, 10u);
}

TEST(Queries, EmptyAndUniform) {
  const ExactOracle oracle(std::vector<StreamElement>{E("a", "b", 2), E("b", "c")});
  QuerySpec spec;
  EXPECT_EQ(generate_queries(oracle, spec, 1).size(), 0u);
  EXPECT_EQ(generate_queries(ExactOracle{}, spec, 1).size(), 0u);
  spec.count = 50;
  const auto qs = generate_queries(oracle, spec, 1);
  ASSERT_EQ(qs.edges.size(), 50u);
  for (const auto& [s, d] : qs.edges) EXPECT_GT(oracle.truth(s, d), 0u);
  EXPECT_EQ(code_of([&] { generate_queries(ExactOracle{}, spec, 1); }), ErrorCode::kInsufficientData);
}

TEST(Queries, BfsStopsAtComponent) {
  const ExactOracle oracle(std::vector<StreamElement>{E("a", "b"), E("b", "c"), E("c", "a"),
                                                       E("x", "y")});
  Rng rng(1);
  const auto q = bfs_subgraph(oracle, VertexLabel("a"), 10, rng, Aggregate::kSum);
  EXPECT_EQ(q.edges.size(), 3u);
  const auto q2 = bfs_subgraph(oracle, VertexLabel("a"), 2, rng, Aggregate::kMin);
  EXPECT_EQ(q2.edges.size(), 2u);
  EXPECT_EQ(q2.aggregate, Aggregate::kMin);
  EXPECT_EQ(q2.edges[0].first.str(), "a");
}

TEST(Bench, CsvLayout) {
  MetricsReport r;
  r.engine = "gsketch";
  r.budget_bytes = 1024;
  r.avg_relative_error = 0.5;
  r.effective_count = 3;
  r.query_count = 4;
  r.seed = 7;
  EXPECT_EQ(csv_row(r), "gsketch,data,1024,,0.5,3,4,5,0,0,7");
  r.alpha = 1.5;
  r.scenario = Scenario::kDataAndWorkload;
  EXPECT_EQ(csv_row(r), "gsketch,workload,1024,1.5,0.5,3,4,5,0,0,7");
  std::ostringstream os;
  write_csv(os, std::vector<MetricsReport>{r});
  EXPECT_EQ(os.str().substr(0, kCsvHeader.size()), kCsvHeader);
}

TEST(Bench, ErrorFallsAsBudgetGrows) {
  RmatParams p;
  p.scale = 11;
  p.edge_count = 30000;
  p.seed = 2;
  const auto stream = generate_rmat_stream(p, FrequencyOverlay{});
  BenchmarkSpec spec;
  spec.sample_size = 3000;
  spec.budgets = {4096, 65536};
  spec.queries.count = 500;
  spec.seed = 3;
  const auto reports = run_benchmark(stream, spec);
  ASSERT_EQ(reports.size(), 4u);
  EXPECT_EQ(reports[0].engine, "gsketch");
  EXPECT_EQ(reports[1].engine, "global");
  EXPECT_GT(reports[0].avg_relative_error, reports[2].avg_relative_error);
  EXPECT_GT(reports[1].avg_relative_error, reports[3].avg_relative_error);
  for (const auto& r : reports) {
    EXPECT_EQ(r.query_count, 500u);
    EXPECT_GE(r.avg_relative_error, 0.0);
  }
  spec.budgets.clear();
  EXPECT_EQ(code_of([&] { run_benchmark(stream, spec); }), ErrorCode::kConfig);
}

TEST(Bench, WithheldSourcesStayOutOfTheSample) {
  RmatParams p;
  p.scale = 10;
  p.edge_count = 10000;
  const auto stream = generate_rmat_stream(p);
  BenchmarkSpec spec;
  spec.sample_size = 100000;
  spec.withheld_source_fraction = 0.5;
  const auto fx = prepare_benchmark(stream, spec);
  std::set<VertexLabel> sampled;
  for (const auto& e : fx.sample.elements) sampled.insert(e.src);
  const auto all = fx.oracle.sources().size();
  EXPECT_EQ(sampled.size(), all - all / 2);
}
