#pragma once

#include <CLI11.hpp>

#include <climits>
#include <cstdint>
#include <fstream>
#include <functional>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "gsketch/bench.hpp"
#include "gsketch/count_min.hpp"
#include "gsketch/engine.hpp"
#include "gsketch/error.hpp"
#include "gsketch/partitioner.hpp"
#include "gsketch/stream.hpp"

namespace gsketch::cli {

inline std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::kIo, "cannot open " + path + " for reading");
  std::ostringstream ss;
  ss << in.rdbuf();
  if (in.bad()) throw Error(ErrorCode::kIo, "failed reading " + path);
  return ss.str();
}

inline void write_file(const std::string& path, std::string_view content) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorCode::kIo, "cannot open " + path + " for writing");
  out.write(content.data(), static_cast<std::streamsize>(content.size()));
  out.flush();
  if (!out) throw Error(ErrorCode::kIo, "failed writing " + path);
}

inline std::ifstream open_input(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::kIo, "cannot open " + path + " for reading");
  return in;
}

/// Runs f, prefixing any parse error with the file it came from.
template <typename F>
auto with_path(const std::string& path, F&& f) -> decltype(f()) {
  try {
    return f();
  } catch (const Error& e) {
    if (e.code() != ErrorCode::kParse) throw;
    throw Error(ErrorCode::kParse, path + ": " + e.detail());
  }
}

inline std::vector<StreamElement> load_stream(const std::string& path) {
  auto in = open_input(path);
  return with_path(path, [&] { return read_stream(in); });
}

/// Query file: one `src<TAB>dst` pair per line. In subgraph mode, blocks of
/// such lines separated by blank lines form one subgraph each.
struct QueryFile {
  std::vector<Edge> edges;
  std::vector<std::vector<Edge>> subgraphs;
};

inline QueryFile parse_query_file(std::istream& in, bool subgraphs) {
  QueryFile out;
  std::vector<Edge> block;
  std::string line;
  std::size_t line_no = 0;
  auto close_block = [&] {
    if (!block.empty()) out.subgraphs.push_back(std::move(block));
    block.clear();
  };
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) {
      if (subgraphs) close_block();
      continue;
    }
    const auto fields = detail::split_tabs(line);
    if (fields.size() != 2)
      throw Error(ErrorCode::kParse, "line " + std::to_string(line_no) +
                                         ": expected src<TAB>dst, got " +
                                         std::to_string(fields.size()) + " fields");
    Edge e{detail::parse_label(fields[0], line_no), detail::parse_label(fields[1], line_no)};
    (subgraphs ? block : out.edges).push_back(std::move(e));
  }
  close_block();
  return out;
}

struct Sizing {
  std::optional<std::uint64_t> budget_bytes;
  std::uint64_t depth = 5;
  std::optional<double> epsilon;
  std::optional<double> delta;
  bool depth_given = false;

  void add_to(CLI::App& app) {
    app.add_option("--budget-bytes", budget_bytes, "Byte budget for all sketches (8-byte counters)");
    app.add_option("--depth", depth, "Sketch depth d (budget mode)")
        ->each([this](const std::string&) { depth_given = true; });
    app.add_option("--epsilon", epsilon, "Error factor: width = ceil(e / epsilon)");
    app.add_option("--delta", delta, "Failure probability: depth = ceil(ln(1 / delta))");
  }

  SketchDims resolve() const {
    const bool error_mode = epsilon || delta;
    if (error_mode && budget_bytes)
      throw Error(ErrorCode::kConfig, "use either --budget-bytes/--depth or --epsilon/--delta");
    if (error_mode) {
      if (!epsilon || !delta)
        throw Error(ErrorCode::kConfig, "--epsilon and --delta must be given together");
      if (depth_given) throw Error(ErrorCode::kConfig, "--depth is implied by --delta");
      return dims_for_error(*epsilon, *delta);
    }
    if (!budget_bytes)
      throw Error(ErrorCode::kConfig, "sizing needs --budget-bytes (or --epsilon and --delta)");
    return {width_for_budget(*budget_bytes, depth), depth};
  }
};

inline std::vector<double> parse_double_list(const std::string& text, const char* what) {
  std::vector<double> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    try {
      std::size_t used = 0;
      out.push_back(std::stod(item, &used));
      if (used != item.size()) throw std::invalid_argument(item);
    } catch (const std::exception&) {
      throw Error(ErrorCode::kConfig, std::string("bad ") + what + " entry '" + item + "'");
    }
  }
  if (out.empty()) throw Error(ErrorCode::kConfig, std::string("empty ") + what + " list");
  return out;
}

inline void print_plan_summary(std::ostream& out, const PartitionPlan& plan) {
  std::size_t by_reason[3] = {0, 0, 0};
  for (const auto& l : plan.leaves) ++by_reason[static_cast<int>(l.reason)];
  out << "scenario\t" << scenario_name(plan.config.scenario) << '\n'
      << "depth\t" << plan.depth << '\n'
      << "total_width\t" << plan.config.total_width << '\n'
      << "leaves\t" << plan.leaves.size() << '\n'
      << "leaf_width\t" << plan.leaf_width_sum() << '\n'
      << "outlier_width\t" << plan.outlier_width << '\n'
      << "used_width\t" << plan.used_width() << '\n'
      << "routed_vertices\t" << plan.routing.size() << '\n';
  for (auto r : {LeafReason::kMinWidth, LeafReason::kCollisionBound, LeafReason::kUnsplittable})
    out << "leaves_" << leaf_reason_name(r) << '\t' << by_reason[static_cast<int>(r)] << '\n';
}

class Command {
 public:
  Command(std::ostream& out, std::ostream& err) : out_(out), err_(err) {}

  int run(int argc, const char* const* argv) {
    CLI::App app{"Partitioned CountMin sketches for graph streams", "gsketch"};
    app.require_subcommand(1);
    app.set_version_flag("--version", "gsketch 1.0");
    setup_generate(app);
    setup_plan(app);
    setup_ingest(app);
    setup_query(app);
    setup_bench(app);
    setup_inspect(app);
    try {
      app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
      return app.exit(e, out_, err_);
    }
    try {
      action_();
      return 0;
    } catch (const Error& e) {
      err_ << "error: " << e.what() << '\n';
    } catch (const std::exception& e) {
      err_ << "error: " << e.what() << '\n';
    }
    return 1;
  }

 private:
  // --- generate ------------------------------------------------------------
  struct GenerateArgs {
    std::string out;
    RmatParams rmat;
    std::optional<double> weight_alpha;
    std::string weight_mode = "source";
    std::uint64_t max_weight = 1024;
    std::string workload_from;
    double alpha = 1.5;
    std::size_t size = 0;
    std::uint64_t seed = 0;
  } gen_;

  void setup_generate(CLI::App& app) {
    auto* cmd = app.add_subcommand("generate", "Write a synthetic R-MAT stream or a Zipf workload");
    cmd->add_option("-o,--out", gen_.out, "Output stream file")->required();
    cmd->add_option("--scale", gen_.rmat.scale, "log2 of the vertex count")->capture_default_str();
    cmd->add_option("--edges", gen_.rmat.edge_count, "Number of arrivals");
    cmd->add_option("--a", gen_.rmat.a)->capture_default_str();
    cmd->add_option("--b", gen_.rmat.b)->capture_default_str();
    cmd->add_option("--c", gen_.rmat.c)->capture_default_str();
    cmd->add_option("--d", gen_.rmat.d)->capture_default_str();
    cmd->add_option("--weight-alpha", gen_.weight_alpha,
                    "Attach Zipf(alpha) frequency weights to the arrivals");
    cmd->add_option("--weight-mode", gen_.weight_mode,
                    "source: one weight per source vertex; arrival: one per arrival")
        ->capture_default_str();
    cmd->add_option("--max-weight", gen_.max_weight, "Largest weight")->capture_default_str();
    auto* from = cmd->add_option("--workload-from", gen_.workload_from,
                                 "Instead of R-MAT, Zipf-sample the distinct edges of this stream");
    cmd->add_option("--alpha", gen_.alpha, "Workload Zipf skew")->capture_default_str();
    cmd->add_option("--size", gen_.size, "Workload size")->needs(from);
    cmd->add_option("--seed", gen_.seed)->capture_default_str();
    cmd->callback([this] { action_ = [this] { do_generate(); }; });
  }

  void do_generate() {
    std::vector<StreamElement> stream;
    if (!gen_.workload_from.empty()) {
      const ExactOracle oracle(load_stream(gen_.workload_from));
      stream = generate_zipf_workload(oracle.distinct_edges(), gen_.alpha, gen_.size, gen_.seed)
                   .elements;
    } else {
      gen_.rmat.seed = gen_.seed;
      std::optional<FrequencyOverlay> overlay;
      if (gen_.weight_alpha) {
        if (gen_.weight_mode != "source" && gen_.weight_mode != "arrival")
          throw Error(ErrorCode::kConfig, "--weight-mode must be source or arrival");
        overlay = FrequencyOverlay{*gen_.weight_alpha, gen_.max_weight,
                                   gen_.weight_mode == "source"
                                       ? FrequencyOverlay::Mode::kPerSource
                                       : FrequencyOverlay::Mode::kPerArrival};
      }
      stream = generate_rmat_stream(gen_.rmat, overlay);
    }
    std::ostringstream text;
    write_stream(text, stream);
    write_file(gen_.out, text.str());
    out_ << "elements\t" << stream.size() << '\n';
  }

  // --- plan ----------------------------------------------------------------
  struct PlanArgs {
    std::string stream, out, workload;
    std::size_t sample_size = 0;
    Sizing sizing;
    std::uint64_t w0 = 64;
    double c = 0.5;
    double outlier_fraction = 0.1;
    std::string scenario = "data";
    std::uint64_t seed = 0;
  } plan_;

  void setup_plan(CLI::App& app) {
    auto* cmd = app.add_subcommand("plan", "Sample a stream and write a partitioning plan");
    cmd->add_option("-s,--stream", plan_.stream)->required();
    cmd->add_option("-o,--out", plan_.out, "Plan JSON file")->required();
    cmd->add_option("--sample-size", plan_.sample_size, "Reservoir size")->required();
    plan_.sizing.add_to(*cmd);
    cmd->add_option("--w0", plan_.w0, "Minimum width of a split node")->capture_default_str();
    cmd->add_option("--C", plan_.c, "Collision bound constant")->capture_default_str();
    cmd->add_option("--outlier-fraction", plan_.outlier_fraction)->capture_default_str();
    cmd->add_option("--scenario", plan_.scenario, "data or workload")->capture_default_str();
    cmd->add_option("--workload", plan_.workload, "Workload sample (stream format)");
    cmd->add_option("--seed", plan_.seed)->capture_default_str();
    cmd->callback([this] { action_ = [this] { do_plan(); }; });
  }

  void do_plan() {
    PartitionConfig config;
    const SketchDims dims = plan_.sizing.resolve();
    config.total_width = dims.width;
    config.depth = dims.depth;
    config.w0 = plan_.w0;
    config.collision_bound = plan_.c;
    config.outlier_fraction = plan_.outlier_fraction;
    config.scenario = parse_scenario(plan_.scenario);
    config.validate();
    const bool workload = config.scenario == Scenario::kDataAndWorkload;
    if (workload && plan_.workload.empty())
      throw Error(ErrorCode::kConfig, "scenario workload requires --workload");
    if (!workload && !plan_.workload.empty())
      throw Error(ErrorCode::kConfig, "--workload is only used with --scenario workload");
    if (plan_.sample_size == 0) throw Error(ErrorCode::kConfig, "sample size must be positive");

    Reservoir reservoir(plan_.sample_size, derive_seed(plan_.seed, "sample"));
    {
      auto in = open_input(plan_.stream);
      with_path(plan_.stream,
                [&] { for_each_stream_element(in, [&](StreamElement e) { reservoir.offer(e); }); });
    }
    const DataSample sample = std::move(reservoir).take();
    WorkloadWeights weights;
    if (workload) {
      DataSample wl;
      wl.elements = load_stream(plan_.workload);
      wl.capacity = wl.elements.size();
      const auto known = source_vertices(compute_vertex_stats(sample));
      if (!known.empty()) weights = compute_workload_weights(wl, known);
    }
    const PartitionPlan plan = build_plan(sample, config, workload ? &weights : nullptr);
    write_file(plan_.out, plan.dump());
    out_ << "dims\twidth=" << dims.width << "\tdepth=" << dims.depth << '\n';
    out_ << "sample\t" << sample.elements.size() << '\n';
    print_plan_summary(out_, plan);
  }

  // --- ingest --------------------------------------------------------------
  struct IngestArgs {
    std::string plan, stream, out;
    bool with_global = false;
    std::uint64_t seed = 0;
  } ingest_;

  void setup_ingest(CLI::App& app) {
    auto* cmd = app.add_subcommand("ingest", "Populate the sketches of a plan from a stream");
    cmd->add_option("-p,--plan", ingest_.plan)->required();
    cmd->add_option("-s,--stream", ingest_.stream)->required();
    cmd->add_option("-o,--out", ingest_.out, "Snapshot file")->required();
    cmd->add_flag("--with-global", ingest_.with_global,
                  "Also build a single global sketch of the same total size");
    cmd->add_option("--seed", ingest_.seed)->capture_default_str();
    cmd->callback([this] { action_ = [this] { do_ingest(); }; });
  }

  void do_ingest() {
    auto plan = with_path(ingest_.plan, [&] { return PartitionPlan::parse(read_file(ingest_.plan)); });
    const std::uint64_t total_width = plan.config.total_width;
    const std::uint64_t depth = plan.depth;
    auto engine = GSketchEngine::build(std::move(plan), derive_seed(ingest_.seed, "engine"));
    std::optional<GlobalSketchEngine> global;
    if (ingest_.with_global) {
      if (total_width == 0) throw Error(ErrorCode::kPlanInvalid, "plan records no total width");
      global.emplace(total_width * depth * sizeof(std::uint64_t), depth,
                     derive_seed(ingest_.seed, "engine"));
    }
    {
      auto in = open_input(ingest_.stream);
      with_path(ingest_.stream, [&] {
        for_each_stream_element(in, [&](const StreamElement& e) {
          engine.ingest(e);
          if (global) global->ingest(e);
        });
      });
    }
    engine.freeze();
    if (global) global->freeze();
    write_file(ingest_.out, SnapshotCodec::encode(engine, global ? &*global : nullptr));
    out_ << "ingested_mass\t" << engine.ingested_mass() << '\n';
    out_ << "memory_bytes\t" << engine.memory_bytes() << '\n';
    if (global) out_ << "global_memory_bytes\t" << global->sketch().dims().bytes() << '\n';
  }

  // --- query ---------------------------------------------------------------
  struct QueryArgs {
    std::string snapshot, queries, aggregate = "sum", engine = "gsketch";
    bool subgraphs = false;
    std::vector<std::vector<std::string>> inline_edges;
  } query_;

  void setup_query(CLI::App& app) {
    auto* cmd = app.add_subcommand("query", "Estimate edge or subgraph frequencies");
    cmd->add_option("--snapshot", query_.snapshot)->required();
    cmd->add_option("-q,--queries", query_.queries, "Query file");
    cmd->add_flag("--subgraphs", query_.subgraphs,
                  "Read the query file as blank-line separated subgraphs");
    cmd->add_option("-e,--edge", query_.inline_edges, "Inline edge query: SRC DST")
        ->expected(2)
        ->allow_extra_args(false);
    cmd->add_option("--aggregate", query_.aggregate, "sum, min or average")
        ->capture_default_str();
    cmd->add_option("--engine", query_.engine, "gsketch or global")->capture_default_str();
    cmd->callback([this] { action_ = [this] { do_query(); }; });
  }

  void do_query() {
    const Aggregate aggregate = parse_aggregate(query_.aggregate);
    if (query_.engine != "gsketch" && query_.engine != "global")
      throw Error(ErrorCode::kConfig, "--engine must be gsketch or global");
    if (query_.queries.empty() && query_.inline_edges.empty())
      throw Error(ErrorCode::kConfig, "give --queries FILE or at least one --edge SRC DST");
    if (query_.subgraphs && query_.queries.empty())
      throw Error(ErrorCode::kConfig, "--subgraphs needs --queries FILE");

    const auto snapshot = with_path(query_.snapshot,
                                    [&] { return SnapshotCodec::decode(read_file(query_.snapshot)); });
    const bool use_global = query_.engine == "global";
    if (use_global && !snapshot.global)
      throw Error(ErrorCode::kConfig, "snapshot has no global sketch (ingest --with-global)");
    auto estimate_edge = [&](const Edge& e) {
      return use_global ? snapshot.global->estimate_edge(e.first, e.second)
                        : snapshot.engine.estimate_edge(e.first, e.second);
    };

    QueryFile file;
    if (!query_.queries.empty()) {
      auto in = open_input(query_.queries);
      file = with_path(query_.queries, [&] { return parse_query_file(in, query_.subgraphs); });
    }
    for (const auto& pair : query_.inline_edges)
      file.edges.emplace_back(VertexLabel(pair.at(0)), VertexLabel(pair.at(1)));

    for (const auto& e : file.edges)
      out_ << e.first << '\t' << e.second << '\t' << estimate_edge(e) << '\n';
    for (std::size_t i = 0; i < file.subgraphs.size(); ++i) {
      SubgraphQuery q{file.subgraphs[i], aggregate};
      const Ratio r = use_global ? snapshot.global->estimate_subgraph(q)
                                 : snapshot.engine.estimate_subgraph(q);
      out_ << i << '\t' << aggregate_name(aggregate) << '\t' << to_string(r) << '\n';
    }
  }

  // --- bench ---------------------------------------------------------------
  struct BenchArgs {
    std::string stream, out, budgets, alpha_sweep, scenario = "data", queries = "uniform",
                                                   aggregate = "sum";
    BenchmarkSpec spec;
    bool no_global = false;
  } bench_;

  void setup_bench(CLI::App& app) {
    auto& s = bench_.spec;
    s.sample_size = 0;
    s.queries.count = 2000;
    auto* cmd = app.add_subcommand("bench", "Compare gSketch with a global sketch; CSV output");
    cmd->add_option("-s,--stream", bench_.stream)->required();
    cmd->add_option("-o,--out", bench_.out, "CSV file (default: standard output)");
    cmd->add_option("--budgets", bench_.budgets, "Comma separated byte budgets")->required();
    cmd->add_option("--depth", s.depth)->capture_default_str();
    cmd->add_option("--sample-size", s.sample_size)->required();
    cmd->add_option("--w0", s.w0)->capture_default_str();
    cmd->add_option("--C", s.collision_bound)->capture_default_str();
    cmd->add_option("--outlier-fraction", s.outlier_fraction)->capture_default_str();
    cmd->add_option("--scenario", bench_.scenario, "data or workload")->capture_default_str();
    cmd->add_option("--alpha", s.workload_alpha, "Zipf skew of workload and zipf queries")
        ->capture_default_str();
    cmd->add_option("--alpha-sweep", bench_.alpha_sweep, "Comma separated alphas, one run each");
    cmd->add_option("--workload-size", s.workload_size, "Zipf workload sample size");
    cmd->add_option("--queries", bench_.queries, "uniform, zipf or bfs")->capture_default_str();
    cmd->add_option("--query-count", s.queries.count)->capture_default_str();
    cmd->add_option("--subgraph-edges", s.queries.subgraph_edges)->capture_default_str();
    cmd->add_option("--aggregate", bench_.aggregate, "sum, min or average")->capture_default_str();
    cmd->add_option("--g0", s.g0, "Effective-query threshold")->capture_default_str();
    cmd->add_option("--withhold", s.withheld_source_fraction,
                    "Fraction of source vertices kept out of the sample");
    cmd->add_flag("--no-global", bench_.no_global, "Skip the global sketch baseline");
    cmd->add_option("--seed", s.seed)->capture_default_str();
    cmd->callback([this] { action_ = [this] { do_bench(); }; });
  }

  void do_bench() {
    auto spec = bench_.spec;
    spec.scenario = parse_scenario(bench_.scenario);
    spec.queries.kind = parse_query_kind(bench_.queries);
    spec.queries.aggregate = parse_aggregate(bench_.aggregate);
    spec.include_global = !bench_.no_global;
    for (double b : parse_double_list(bench_.budgets, "budget")) {
      if (!(b >= 1.0) || b != static_cast<double>(static_cast<std::uint64_t>(b)))
        throw Error(ErrorCode::kConfig, "budgets must be positive integers");
      spec.budgets.push_back(static_cast<std::uint64_t>(b));
    }
    if (spec.scenario == Scenario::kDataAndWorkload && spec.workload_size == 0)
      throw Error(ErrorCode::kConfig, "scenario workload requires --workload-size");

    std::vector<double> alphas{spec.workload_alpha};
    if (!bench_.alpha_sweep.empty()) alphas = parse_double_list(bench_.alpha_sweep, "alpha");

    const auto stream = load_stream(bench_.stream);
    std::vector<MetricsReport> reports;
    for (double alpha : alphas) {
      spec.workload_alpha = alpha;
      spec.queries.alpha = alpha;
      auto part = run_benchmark(stream, spec);
      reports.insert(reports.end(), part.begin(), part.end());
    }
    if (bench_.out.empty()) {
      write_csv(out_, reports);
    } else {
      std::ostringstream csv;
      write_csv(csv, reports);
      write_file(bench_.out, csv.str());
      out_ << "rows\t" << reports.size() << '\n';
    }
  }

  // --- inspect -------------------------------------------------------------
  std::string inspect_path_;

  void setup_inspect(CLI::App& app) {
    auto* cmd = app.add_subcommand("inspect", "Summarize a plan or snapshot file");
    cmd->add_option("path", inspect_path_)->required();
    cmd->callback([this] { action_ = [this] { do_inspect(); }; });
  }

  void do_inspect() {
    const std::string data = read_file(inspect_path_);
    if (data.rfind(SnapshotCodec::kMagic, 0) == 0) {
      const auto snap = with_path(inspect_path_, [&] { return SnapshotCodec::decode(data); });
      out_ << "kind\tsnapshot\n";
      print_plan_summary(out_, snap.engine.plan());
      out_ << "frozen\t" << (snap.engine.frozen() ? "yes" : "no") << '\n'
           << "ingested_mass\t" << snap.engine.ingested_mass() << '\n'
           << "outlier_mass\t" << snap.engine.outlier().total_mass() << '\n'
           << "memory_bytes\t" << snap.engine.memory_bytes() << '\n';
      if (snap.global)
        out_ << "global\twidth=" << snap.global->sketch().width()
             << "\tdepth=" << snap.global->sketch().depth() << '\n';
      for (const auto& leaf : snap.engine.plan().leaves)
        out_ << "leaf\t" << leaf.id << "\twidth=" << leaf.width << "\treason="
             << leaf_reason_name(leaf.reason) << "\tvertices=" << leaf.vertices.size()
             << "\tmass=" << snap.engine.leaf_sketches()[leaf.id].total_mass() << '\n';
      return;
    }
    const auto plan = with_path(inspect_path_, [&] { return PartitionPlan::parse(data); });
    out_ << "kind\tplan\n";
    print_plan_summary(out_, plan);
    for (const auto& leaf : plan.leaves)
      out_ << "leaf\t" << leaf.id << "\twidth=" << leaf.width << "\treason="
           << leaf_reason_name(leaf.reason) << "\tvertices=" << leaf.vertices.size() << '\n';
  }

  std::ostream& out_;
  std::ostream& err_;
  std::function<void()> action_;
};

/// Entry point shared by the executable and the tests.
inline int run(int argc, const char* const* argv, std::ostream& out = std::cout,
               std::ostream& err = std::cerr) {
  return Command(out, err).run(argc, argv);
}

}  // namespace gsketch::cli
