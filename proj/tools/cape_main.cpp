// cape: command-line front end.
//
// Exit codes: 0 success, 1 gradcheck above --tol, 2 bad arguments or
// unreadable input, 3 shape mismatch, 4 mask disconnection, 5 any other
// failure (unreachable node pair, divergence, ...).

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>

#include "CLI11.hpp"
#include "json.hpp"

#include "cape/bridge.hpp"
#include "cape/cape_loss.hpp"
#include "cape/error.hpp"
#include "cape/io.hpp"
#include "cape/metrics.hpp"
#include "cape/optimize.hpp"
#include "cape/parallel.hpp"
#include "cape/skeleton.hpp"
#include "cape/synth.hpp"

namespace fs = std::filesystem;
using nlohmann::ordered_json;

namespace {

struct Globals {
  std::uint64_t seed = 0;
  unsigned threads = 0;
  std::string format = "text";
  bool verbose = false;
};

struct CapeFlags {
  int window_radius = 3;
  double dilation_radius = 10.0;
  double exponent = 2.0;
  bool no_mask = false;

  void add(CLI::App* app) {
    app->add_option("--window-radius", window_radius, "Projection window half-size")->capture_default_str();
    app->add_option("--dilation-radius", dilation_radius, "Corridor radius")->capture_default_str();
    app->add_option("--exponent", exponent, "Cost exponent p in pred^p")->capture_default_str();
    app->add_flag("--no-mask", no_mask, "Search the whole grid instead of the corridor");
  }

  cape::CapeConfig config(const Globals& g) const {
    cape::CapeConfig c;
    c.window_radius = window_radius;
    c.dilation_radius = dilation_radius;
    c.cost_exponent = exponent;
    c.mask_paths = !no_mask;
    c.seed = g.seed;
    c.threads = g.threads;
    c.validate();
    return c;
  }
};

ordered_json to_json(const cape::CapeConfig& c) {
  return {{"window_radius", c.window_radius}, {"dilation_radius", c.dilation_radius},
          {"cost_exponent", c.cost_exponent}, {"alpha", c.alpha},
          {"seed", c.seed},                   {"mask_paths", c.mask_paths},
          {"threads", cape::resolve_threads(c.threads)}};
}

ordered_json to_json(const cape::PathMetricConfig& c) {
  return {{"snap_radius", c.snap_radius},
          {"num_pairs", c.num_pairs},
          {"seed", c.seed},
          {"tlts_tolerance", c.tlts_tolerance}};
}

ordered_json index_json(const cape::GridIndex& g, int ndim) {
  if (ndim == 3) return {g.z, g.y, g.x};
  return {g.y, g.x};
}

void print_config(const Globals& g, const std::string& cmd, const ordered_json& cfg) {
  if (!g.verbose) return;
  ordered_json j{{"command", cmd}, {"format", g.format}, {"config", cfg}};
  std::cerr << j.dump(2) << "\n";
}

std::string fmt(double v, const char* spec = "%.6f") {
  char buf[64];
  std::snprintf(buf, sizeof buf, spec, v);
  return buf;
}

void require_same_shape(const cape::Shape& a, const cape::Shape& b, const std::string& what) {
  if (a != b) {
    throw cape::Error(cape::ErrorKind::shape_mismatch,
                      what + ": " + cape::to_string(a) + " vs " + cape::to_string(b));
  }
}

// loss / grad -----------------------------------------------------------

struct LossCmd {
  std::string graph, pred, grad_out;
  CapeFlags cape;
};

int run_loss(const Globals& g, const LossCmd& cmd, const std::string& name) {
  const auto cfg = cmd.cape.config(g);
  ordered_json shown = to_json(cfg);
  shown["grad_out"] = cmd.grad_out;
  print_config(g, name, shown);
  const auto graph = cape::read_graph(cmd.graph);
  const auto pred = cape::read_cgrd(fs::path(cmd.pred));
  graph.require_within(pred.shape());
  const auto r = cape::cape_forward(graph, pred, cfg);
  if (!cmd.grad_out.empty()) cape::write_cgrd(fs::path(cmd.grad_out), r.gradient);

  if (g.format == "json") {
    ordered_json j;
    j["total"] = r.total_loss;
    auto rows = ordered_json::array();
    for (const auto& rec : r.records) {
      rows.push_back({{"v1", rec.v1},
                      {"v2", rec.v2},
                      {"v1_projected", index_json(rec.v1_projected, pred.shape().ndim())},
                      {"v2_projected", index_json(rec.v2_projected, pred.shape().ndim())},
                      {"graph_length", rec.graph_path.length},
                      {"pixels", rec.pixel_path.cells.size()},
                      {"cost", rec.loss}});
    }
    j["paths"] = rows;
    std::cout << j.dump(2) << "\n";
  } else {
    std::cout << "total " << fmt(r.total_loss) << "\n";
    std::cout << "v1\tv2\tcost\n";
    for (const auto& rec : r.records) std::cout << rec.v1 << "\t" << rec.v2 << "\t" << fmt(rec.loss) << "\n";
  }
  return 0;
}

// metrics ---------------------------------------------------------------

struct MetricsCmd {
  std::string graph, mask, pred;
  cape::MetricConfig cfg;
};

int run_metrics(const Globals& g, MetricsCmd cmd) {
  cmd.cfg.path.seed = g.seed;
  ordered_json shown = to_json(cmd.cfg.path);
  shown["threshold"] = cmd.cfg.threshold;
  shown["ccq_tolerance"] = cmd.cfg.ccq_tolerance;
  print_config(g, "metrics", shown);
  const auto graph = cape::read_graph(cmd.graph);
  const auto mask = cape::read_cgrd_mask(cmd.mask);
  const auto pred = cape::read_cgrd(fs::path(cmd.pred));
  require_same_shape(mask.shape(), pred.shape(), "ground-truth mask vs prediction");
  graph.require_within(pred.shape());
  const auto report = cape::evaluate(graph, mask, pred, cmd.cfg);
  if (g.format == "json") {
    std::cout << cape::report_to_json(report) << "\n";
  } else {
    std::cout << "correctness  " << fmt(100.0 * report.ccq.correctness, "%.1f") << "\n"
              << "completeness " << fmt(100.0 * report.ccq.completeness, "%.1f") << "\n"
              << "quality      " << fmt(100.0 * report.ccq.quality, "%.1f") << "\n"
              << "dice         " << fmt(100.0 * report.dice, "%.1f") << "\n"
              << "apls         " << fmt(100.0 * report.paths.apls, "%.1f") << "\n"
              << "tlts         " << fmt(100.0 * report.paths.tlts, "%.1f") << "\n"
              << "pairs        " << report.paths.pairs << " (" << report.paths.missing << " missing)\n";
  }
  return 0;
}

// synth -----------------------------------------------------------------

struct SynthCmd {
  std::string out;
  std::vector<std::size_t> shape{128, 128};
  cape::SynthConfig cfg;
  bool preview = false;
};

int run_synth(const Globals& g, SynthCmd cmd) {
  cmd.cfg.seed = g.seed;
  cmd.cfg.shape = cmd.shape;
  ordered_json shown{{"out", cmd.out},
                     {"shape", cmd.cfg.shape},
                     {"seed", cmd.cfg.seed},
                     {"n_curves", cmd.cfg.n_curves},
                     {"loop_prob", cmd.cfg.loop_prob},
                     {"n_gaps", cmd.cfg.n_gaps},
                     {"gap_len", cmd.cfg.gap_len},
                     {"gap_value", cmd.cfg.gap_value},
                     {"d_max", cmd.cfg.d_max}};
  print_config(g, "synth", shown);
  if (cmd.shape.size() != 2 && cmd.shape.size() != 3) {
    throw cape::Error(cape::ErrorKind::invalid_argument, "--shape needs 2 or 3 extents");
  }
  const auto sample = cape::make_sample(cmd.cfg);
  cape::write_sample(cmd.out, sample, cmd.cfg);
  if (cmd.preview && sample.gt_map.shape().ndim() == 2) {
    cape::write_pgm(fs::path(cmd.out) / "gt_map.pgm", sample.gt_map);
    cape::write_pgm(fs::path(cmd.out) / "corrupted.pgm", sample.corrupted_map);
  }
  if (g.format == "json") {
    ordered_json j{{"dir", cmd.out},
                   {"nodes", sample.graph.node_count()},
                   {"edges", sample.graph.edge_count()},
                   {"foreground", sample.gt_mask.count()},
                   {"gaps", sample.corruption_log.size()}};
    std::cout << j.dump(2) << "\n";
  } else {
    std::cout << "wrote " << cmd.out << ": " << sample.graph.node_count() << " nodes, " << sample.graph.edge_count()
              << " edges, " << sample.corruption_log.size() << " gaps\n";
  }
  return 0;
}

// repair ----------------------------------------------------------------

struct RepairCmd {
  std::string dir, out, trace, preview;
  cape::RepairConfig cfg;
  CapeFlags cape;
};

int run_repair(const Globals& g, RepairCmd cmd) {
  auto ccfg = cmd.cape.config(g);
  ccfg.alpha = cmd.cfg.alpha;
  cmd.cfg.metric.seed = g.seed;
  const fs::path dir(cmd.dir);
  const fs::path out = cmd.out.empty() ? dir / "repaired.cgrd" : fs::path(cmd.out);
  const fs::path trace_path = cmd.trace.empty() ? dir / "trace.csv" : fs::path(cmd.trace);
  ordered_json shown{{"sample", cmd.dir},
                     {"out", out.string()},
                     {"trace", trace_path.string()},
                     {"steps", cmd.cfg.steps},
                     {"learning_rate", cmd.cfg.learning_rate},
                     {"alpha", cmd.cfg.alpha},
                     {"beta", cmd.cfg.prox_weight},
                     {"clamp_min", cmd.cfg.clamp_min},
                     {"resample_paths_every", cmd.cfg.resample_paths_every},
                     {"threshold", cmd.cfg.threshold},
                     {"cape", to_json(ccfg)},
                     {"metric", to_json(cmd.cfg.metric)}};
  print_config(g, "repair", shown);

  const auto sample = cape::read_sample(dir);
  const auto [final_map, trace] = cape::repair(sample, cmd.cfg, ccfg);
  cape::write_cgrd(out, final_map);
  std::ostringstream csv;
  csv << "step,total,cape,apls\n";
  for (std::size_t i = 0; i < trace.size(); ++i) {
    csv << i << "," << fmt(trace[i].total, "%.9g") << "," << fmt(trace[i].cape, "%.9g") << ","
        << fmt(trace[i].apls, "%.6f") << "\n";
  }
  cape::write_text(trace_path, csv.str());
  if (!cmd.preview.empty()) cape::write_pgm(cmd.preview, final_map);

  const auto& first = trace.front();
  const auto& last = trace.back();
  if (g.format == "json") {
    ordered_json j{{"out", out.string()},
                   {"trace", trace_path.string()},
                   {"initial", {{"total", first.total}, {"cape", first.cape}, {"apls", first.apls}}},
                   {"final", {{"total", last.total}, {"cape", last.cape}, {"apls", last.apls}}}};
    std::cout << j.dump(2) << "\n";
  } else {
    std::cout << "# objective: beta*|y - y_corrupted|^2 + alpha*cape(y). The proximity term stands in for the\n"
                 "# pixel-wise loss; pulling towards the clean map instead would repair the gap on its own.\n";
    std::cout << "cape  " << fmt(first.cape) << " -> " << fmt(last.cape) << "\n";
    std::cout << "apls  " << fmt(first.apls, "%.4f") << " -> " << fmt(last.apls, "%.4f") << "\n";
    std::cout << "wrote " << out.string() << " and " << trace_path.string() << "\n";
  }
  return 0;
}

// gradcheck -------------------------------------------------------------

struct GradcheckCmd {
  std::string graph, pred;
  double h = 1e-3;
  std::size_t n_cells = 50;
  double tol = 1e-3;
  CapeFlags cape;
};

int run_gradcheck(const Globals& g, const GradcheckCmd& cmd) {
  const auto cfg = cmd.cape.config(g);
  ordered_json shown = to_json(cfg);
  shown["h"] = cmd.h;
  shown["n_cells"] = cmd.n_cells;
  shown["tol"] = cmd.tol;
  print_config(g, "gradcheck", shown);
  const auto graph = cape::read_graph(cmd.graph);
  const auto pred = cape::read_cgrd(fs::path(cmd.pred));
  graph.require_within(pred.shape());
  const auto r = cape::finite_diff_check(graph, pred, cfg, cmd.h, cmd.n_cells);
  const bool ok = r.max_rel_error < cmd.tol;
  if (g.format == "json") {
    ordered_json j{{"max_rel_error", r.max_rel_error},
                   {"checked", r.checked},
                   {"skipped", r.skipped},
                   {"tol", cmd.tol},
                   {"pass", ok}};
    std::cout << j.dump(2) << "\n";
  } else {
    std::cout << "max relative error " << fmt(r.max_rel_error, "%.3e") << " over " << r.checked << " cells ("
              << r.skipped << " skipped): " << (ok ? "ok" : "FAIL") << "\n";
  }
  return ok ? 0 : 1;
}

// extract-graph ---------------------------------------------------------

struct ExtractCmd {
  std::string input, out;
  bool mask = false;
  double threshold = cape::kDefaultPredictionThreshold;
  std::size_t max_chain = 8;
};

int run_extract(const Globals& g, const ExtractCmd& cmd) {
  print_config(g, "extract-graph",
               {{"input", cmd.input}, {"mask", cmd.mask}, {"threshold", cmd.threshold}, {"max_chain", cmd.max_chain}});
  cape::GroundTruthGraph graph;
  if (cmd.mask) {
    graph = cape::with_euclidean_weights(cape::graph_from_mask(cape::read_cgrd_mask(cmd.input), cmd.max_chain));
  } else {
    graph = cape::graph_from_prediction(cape::read_cgrd(fs::path(cmd.input)), cmd.threshold);
  }
  if (cmd.out.empty()) {
    std::cout << cape::graph_to_json(graph) << "\n";
  } else {
    cape::write_graph(cmd.out, graph);
    if (g.format == "json") {
      std::cout << ordered_json{{"out", cmd.out}, {"nodes", graph.node_count()}, {"edges", graph.edge_count()}}.dump(2)
                << "\n";
    } else {
      std::cout << "wrote " << cmd.out << ": " << graph.node_count() << " nodes, " << graph.edge_count()
                << " edges\n";
    }
  }
  return 0;
}

int exit_code(cape::ErrorKind k) {
  switch (k) {
    case cape::ErrorKind::invalid_argument:
    case cape::ErrorKind::parse:
    case cape::ErrorKind::out_of_bounds:
    case cape::ErrorKind::unsupported_dimensionality:
      return 2;
    case cape::ErrorKind::shape_mismatch:
      return 3;
    case cape::ErrorKind::mask_disconnection:
      return 4;
    default:
      return 5;
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Connectivity-aware path loss for distance-map predictions"};
  app.require_subcommand(1);
  Globals g;
  app.add_option("--seed", g.seed, "Random seed")->capture_default_str();
  app.add_option("--threads", g.threads, "Worker threads (0: all available)")->capture_default_str();
  app.add_option("--format", g.format, "Output format")->check(CLI::IsMember({"json", "text"}))->capture_default_str();
  app.add_flag("-v,--verbose", g.verbose, "Print the resolved configuration to stderr");

  std::function<int()> action;

  LossCmd loss;
  auto* loss_app = app.add_subcommand("loss", "Path loss of a prediction against a graph");
  loss_app->add_option("graph", loss.graph, "Ground-truth graph JSON")->required();
  loss_app->add_option("pred", loss.pred, "Predicted distance map (CGRD)")->required();
  loss_app->add_option("--grad-out", loss.grad_out, "Write the gradient to this CGRD file");
  loss.cape.add(loss_app);
  loss_app->callback([&] { action = [&] { return run_loss(g, loss, "loss"); }; });

  LossCmd grad;
  auto* grad_app = app.add_subcommand("grad", "Same as loss, gradient output required");
  grad_app->add_option("graph", grad.graph, "Ground-truth graph JSON")->required();
  grad_app->add_option("pred", grad.pred, "Predicted distance map (CGRD)")->required();
  grad_app->add_option("--grad-out", grad.grad_out, "Gradient CGRD file")->required();
  grad.cape.add(grad_app);
  grad_app->callback([&] { action = [&] { return run_loss(g, grad, "grad"); }; });

  MetricsCmd metrics;
  auto* metrics_app = app.add_subcommand("metrics", "Dice, CCQ, APLS and TLTS");
  metrics_app->add_option("graph", metrics.graph, "Ground-truth graph JSON")->required();
  metrics_app->add_option("mask", metrics.mask, "Ground-truth centreline mask (CGRD)")->required();
  metrics_app->add_option("pred", metrics.pred, "Predicted distance map (CGRD)")->required();
  metrics_app->add_option("--threshold", metrics.cfg.threshold, "Foreground is pred < threshold")
      ->capture_default_str();
  metrics_app->add_option("--ccq-tolerance", metrics.cfg.ccq_tolerance, "CCQ matching distance")
      ->capture_default_str();
  metrics_app->add_option("--snap-radius", metrics.cfg.path.snap_radius, "Node snapping radius")
      ->capture_default_str();
  metrics_app->add_option("--num-pairs", metrics.cfg.path.num_pairs, "Node pairs to compare")->capture_default_str();
  metrics_app->add_option("--tlts-tolerance", metrics.cfg.path.tlts_tolerance, "Relative length tolerance")
      ->capture_default_str();
  metrics_app->callback([&] { action = [&] { return run_metrics(g, metrics); }; });

  SynthCmd synth;
  auto* synth_app = app.add_subcommand("synth", "Generate a synthetic sample directory");
  synth_app->add_option("--out", synth.out, "Output directory")->required();
  synth_app->add_option("--shape", synth.shape, "Extents, rows cols or depth rows cols")
      ->delimiter(',')
      ->capture_default_str();
  synth_app->add_option("--n-curves", synth.cfg.n_curves, "Number of curves")->capture_default_str();
  synth_app->add_option("--loop-prob", synth.cfg.loop_prob, "Probability of a closed curve")->capture_default_str();
  synth_app->add_option("--n-gaps", synth.cfg.n_gaps, "Gaps inserted into the corrupted map")->capture_default_str();
  synth_app->add_option("--gap-len", synth.cfg.gap_len, "Centreline cells per gap")->capture_default_str();
  synth_app->add_option("--gap-value", synth.cfg.gap_value, "Minimum value inside a gap")->capture_default_str();
  synth_app->add_option("--d-max", synth.cfg.d_max, "Distance map cap")->capture_default_str();
  synth_app->add_flag("--preview", synth.preview, "Also write PGM previews (2D)");
  synth_app->callback([&] { action = [&] { return run_synth(g, synth); }; });

  RepairCmd rep;
  auto* repair_app = app.add_subcommand("repair", "Gradient descent on a corrupted sample");
  repair_app->add_option("sample", rep.dir, "Sample directory written by synth")->required();
  repair_app->add_option("--out", rep.out, "Repaired map (default <sample>/repaired.cgrd)");
  repair_app->add_option("--trace", rep.trace, "Trace CSV (default <sample>/trace.csv)");
  repair_app->add_option("--preview", rep.preview, "Write a PGM preview of the result");
  repair_app->add_option("--steps", rep.cfg.steps, "Iterations")->capture_default_str();
  repair_app->add_option("--lr", rep.cfg.learning_rate, "Learning rate")->capture_default_str();
  repair_app->add_option("--alpha", rep.cfg.alpha, "Path loss weight")->capture_default_str();
  repair_app->add_option("--beta", rep.cfg.prox_weight, "Weight of the pull towards the input")
      ->capture_default_str();
  repair_app->add_option("--clamp-min", rep.cfg.clamp_min, "Lower bound on values")->capture_default_str();
  repair_app->add_option("--resample-every", rep.cfg.resample_paths_every, "Steps between path resampling")
      ->capture_default_str();
  repair_app->add_option("--threshold", rep.cfg.threshold, "Foreground threshold for APLS")->capture_default_str();
  repair_app->add_option("--snap-radius", rep.cfg.metric.snap_radius, "APLS snapping radius")->capture_default_str();
  repair_app->add_option("--num-pairs", rep.cfg.metric.num_pairs, "APLS node pairs")->capture_default_str();
  rep.cape.add(repair_app);
  repair_app->callback([&] { action = [&] { return run_repair(g, rep); }; });

  GradcheckCmd gc;
  auto* gc_app = app.add_subcommand("gradcheck", "Compare the gradient with central differences");
  gc_app->add_option("graph", gc.graph, "Ground-truth graph JSON")->required();
  gc_app->add_option("pred", gc.pred, "Predicted distance map (CGRD)")->required();
  gc_app->add_option("--step", gc.h, "Finite difference step h")->capture_default_str();
  gc_app->add_option("--n-cells", gc.n_cells, "Cells to check")->capture_default_str();
  gc_app->add_option("--tol", gc.tol, "Fail above this relative error")->capture_default_str();
  gc.cape.add(gc_app);
  gc_app->callback([&] { action = [&] { return run_gradcheck(g, gc); }; });

  ExtractCmd ex;
  auto* ex_app = app.add_subcommand("extract-graph", "Graph from a distance map or a mask");
  ex_app->add_option("input", ex.input, "CGRD distance map (or mask with --mask)")->required();
  ex_app->add_option("--out", ex.out, "Graph JSON (default stdout)");
  ex_app->add_flag("--mask", ex.mask, "Input is a mask: nonzero cells are foreground");
  ex_app->add_option("--threshold", ex.threshold, "Foreground is value < threshold")->capture_default_str();
  ex_app->add_option("--max-chain", ex.max_chain, "Steps per edge for --mask input (0: whole chains)")
      ->capture_default_str();
  ex_app->callback([&] { action = [&] { return run_extract(g, ex); }; });

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  try {
    return action();
  } catch (const cape::Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return exit_code(e.kind());
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 5;
  }
}
