// Acceptance gate: one PASS/FAIL line per criterion, nonzero exit on any FAIL.

#include <sys/wait.h>

#include <chrono>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <sstream>
#include <string>

#include "cape/cape_loss.hpp"
#include "cape/io.hpp"
#include "cape/metrics.hpp"
#include "cape/optimize.hpp"
#include "cape/synth.hpp"
#include "support.hpp"

using namespace cape;
using namespace cape::testing;
namespace fs = std::filesystem;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

std::string num(double v, const char* spec = "%.4g") {
  char buf[64];
  std::snprintf(buf, sizeof buf, spec, v);
  return buf;
}

bool bit_equal(double a, double b) { return std::memcmp(&a, &b, sizeof a) == 0; }

struct Outcome {
  bool ok = true;
  std::string detail;

  void fail(const std::string& why) {
    if (ok) detail = why;
    ok = false;
  }
};

int failures = 0;

void report(const char* name, const std::function<Outcome()>& body) {
  Outcome o;
  try {
    o = body();
  } catch (const std::exception& e) {
    o.ok = false;
    o.detail = std::string("exception: ") + e.what();
  }
  if (!o.ok) ++failures;
  std::cout << (o.ok ? "PASS " : "FAIL ") << name << ": " << o.detail << std::endl;
}

// criteria ---------------------------------------------------------------

Outcome zero_loss() {
  Outcome o;
  const auto t0 = Clock::now();
  std::size_t samples = 0;
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    SynthConfig sc;
    sc.seed = seed;
    sc.shape = {128 + 64 * (seed % 3), 128 + 64 * ((seed / 3) % 3)};
    sc.n_curves = 1 + static_cast<int>(seed % 4);
    sc.loop_prob = 0.3;
    const auto s = make_sample(sc);
    CapeConfig cfg;
    cfg.seed = seed;
    const double loss = cape_forward(s.graph, s.gt_map, cfg).total_loss;
    if (loss != 0.0) o.fail("2D seed " + std::to_string(seed) + " loss " + num(loss));
    ++samples;
  }
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    SynthConfig sc;
    sc.seed = 100 + seed;
    sc.shape = {64, 64, 64};
    sc.n_curves = 2;
    const auto s = make_sample(sc);
    CapeConfig cfg;
    cfg.seed = seed;
    const double loss = cape_forward(s.graph, s.gt_map, cfg).total_loss;
    if (loss != 0.0) o.fail("3D seed " + std::to_string(seed) + " loss " + num(loss));
    ++samples;
  }
  const double secs = seconds_since(t0);
  if (secs >= 10.0) o.fail("took " + num(secs) + " s");
  if (o.ok) o.detail = std::to_string(samples) + " samples exactly 0 in " + num(secs, "%.2f") + " s";
  return o;
}

Outcome gradient() {
  Outcome o;
  const auto t0 = Clock::now();
  double worst = 0.0;
  std::size_t checked = 0, skipped = 0;
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    SynthConfig sc;
    sc.seed = seed;
    auto s = make_sample(sc);
    const auto noise = random_grid(s.corrupted_map.shape(), 0.0f, 1.0f, 1000 + seed);
    for (std::size_t i = 0; i < noise.size(); ++i) s.corrupted_map[i] += noise[i];
    CapeConfig cfg;
    cfg.seed = seed;
    const auto r = finite_diff_check(s.graph, s.corrupted_map, cfg, 1e-3, 50);
    if (r.checked == 0) o.fail("seed " + std::to_string(seed) + " checked no cells");
    worst = std::max(worst, r.max_rel_error);
    checked += r.checked;
    skipped += r.skipped;
  }
  const double secs = seconds_since(t0);
  if (worst >= 1e-3) o.fail("max relative error " + num(worst));
  if (secs >= 30.0) o.fail("took " + num(secs) + " s");
  if (o.ok)
    o.detail = "max relative error " + num(worst, "%.2e") + " over " + std::to_string(checked) + " cells (" +
               std::to_string(skipped) + " unstable skipped) in " + num(secs, "%.2f") + " s";
  return o;
}

bool touches(const std::vector<GridIndex>& cells, const std::vector<GridIndex>& region) {
  for (const auto& c : cells)
    if (std::find(region.begin(), region.end(), c) != region.end()) return true;
  return false;
}

Outcome masking() {
  Outcome o;
  const auto f = loop_with_gap();
  // A-B corridor cross-section at the gap columns
  std::vector<GridIndex> region;
  for (std::int64_t y = 22; y <= 42; ++y)
    for (std::int64_t x = 36; x < 44; ++x) region.push_back({0, y, x});

  // the sampled path is the direct A-B edge of the loop
  const std::vector<std::pair<NodeId, NodeId>> ab{{f.a, f.b}};
  const auto g = GroundTruthGraph::from_coordinates(2, f.clean.graph.nodes(), ab);

  CapeConfig masked;
  const auto rm = cape_forward(g, f.corrupted, masked);
  CapeConfig open = masked;
  open.mask_paths = false;
  const auto ro = cape_forward(g, f.corrupted, open);
  if (rm.records.size() != 1 || ro.records.size() != 1) {
    o.fail("expected one path record");
    return o;
  }
  if (!(rm.total_loss > 0.0)) o.fail("masked loss " + num(rm.total_loss));
  if (!touches(rm.records[0].pixel_path.cells, region)) o.fail("masked path misses the gap");
  if (!(ro.total_loss < 1e-6)) o.fail("unmasked loss " + num(ro.total_loss));
  if (touches(ro.records[0].pixel_path.cells, region)) o.fail("unmasked path crosses the gap");
  if (o.ok)
    o.detail = "masked " + num(rm.total_loss) + " through the gap, unmasked " + num(ro.total_loss) +
               " around the loop (" + std::to_string(ro.records[0].pixel_path.cells.size()) + " cells)";
  return o;
}

Outcome monotonicity() {
  Outcome o;
  const auto f = line_fixture();
  CapeConfig cfg;
  const auto loss = [&](std::int64_t k, float c) {
    return cape_forward(f.graph, with_cross_section_gap(f.map, 60 - k / 2, k, c), cfg).total_loss;
  };
  std::string ks = "k:", cs = "c:";
  double prev = -1.0;
  for (std::int64_t k : {2, 4, 8, 16}) {
    const double l = loss(k, 4.0f);
    if (!(l > prev)) o.fail("k=" + std::to_string(k) + " gives " + num(l) + " after " + num(prev));
    prev = l;
    ks += " " + num(l);
  }
  prev = -1.0;
  for (float c : {1.0f, 2.0f, 4.0f, 8.0f}) {
    const double l = loss(4, c);
    if (!(l > prev)) o.fail("c=" + num(c) + " gives " + num(l) + " after " + num(prev));
    prev = l;
    cs += " " + num(l);
  }
  if (o.ok) o.detail = ks + " (c=4); " + cs + " (k=4)";
  return o;
}

Outcome repair_demo() {
  Outcome o;
  double worst_initial = 0.0, worst_final = 1.0, worst_drop = std::numeric_limits<double>::infinity(), slowest = 0.0;
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    SynthConfig sc;
    sc.seed = seed;
    sc.shape = {128, 128};
    sc.n_curves = 1;
    sc.loop_prob = 0.0;
    sc.n_gaps = 1;
    const auto s = make_sample(sc);
    RepairConfig rc;
    rc.alpha = 1.0;
    rc.prox_weight = 0.01;
    rc.learning_rate = 0.1;
    rc.steps = 200;
    rc.metric.seed = seed;
    CapeConfig cc;
    cc.seed = seed;
    cc.alpha = rc.alpha;
    const auto t0 = Clock::now();
    const auto [y, trace] = repair(s, rc, cc);
    const double secs = seconds_since(t0);
    const auto& first = trace.front();
    const auto& last = trace.back();
    const double drop = last.cape > 0.0 ? first.cape / last.cape : std::numeric_limits<double>::infinity();
    const std::string tag = "seed " + std::to_string(seed) + ": ";
    if (!(first.apls < 0.8)) o.fail(tag + "initial APLS " + num(first.apls));
    if (!(last.apls >= 0.95)) o.fail(tag + "final APLS " + num(last.apls));
    if (!(drop >= 100.0)) o.fail(tag + "CAPE drop " + num(drop) + "x");
    if (secs >= 60.0) o.fail(tag + "took " + num(secs) + " s");
    worst_initial = std::max(worst_initial, first.apls);
    worst_final = std::min(worst_final, last.apls);
    worst_drop = std::min(worst_drop, drop);
    slowest = std::max(slowest, secs);
  }
  if (o.ok)
    o.detail = "initial APLS <= " + num(worst_initial) + ", final APLS >= " + num(worst_final) + ", CAPE drop >= " +
               num(worst_drop) + "x, slowest " + num(slowest, "%.2f") + " s";
  return o;
}

Outcome metric_oracles() {
  Outcome o;
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    SynthConfig sc;
    sc.seed = seed;
    sc.n_curves = 1 + static_cast<int>(seed % 4);
    sc.loop_prob = 0.3;
    const auto s = make_sample(sc);
    MetricConfig mc;
    mc.path.seed = seed;
    const auto r = evaluate(s.graph, s.gt_mask, s.gt_map, mc);
    const std::string tag = "seed " + std::to_string(seed) + ": ";
    if (r.dice != 1.0) o.fail(tag + "dice " + num(r.dice));
    if (r.ccq.correctness != 1.0 || r.ccq.completeness != 1.0 || r.ccq.quality != 1.0) o.fail(tag + "ccq below 1");
    if (std::abs(r.paths.apls - 1.0) > 0.01) o.fail(tag + "apls " + num(r.paths.apls));
    if (r.paths.tlts != 1.0) o.fail(tag + "tlts " + num(r.paths.tlts));
  }
  std::size_t compared = 0;
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const std::size_t n = 10 + 2 * seed;
    const auto g = random_graph(n, n + n / 3, 700 + seed, true);
    const auto fw = floyd_warshall(g);
    std::vector<Snap> at(n);
    for (NodeId v = 0; v < n; ++v) {
      if (g.neighbours(v).empty()) {
        at[v].isolated = v;
        continue;
      }
      const auto nb = g.neighbours(v)[0];
      at[v].edge = nb.edge;
      at[v].t = g.edge(nb.edge).a == v ? 0.0 : 1.0;
    }
    for (NodeId a = 0; a < n; ++a)
      for (NodeId b = 0; b < n; ++b) {
        const double got = snapped_path_length(g, at[a], at[b]);
        if (got != fw[a][b])
          o.fail("graph " + std::to_string(seed) + " pair " + std::to_string(a) + "-" + std::to_string(b) + ": " +
                 num(got) + " vs " + num(fw[a][b]));
        ++compared;
      }
  }
  if (o.ok)
    o.detail = "10 identical inputs score 1 everywhere; " + std::to_string(compared) +
               " path lengths equal Floyd-Warshall on 20 graphs";
  return o;
}

Outcome partition() {
  Outcome o;
  std::size_t paths_total = 0, edges_total = 0;
  for (std::uint64_t seed = 0; seed < 50; ++seed) {
    const std::size_t n = 4 + seed % 40;
    const auto g = random_graph(n, n + seed % 17, 900 + seed, seed % 2 == 0);
    const auto paths = sample_paths(g, seed);
    const std::string tag = "seed " + std::to_string(seed) + ": ";
    if (paths.size() > g.edge_count()) o.fail(tag + "more iterations than edges");
    std::vector<int> used(g.edge_count(), 0);
    for (const auto& sp : paths)
      for (EdgeId e : sp.graph_path.edges) ++used[e];
    for (EdgeId e = 0; e < used.size(); ++e)
      if (used[e] != 1) o.fail(tag + "edge " + std::to_string(e) + " used " + std::to_string(used[e]) + " times");
    paths_total += paths.size();
    edges_total += g.edge_count();
  }
  if (o.ok)
    o.detail = "50 runs, " + std::to_string(edges_total) + " edges covered once by " + std::to_string(paths_total) +
               " paths";
  return o;
}

// determinism ------------------------------------------------------------

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::pair<int, std::string> run_cli(const std::string& args) {
  const std::string cmd = std::string("\"") + CAPE_BINARY + "\" " + args;
  std::string out;
  FILE* pipe = popen(cmd.c_str(), "r");
  if (!pipe) return {-1, ""};
  char buf[4096];
  std::size_t n;
  while ((n = std::fread(buf, 1, sizeof buf, pipe)) > 0) out.append(buf, n);
  const int status = pclose(pipe);
  return {WIFEXITED(status) ? WEXITSTATUS(status) : -1, out};
}

std::string q(const fs::path& p) { return "\"" + p.string() + "\""; }

Outcome determinism() {
  Outcome o;
  std::size_t cases = 0;
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    SynthConfig sc;
    sc.seed = seed;
    sc.n_curves = 3;
    sc.loop_prob = 0.3;
    sc.n_gaps = 2;
    if (seed == 4) sc.shape = {48, 48, 48};
    const auto s = make_sample(sc);
    CapeConfig one, many;
    one.seed = many.seed = seed;
    one.threads = 1;
    many.threads = 8;
    const auto a = cape_forward(s.graph, s.corrupted_map, one);
    const auto b = cape_forward(s.graph, s.corrupted_map, many);
    const std::string tag = "seed " + std::to_string(seed) + ": ";
    if (!bit_equal(a.total_loss, b.total_loss)) o.fail(tag + "loss differs");
    if (std::memcmp(a.gradient.values().data(), b.gradient.values().data(), a.gradient.size() * sizeof(float)) != 0)
      o.fail(tag + "gradient differs");
    MetricConfig mc;
    mc.path.seed = seed;
    if (report_to_json(evaluate(s.graph, s.gt_mask, s.corrupted_map, mc)) !=
        report_to_json(evaluate(s.graph, s.gt_mask, s.corrupted_map, mc)))
      o.fail(tag + "report differs");
    ++cases;
  }

  // repair runs the loss in its inner loop
  {
    SynthConfig sc;
    sc.seed = 3;
    sc.n_curves = 1;
    sc.loop_prob = 0.0;
    const auto s = make_sample(sc);
    RepairConfig rc;
    rc.steps = 20;
    CapeConfig one, many;
    one.threads = 1;
    many.threads = 8;
    const auto a = repair(s, rc, one);
    const auto b = repair(s, rc, many);
    if (!(a.first == b.first)) o.fail("repaired maps differ");
    for (std::size_t i = 0; i < a.second.size(); ++i)
      if (!bit_equal(a.second[i].total, b.second[i].total) || !bit_equal(a.second[i].apls, b.second[i].apls))
        o.fail("repair trace differs at step " + std::to_string(i));
  }

  // the command line, end to end
  const auto dir = fs::temp_directory_path() / "cape_acceptance_determinism";
  fs::remove_all(dir);
  fs::create_directories(dir);
  if (run_cli("--seed 11 synth --out " + q(dir) + " --n-curves 3 --n-gaps 2").first != 0) {
    o.fail("cli synth failed");
    return o;
  }
  const auto graph = q(dir / "graph.json"), pred = q(dir / "corrupted.cgrd");
  const auto l1 = run_cli("--format json --threads 1 loss " + graph + " " + pred + " --grad-out " + q(dir / "g1.cgrd"));
  const auto l8 = run_cli("--format json --threads 8 loss " + graph + " " + pred + " --grad-out " + q(dir / "g8.cgrd"));
  if (l1.first != 0 || l8.first != 0) o.fail("cli loss failed");
  if (l1.second != l8.second) o.fail("cli loss output differs");
  if (slurp(dir / "g1.cgrd") != slurp(dir / "g8.cgrd")) o.fail("cli gradient file differs");
  const auto margs = graph + " " + q(dir / "gt_mask.cgrd") + " " + pred;
  const auto m1 = run_cli("--format json --threads 1 metrics " + margs);
  const auto m8 = run_cli("--format json --threads 8 metrics " + margs);
  if (m1.first != 0 || m1.second != m8.second) o.fail("cli metrics output differs");
  if (o.ok)
    o.detail = std::to_string(cases) + " library fixtures, a repair run and the CLI (loss, gradient file, metrics) "
               "bit-identical at 1 and 8 threads";
  return o;
}

}  // namespace

int main() {
  report("zero_loss", zero_loss);
  report("gradient_check", gradient);
  report("mask_loop_with_gap", masking);
  report("monotonicity", monotonicity);
  report("repair", repair_demo);
  report("metric_oracles", metric_oracles);
  report("path_partition", partition);
  report("determinism", determinism);
  std::cout << (failures ? "FAIL " : "PASS ") << "acceptance: " << failures << " failing criteria" << std::endl;
  return failures ? 1 : 0;
}
