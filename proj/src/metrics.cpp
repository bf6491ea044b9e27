#include "cape/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <numeric>
#include <queue>
#include <tuple>
#include <random>
#include <set>

#include "json.hpp"

#include "cape/error.hpp"
#include "cape/skeleton.hpp"

namespace cape {

namespace {

void require_same_shape(const BinaryMask& a, const BinaryMask& b) {
  if (a.shape() != b.shape()) {
    throw Error(ErrorKind::shape_mismatch, "mask shapes differ: " + to_string(a.shape()) + " vs " + to_string(b.shape()));
  }
}

// Cells of `from` lying within `tolerance` of any cell of `to`.
std::size_t count_within(const BinaryMask& from, const BinaryMask& to, double tolerance) {
  if (to.count() == 0) return 0;
  const auto sq = squared_distance_transform(to);
  const double t2 = tolerance * tolerance;
  std::size_t n = 0;
  for (std::size_t i = 0; i < from.size(); ++i)
    if (from[i] && sq[i] <= t2) ++n;
  return n;
}

double ratio_or_empty(std::size_t num, std::size_t den, bool both_empty) {
  if (den == 0) return both_empty ? 1.0 : 0.0;
  return static_cast<double>(num) / static_cast<double>(den);
}

constexpr double kInf = std::numeric_limits<double>::infinity();

}  // namespace

double dice(const BinaryMask& pred, const BinaryMask& gt) {
  require_same_shape(pred, gt);
  std::size_t inter = 0, p = 0, g = 0;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    p += pred[i];
    g += gt[i];
    inter += pred[i] && gt[i];
  }
  if (p + g == 0) return 1.0;
  return 2.0 * static_cast<double>(inter) / static_cast<double>(p + g);
}

Ccq ccq(const BinaryMask& pred, const BinaryMask& gt, double tolerance) {
  require_same_shape(pred, gt);
  if (!(tolerance > 0.0)) throw Error(ErrorKind::invalid_argument, "ccq tolerance must be > 0");
  Ccq r;
  r.pred_pixels = pred.count();
  r.gt_pixels = gt.count();
  r.matched_pred = count_within(pred, gt, tolerance);
  r.matched_gt = count_within(gt, pred, tolerance);
  const bool both_empty = r.pred_pixels == 0 && r.gt_pixels == 0;
  r.correctness = ratio_or_empty(r.matched_pred, r.pred_pixels, both_empty);
  r.completeness = ratio_or_empty(r.matched_gt, r.gt_pixels, both_empty);
  r.quality = ratio_or_empty(r.matched_pred, r.pred_pixels + r.gt_pixels - r.matched_gt, both_empty);
  return r;
}

GroundTruthGraph graph_from_prediction(const ScalarGrid& pred, double threshold, std::size_t max_chain_cells) {
  if (!(threshold > 0.0)) throw Error(ErrorKind::invalid_argument, "prediction threshold must be > 0");
  BinaryMask fg = threshold_below(pred, static_cast<float>(threshold));
  const int ndim = pred.shape().ndim();
  if (fg.count() == 0) return GroundTruthGraph::with_weights(ndim, {}, {});
  if (ndim == 2) fg = skeletonize_2d(thin_by_priority(fg, pred));
  return with_euclidean_weights(graph_from_mask(fg, max_chain_cells));
}

std::optional<Snap> snap_to_graph(const GroundTruthGraph& g, const Point& p, double radius) {
  std::optional<Snap> best;
  // equal distances prefer a location on a node over one inside an edge
  const auto at_node = [](const Snap& s) { return s.isolated || s.t == 0.0 || s.t == 1.0; };
  const auto offer = [&](const Snap& s) {
    if (s.distance > radius) return;
    if (!best || s.distance < best->distance || (s.distance == best->distance && at_node(s) && !at_node(*best)))
      best = s;
  };
  for (EdgeId e = 0; e < g.edge_count(); ++e) {
    const Point& a = g.node(g.edge(e).a);
    const Point& b = g.node(g.edge(e).b);
    const double dz = b.z - a.z, dy = b.y - a.y, dx = b.x - a.x;
    const double len2 = dz * dz + dy * dy + dx * dx;
    double t = ((p.z - a.z) * dz + (p.y - a.y) * dy + (p.x - a.x) * dx) / len2;
    t = std::clamp(t, 0.0, 1.0);
    const Point q{a.z + t * dz, a.y + t * dy, a.x + t * dx};
    offer(Snap{e, t, std::nullopt, distance(p, q)});
  }
  for (NodeId n = 0; n < g.node_count(); ++n)
    if (g.neighbours(n).empty()) offer(Snap{0, 0.0, n, distance(p, g.node(n))});
  return best;
}

namespace {

std::vector<double> distances_from_snap(const GroundTruthGraph& g, const Snap& from) {
  std::vector<double> dist(g.node_count(), kInf);
  using Item = std::pair<double, NodeId>;
  std::priority_queue<Item, std::vector<Item>, std::greater<>> heap;
  const auto seed = [&](NodeId n, double d) {
    if (d < dist[n]) {
      dist[n] = d;
      heap.push({d, n});
    }
  };
  if (from.isolated) {
    seed(*from.isolated, 0.0);
  } else {
    const Edge& e = g.edge(from.edge);
    seed(e.a, from.t * e.weight);
    seed(e.b, (1.0 - from.t) * e.weight);
  }
  while (!heap.empty()) {
    const auto [d, u] = heap.top();
    heap.pop();
    if (d > dist[u]) continue;
    for (const auto& nb : g.neighbours(u)) {
      const double nd = d + g.edge(nb.edge).weight;
      if (nd < dist[nb.node]) {
        dist[nb.node] = nd;
        heap.push({nd, nb.node});
      }
    }
  }
  return dist;
}

double length_to_snap(const GroundTruthGraph& g, const std::vector<double>& dist, const Snap& from, const Snap& to) {
  if (to.isolated) return dist[*to.isolated];
  const Edge& e = g.edge(to.edge);
  double best = std::min(dist[e.a] + to.t * e.weight, dist[e.b] + (1.0 - to.t) * e.weight);
  if (!from.isolated && from.edge == to.edge) best = std::min(best, std::abs(from.t - to.t) * e.weight);
  return best;
}

}  // namespace

double snapped_path_length(const GroundTruthGraph& g, const Snap& from, const Snap& to) {
  return length_to_snap(g, distances_from_snap(g, from), from, to);
}

std::vector<std::pair<NodeId, NodeId>> sample_node_pairs(const GroundTruthGraph& gt, std::size_t num_pairs,
                                                         std::uint64_t seed) {
  // Canonical node order by position, so the draw does not depend on ids.
  std::vector<NodeId> order(gt.node_count());
  std::iota(order.begin(), order.end(), NodeId{0});
  std::stable_sort(order.begin(), order.end(), [&](NodeId l, NodeId r) {
    const Point &a = gt.node(l), &b = gt.node(r);
    return std::tie(a.z, a.y, a.x) < std::tie(b.z, b.y, b.x);
  });
  const auto label = connected_components(gt);

  std::map<std::size_t, std::size_t> comp_size;
  for (auto l : label) ++comp_size[l];
  std::size_t total = 0;
  for (const auto& [l, n] : comp_size) total += n * (n - 1) / 2;

  std::vector<std::pair<NodeId, NodeId>> out;
  if (total <= num_pairs) {
    for (std::size_t i = 0; i < order.size(); ++i)
      for (std::size_t j = i + 1; j < order.size(); ++j)
        if (label[order[i]] == label[order[j]]) out.emplace_back(order[i], order[j]);
    return out;
  }
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<std::size_t> pick(0, order.size() - 1);
  std::set<std::pair<std::size_t, std::size_t>> seen;
  const std::size_t max_attempts = num_pairs * 1000;
  for (std::size_t attempt = 0; out.size() < num_pairs && attempt < max_attempts; ++attempt) {
    std::size_t i = pick(rng), j = pick(rng);
    if (i == j || label[order[i]] != label[order[j]]) continue;
    if (i > j) std::swap(i, j);
    if (seen.insert({i, j}).second) out.emplace_back(order[i], order[j]);
  }
  return out;
}

PathComparison compare_paths(const GroundTruthGraph& gt, const GroundTruthGraph& pred, const PathMetricConfig& cfg) {
  PathComparison r;
  const auto pairs = sample_node_pairs(gt, cfg.num_pairs, cfg.seed);
  r.pairs = pairs.size();
  if (pairs.empty()) return r;

  std::map<NodeId, std::optional<Snap>> snaps;
  for (const auto& [a, b] : pairs)
    for (NodeId n : {a, b})
      if (!snaps.count(n)) snaps[n] = snap_to_graph(pred, gt.node(n), cfg.snap_radius);

  std::map<NodeId, std::vector<double>> gt_dist, pred_dist;
  double score_sum = 0.0;
  for (const auto& [a, b] : pairs) {
    auto gd = gt_dist.find(a);
    if (gd == gt_dist.end()) gd = gt_dist.emplace(a, shortest_path_lengths(gt, a)).first;
    const double lg = gd->second[b];

    double lp = kInf;
    const auto& sa = snaps[a];
    const auto& sb = snaps[b];
    if (sa && sb) {
      auto pd = pred_dist.find(a);
      if (pd == pred_dist.end()) pd = pred_dist.emplace(a, distances_from_snap(pred, *sa)).first;
      lp = length_to_snap(pred, pd->second, *sa, *sb);
    }
    if (!std::isfinite(lp)) {
      ++r.missing;
      score_sum += 1.0;
      continue;
    }
    const double rel = std::abs(lg - lp) / lg;
    score_sum += std::min(1.0, rel);
    if (rel < cfg.tlts_tolerance) ++r.within_tol;
  }
  const double n = static_cast<double>(r.pairs);
  r.apls = 1.0 - score_sum / n;
  r.tlts = static_cast<double>(r.within_tol) / n;
  return r;
}

double apls(const GroundTruthGraph& gt, const GroundTruthGraph& pred, const PathMetricConfig& cfg) {
  return compare_paths(gt, pred, cfg).apls;
}

double tlts(const GroundTruthGraph& gt, const GroundTruthGraph& pred, const PathMetricConfig& cfg) {
  return compare_paths(gt, pred, cfg).tlts;
}

MetricReport evaluate(const GroundTruthGraph& gt_graph, const BinaryMask& gt_mask, const ScalarGrid& pred,
                      const MetricConfig& cfg) {
  if (gt_mask.shape() != pred.shape()) {
    throw Error(ErrorKind::shape_mismatch, "ground-truth mask " + to_string(gt_mask.shape()) + " vs prediction " +
                                               to_string(pred.shape()));
  }
  if (!gt_graph.empty()) gt_graph.require_within(pred.shape());
  const auto thr = static_cast<float>(cfg.threshold);
  const BinaryMask pred_band = threshold_below(pred, thr);
  // Both sides compared as "closer than threshold to a centreline".
  BinaryMask gt_band(gt_mask.shape());
  if (gt_mask.count() > 0) gt_band = threshold_below(distance_transform(gt_mask, kUnbounded), thr);

  MetricReport r;
  r.dice = dice(pred_band, gt_band);
  const BinaryMask pred_centre =
      pred.shape().ndim() == 2 && pred_band.count() > 0 ? skeletonize_2d(thin_by_priority(pred_band, pred)) : pred_band;
  r.ccq = ccq(pred_centre, gt_mask, cfg.ccq_tolerance);
  r.paths = compare_paths(gt_graph, graph_from_prediction(pred, cfg.threshold), cfg.path);
  return r;
}

std::string report_to_json(const MetricReport& r) {
  const auto pct = [](double v) { return std::round(v * 1000.0) / 10.0; };
  nlohmann::ordered_json j;
  j["correctness"] = pct(r.ccq.correctness);
  j["completeness"] = pct(r.ccq.completeness);
  j["quality"] = pct(r.ccq.quality);
  j["dice"] = pct(r.dice);
  j["apls"] = pct(r.paths.apls);
  j["tlts"] = pct(r.paths.tlts);
  nlohmann::ordered_json raw;
  raw["correctness"] = r.ccq.correctness;
  raw["completeness"] = r.ccq.completeness;
  raw["quality"] = r.ccq.quality;
  raw["dice"] = r.dice;
  raw["apls"] = r.paths.apls;
  raw["tlts"] = r.paths.tlts;
  j["fractions"] = raw;
  nlohmann::ordered_json counts;
  counts["pred_pixels"] = r.ccq.pred_pixels;
  counts["gt_pixels"] = r.ccq.gt_pixels;
  counts["matched_pred_pixels"] = r.ccq.matched_pred;
  counts["matched_gt_pixels"] = r.ccq.matched_gt;
  counts["sampled_pairs"] = r.paths.pairs;
  counts["missing_pairs"] = r.paths.missing;
  counts["tlts_matched_pairs"] = r.paths.within_tol;
  j["counts"] = counts;
  return j.dump(2);
}

}  // namespace cape
