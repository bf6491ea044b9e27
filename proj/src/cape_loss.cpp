#include "cape/cape_loss.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <queue>
#include <random>
#include <tuple>

#include "cape/error.hpp"
#include "cape/parallel.hpp"

namespace cape {

void CapeConfig::validate() const {
  if (window_radius < 0) throw Error(ErrorKind::invalid_argument, "window_radius must be >= 0");
  if (!(dilation_radius > 0.0)) throw Error(ErrorKind::invalid_argument, "dilation_radius must be > 0");
  if (!(cost_exponent > 0.0)) throw Error(ErrorKind::invalid_argument, "cost_exponent must be > 0");
  if (!(alpha >= 0.0)) throw Error(ErrorKind::invalid_argument, "alpha must be >= 0");
}

double cell_cost(double value, double exponent) {
  if (exponent == 2.0) return value * value;
  if (exponent == 1.0) return value;
  return std::pow(std::max(value, 0.0), exponent);
}

double cell_cost_derivative(double value, double exponent) {
  if (exponent == 2.0) return 2.0 * value;
  if (exponent == 1.0) return 1.0;
  if (value <= 0.0) return 0.0;
  return exponent * std::pow(value, exponent - 1.0);
}

GridIndex project_vertex(const ScalarGrid& pred, const Point& v, int window_radius) {
  const Shape& s = pred.shape();
  const GridIndex c = round_point(v);
  if (!s.contains(c)) throw Error(ErrorKind::out_of_bounds, "vertex " + to_string(c) + " outside grid");
  const std::int64_t r = window_radius;
  const std::int64_t rz = s.ndim() == 3 ? r : 0;
  const auto lo = [](std::int64_t a, std::int64_t d) { return std::max<std::int64_t>(0, a - d); };
  const auto hi = [](std::int64_t a, std::int64_t d, std::size_t ext) {
    return std::min<std::int64_t>(static_cast<std::int64_t>(ext) - 1, a + d);
  };
  GridIndex best = c;
  float best_val = std::numeric_limits<float>::infinity();
  // Row-major scan: strict improvement keeps the smallest linear index on ties.
  for (std::int64_t z = lo(c.z, rz); z <= hi(c.z, rz, s.depth()); ++z)
    for (std::int64_t y = lo(c.y, r); y <= hi(c.y, r, s.rows()); ++y)
      for (std::int64_t x = lo(c.x, r); x <= hi(c.x, r, s.cols()); ++x) {
        const float val = pred.at({z, y, x});
        if (val < best_val) {
          best_val = val;
          best = {z, y, x};
        }
      }
  return best;
}

double path_cost(const ScalarGrid& pred, std::span<const GridIndex> path, double exponent) {
  double sum = 0.0;
  for (const auto& c : path) sum += cell_cost(pred.at(c), exponent);
  return sum;
}

PixelPath masked_grid_dijkstra(const ScalarGrid& pred, const BinaryMask* mask, const GridIndex& start,
                               const GridIndex& end, double exponent) {
  const Shape& s = pred.shape();
  if (mask && mask->shape() != s) throw Error(ErrorKind::shape_mismatch, "mask and prediction shapes differ");
  const auto inside = [&](const GridIndex& g) { return s.contains(g) && (!mask || mask->test(g)); };
  if (!inside(start) || !inside(end)) {
    throw Error(ErrorKind::mask_disconnection,
                "mask disconnection: endpoint " + to_string(inside(start) ? end : start) + " outside the mask");
  }

  constexpr double inf = std::numeric_limits<double>::infinity();
  constexpr auto none = std::numeric_limits<std::size_t>::max();
  std::vector<double> dist(s.size(), inf);
  std::vector<std::size_t> parent(s.size(), none);
  std::vector<std::uint8_t> done(s.size(), 0);

  using Item = std::tuple<double, std::size_t, std::uint64_t>;
  std::priority_queue<Item, std::vector<Item>, std::greater<>> heap;
  std::uint64_t seq = 0;

  const std::size_t src = s.linear(start), dst = s.linear(end);
  dist[src] = cell_cost(pred[src], exponent);
  heap.push({dist[src], src, seq++});
  const auto offsets = neighbour_offsets(s.ndim());
  while (!heap.empty()) {
    const auto [d, u, ignored] = heap.top();
    heap.pop();
    if (done[u]) continue;
    done[u] = 1;
    if (u == dst) break;
    const GridIndex gu = s.unravel(u);
    for (const auto& o : offsets) {
      const GridIndex gv{gu.z + o.z, gu.y + o.y, gu.x + o.x};
      if (!inside(gv)) continue;
      const std::size_t v = s.linear(gv);
      if (done[v]) continue;
      const double nd = d + cell_cost(pred[v], exponent);
      if (nd < dist[v]) {
        dist[v] = nd;
        parent[v] = u;
        heap.push({nd, v, seq++});
      }
    }
  }
  if (!done[dst]) {
    throw Error(ErrorKind::mask_disconnection,
                "mask disconnection: no path from " + to_string(start) + " to " + to_string(end));
  }

  PixelPath out;
  for (std::size_t c = dst; c != none; c = parent[c]) out.cells.push_back(s.unravel(c));
  std::reverse(out.cells.begin(), out.cells.end());
  out.cost = path_cost(pred, out.cells, exponent);
  return out;
}

std::vector<SampledPath> sample_paths(const GroundTruthGraph& g, std::uint64_t seed) {
  std::vector<SampledPath> out;
  std::mt19937_64 rng(seed);
  EdgeSet live(g);
  while (!live.empty()) {
    const auto [v1, v2] = sample_pair(g, live, rng);
    GraphPath p = graph_dijkstra(g, v1, v2, &live);
    live = remove_path_edges(std::move(live), p);
    out.push_back({v1, v2, std::move(p)});
  }
  return out;
}

BinaryMask render_graph_path(const GroundTruthGraph& g, const GraphPath& path, const Shape& shape) {
  std::vector<Point> pts;
  pts.reserve(path.nodes.size());
  for (NodeId n : path.nodes) pts.push_back(g.node(n));
  return rasterize_polyline(pts, shape);
}

PathSet PathSet::build(const GroundTruthGraph& g, const Shape& shape, const CapeConfig& cfg) {
  cfg.validate();
  if (!g.empty()) g.require_within(shape);
  PathSet set;
  set.shape = shape;
  set.paths = sample_paths(g, cfg.seed);
  if (cfg.mask_paths) {
    set.corridors.resize(set.paths.size());
    parallel_for(set.paths.size(), cfg.threads, [&](std::size_t i) {
      set.corridors[i] = dilate(render_graph_path(g, set.paths[i].graph_path, shape), cfg.dilation_radius);
    });
  }
  return set;
}

namespace {

GridIndex snap_into(const BinaryMask& mask, const GridIndex& p) {
  if (mask.test(p)) return p;
  const Shape& s = mask.shape();
  GridIndex best = p;
  std::int64_t best_d = std::numeric_limits<std::int64_t>::max();
  for (std::size_t lin : mask.foreground()) {
    const GridIndex q = s.unravel(lin);
    const std::int64_t dz = q.z - p.z, dy = q.y - p.y, dx = q.x - p.x;
    const std::int64_t d = dz * dz + dy * dy + dx * dx;
    if (d < best_d) {
      best_d = d;
      best = q;
    }
  }
  return best;
}

}  // namespace

PathRecord evaluate_path(const GroundTruthGraph& g, const ScalarGrid& pred, const SampledPath& sp,
                         const BinaryMask* corridor, const CapeConfig& cfg) {
  PathRecord rec;
  rec.v1 = sp.v1;
  rec.v2 = sp.v2;
  rec.graph_path = sp.graph_path;
  rec.v1_projected = project_vertex(pred, g.node(sp.v1), cfg.window_radius);
  rec.v2_projected = project_vertex(pred, g.node(sp.v2), cfg.window_radius);
  if (corridor) {
    rec.v1_projected = snap_into(*corridor, rec.v1_projected);
    rec.v2_projected = snap_into(*corridor, rec.v2_projected);
  }
  rec.pixel_path = masked_grid_dijkstra(pred, corridor, rec.v1_projected, rec.v2_projected, cfg.cost_exponent);
  rec.loss = rec.pixel_path.cost;
  return rec;
}

CapeResult cape_forward(const GroundTruthGraph& g, const ScalarGrid& pred, const CapeConfig& cfg) {
  require_distance_map(pred, "prediction");
  return cape_forward(g, pred, PathSet::build(g, pred.shape(), cfg), cfg);
}

CapeResult cape_forward(const GroundTruthGraph& g, const ScalarGrid& pred, const PathSet& paths,
                        const CapeConfig& cfg) {
  cfg.validate();
  if (paths.shape != pred.shape()) {
    throw Error(ErrorKind::shape_mismatch, "path set built for " + to_string(paths.shape) + " but prediction is " +
                                               to_string(pred.shape()));
  }
  const bool masked = cfg.mask_paths && !paths.corridors.empty();
  CapeResult result;
  result.records.resize(paths.paths.size());
  parallel_for(paths.paths.size(), cfg.threads, [&](std::size_t i) {
    result.records[i] = evaluate_path(g, pred, paths.paths[i], masked ? &paths.corridors[i] : nullptr, cfg);
  });
  for (const auto& rec : result.records) result.total_loss += rec.loss;
  result.gradient = cape_backward(result, pred, cfg);
  return result;
}

ScalarGrid cape_backward(const CapeResult& result, const ScalarGrid& pred, const CapeConfig& cfg) {
  std::vector<double> acc(pred.size(), 0.0);
  for (const auto& rec : result.records)
    for (const auto& c : rec.pixel_path.cells) {
      const std::size_t lin = pred.shape().linear(c);
      acc[lin] += cell_cost_derivative(pred[lin], cfg.cost_exponent);
    }
  ScalarGrid grad(pred.shape());
  for (std::size_t i = 0; i < acc.size(); ++i) grad[i] = static_cast<float>(acc[i]);
  return grad;
}

CombinedLoss total_loss(const ScalarGrid& gt_map, const ScalarGrid& pred, const GroundTruthGraph& g,
                        const CapeConfig& cfg) {
  if (gt_map.shape() != pred.shape()) {
    throw Error(ErrorKind::shape_mismatch, "ground truth " + to_string(gt_map.shape()) + " vs prediction " +
                                               to_string(pred.shape()));
  }
  CombinedLoss out;
  const double n = static_cast<double>(pred.size());
  std::vector<double> grad(pred.size());
  for (std::size_t i = 0; i < pred.size(); ++i) {
    const double diff = static_cast<double>(pred[i]) - gt_map[i];
    out.mse += diff * diff;
    grad[i] = 2.0 * diff / n;
  }
  out.mse /= n;
  const auto cape = cape_forward(g, pred, cfg);
  out.cape = cape.total_loss;
  for (std::size_t i = 0; i < pred.size(); ++i) grad[i] += cfg.alpha * cape.gradient[i];
  out.total = out.mse + cfg.alpha * out.cape;
  out.gradient = ScalarGrid(pred.shape());
  for (std::size_t i = 0; i < grad.size(); ++i) out.gradient[i] = static_cast<float>(grad[i]);
  return out;
}

}  // namespace cape
