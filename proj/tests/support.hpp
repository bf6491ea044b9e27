#pragma once

// Brute-force oracles and shared fixtures. Everything here is deliberately
// naive: quadratic scans, relaxation to a fixed point, Floyd-Warshall.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <random>
#include <set>
#include <vector>

#include "cape/cape_loss.hpp"
#include "cape/error.hpp"
#include "cape/graph.hpp"
#include "cape/grid.hpp"

namespace cape::testing {

inline constexpr double kInf = std::numeric_limits<double>::infinity();

// Kind of the cape::Error thrown by f; fails the enclosing test if none is.
template <typename F>
std::optional<ErrorKind> error_kind(F&& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.kind();
  }
  return std::nullopt;
}

inline BinaryMask random_mask(const Shape& s, double p, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::bernoulli_distribution on(p);
  BinaryMask m(s);
  for (std::size_t i = 0; i < s.size(); ++i) m.set(i, on(rng));
  return m;
}

inline ScalarGrid random_grid(const Shape& s, float lo, float hi, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<float> u(lo, hi);
  ScalarGrid g(s);
  for (std::size_t i = 0; i < s.size(); ++i) g[i] = u(rng);
  return g;
}

inline double sq_dist(const GridIndex& a, const GridIndex& b) {
  const double dz = static_cast<double>(a.z - b.z), dy = static_cast<double>(a.y - b.y),
               dx = static_cast<double>(a.x - b.x);
  return dz * dz + dy * dy + dx * dx;
}

// Distance from every cell to every foreground cell, minimum taken.
inline std::vector<double> brute_edt(const BinaryMask& m, double cap) {
  const Shape& s = m.shape();
  const auto fg = m.foreground();
  std::vector<double> out(s.size(), kInf);
  for (std::size_t i = 0; i < s.size(); ++i) {
    double best = kInf;
    for (std::size_t f : fg) best = std::min(best, sq_dist(s.unravel(i), s.unravel(f)));
    out[i] = std::min(std::sqrt(best), cap);
  }
  return out;
}

inline BinaryMask brute_dilate(const BinaryMask& m, double r) {
  const Shape& s = m.shape();
  BinaryMask out(s);
  for (std::size_t f : m.foreground())
    for (std::size_t i = 0; i < s.size(); ++i)
      if (sq_dist(s.unravel(i), s.unravel(f)) <= r * r) out.set(i);
  return out;
}

// Chebyshev-connected components by repeated label propagation.
inline std::size_t brute_components(const BinaryMask& m) {
  const Shape& s = m.shape();
  std::vector<std::size_t> label(s.size());
  for (std::size_t i = 0; i < s.size(); ++i) label[i] = i;
  for (bool changed = true; changed;) {
    changed = false;
    for (std::size_t i = 0; i < s.size(); ++i) {
      if (!m[i]) continue;
      for (std::size_t j = 0; j < s.size(); ++j) {
        if (!m[j] || i == j) continue;
        const GridIndex a = s.unravel(i), b = s.unravel(j);
        if (std::abs(a.z - b.z) > 1 || std::abs(a.y - b.y) > 1 || std::abs(a.x - b.x) > 1) continue;
        const std::size_t lo = std::min(label[i], label[j]);
        if (label[i] != lo || label[j] != lo) {
          label[i] = label[j] = lo;
          changed = true;
        }
      }
    }
  }
  std::set<std::size_t> roots;
  for (std::size_t i = 0; i < s.size(); ++i)
    if (m[i]) roots.insert(label[i]);
  return roots.size();
}

inline std::vector<std::vector<double>> floyd_warshall(const GroundTruthGraph& g) {
  const std::size_t n = g.node_count();
  std::vector<std::vector<double>> d(n, std::vector<double>(n, kInf));
  for (std::size_t i = 0; i < n; ++i) d[i][i] = 0.0;
  for (const auto& e : g.edges()) {
    d[e.a][e.b] = std::min(d[e.a][e.b], e.weight);
    d[e.b][e.a] = std::min(d[e.b][e.a], e.weight);
  }
  for (std::size_t k = 0; k < n; ++k)
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < n; ++j)
        if (d[i][k] + d[k][j] < d[i][j]) d[i][j] = d[i][k] + d[k][j];
  return d;
}

// n nodes at random integer positions of a 64x64 grid, m distinct edges.
// Integer weights keep every path sum exact in double.
inline GroundTruthGraph random_graph(std::size_t n, std::size_t m, std::uint64_t seed, bool integer_weights) {
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<int> coord(0, 63);
  std::vector<Point> nodes;
  std::set<std::pair<int, int>> used;
  while (nodes.size() < n) {
    const int y = coord(rng), x = coord(rng);
    if (used.insert({y, x}).second) nodes.push_back({0.0, static_cast<double>(y), static_cast<double>(x)});
  }
  std::uniform_int_distribution<std::size_t> pick(0, n - 1);
  std::uniform_int_distribution<int> weight(1, 9);
  std::set<std::pair<std::size_t, std::size_t>> pairs;
  m = std::min(m, n * (n - 1) / 2);
  while (pairs.size() < m) {
    std::size_t a = pick(rng), b = pick(rng);
    if (a == b) continue;
    if (a > b) std::swap(a, b);
    pairs.insert({a, b});
  }
  if (!integer_weights) {
    const std::vector<std::pair<NodeId, NodeId>> edges(pairs.begin(), pairs.end());
    return GroundTruthGraph::from_coordinates(2, nodes, edges);
  }
  std::vector<Edge> edges;
  for (const auto& [a, b] : pairs) edges.push_back({a, b, static_cast<double>(weight(rng))});
  return GroundTruthGraph::with_weights(2, nodes, edges);
}

// Node-weighted shortest path cost by Bellman-Ford style relaxation.
inline double brute_grid_path_cost(const ScalarGrid& pred, const BinaryMask* mask, const GridIndex& start,
                                   const GridIndex& end, double exponent) {
  const Shape& s = pred.shape();
  const auto inside = [&](std::size_t i) { return !mask || (*mask)[i]; };
  std::vector<double> d(s.size(), kInf);
  d[s.linear(start)] = cell_cost(pred.at(start), exponent);
  for (bool changed = true; changed;) {
    changed = false;
    for (std::size_t i = 0; i < s.size(); ++i) {
      if (!inside(i) || d[i] == kInf) continue;
      const GridIndex a = s.unravel(i);
      for (const auto& o : neighbour_offsets(s.ndim())) {
        const GridIndex b{a.z + o.z, a.y + o.y, a.x + o.x};
        if (!s.contains(b)) continue;
        const std::size_t j = s.linear(b);
        if (!inside(j)) continue;
        const double nd = d[i] + cell_cost(pred[j], exponent);
        if (nd < d[j]) {
          d[j] = nd;
          changed = true;
        }
      }
    }
  }
  return d[s.linear(end)];
}

inline GridIndex brute_window_argmin(const ScalarGrid& pred, const GridIndex& c, int r) {
  const Shape& s = pred.shape();
  GridIndex best{};
  bool have = false;
  for (std::size_t i = 0; i < s.size(); ++i) {
    const GridIndex q = s.unravel(i);
    if (std::abs(q.y - c.y) > r || std::abs(q.x - c.x) > r) continue;
    if (s.ndim() == 3 && std::abs(q.z - c.z) > r) continue;
    if (!have || pred[i] < pred.at(best)) {
      best = q;
      have = true;
    }
  }
  return best;
}

// Every cell within `radius` of a listed cell is raised to at least `value`.
inline void raise_around(ScalarGrid& map, const std::vector<GridIndex>& cells, double radius, float value) {
  const Shape& s = map.shape();
  for (std::size_t i = 0; i < s.size(); ++i)
    for (const auto& c : cells)
      if (sq_dist(s.unravel(i), c) <= radius * radius) {
        map[i] = std::max(map[i], value);
        break;
      }
}

struct Fixture {
  GroundTruthGraph graph;
  BinaryMask mask;
  ScalarGrid map;
};

inline Fixture fixture_from(int ndim, const Shape& shape, std::vector<Point> nodes,
                            const std::vector<std::pair<NodeId, NodeId>>& edges) {
  Fixture f;
  f.graph = GroundTruthGraph::from_coordinates(ndim, std::move(nodes), edges);
  f.mask = BinaryMask(shape);
  for (const auto& e : f.graph.edges()) {
    const std::vector<Point> seg{f.graph.node(e.a), f.graph.node(e.b)};
    const auto m = rasterize_polyline(seg, shape);
    for (std::size_t i : m.foreground()) f.mask.set(i);
  }
  f.map = distance_transform(f.mask);
  return f;
}

// Straight horizontal line from (32,10) to (32,110) on a 64x128 grid.
inline Fixture line_fixture() {
  return fixture_from(2, Shape{64, 128}, {{0, 32, 10}, {0, 32, 110}}, {{0, 1}});
}

// Columns [x0, x0 + k) raised to at least c across the whole grid, so any
// route from one side to the other pays at least k * c^2.
inline ScalarGrid with_cross_section_gap(const ScalarGrid& map, std::int64_t x0, std::int64_t k, float c) {
  ScalarGrid out = map;
  const Shape& s = map.shape();
  for (std::size_t i = 0; i < s.size(); ++i) {
    const auto x = s.unravel(i).x;
    if (x >= x0 && x < x0 + k) out[i] = std::max(out[i], c);
  }
  return out;
}

// Loop A-B-D-C on a 64x96 grid; A(32,20) B(32,60) C(8,20) D(8,60). The
// corrupted map carries a gap in the middle of A-B: eight centreline cells
// and everything within 2 px of them raised to 5.
struct LoopWithGap {
  Fixture clean;
  ScalarGrid corrupted;
  std::vector<GridIndex> gap_cells;
  NodeId a = 0, b = 1;
};

inline LoopWithGap loop_with_gap() {
  LoopWithGap f;
  f.clean = fixture_from(2, Shape{64, 96}, {{0, 32, 20}, {0, 32, 60}, {0, 8, 20}, {0, 8, 60}},
                         {{0, 1}, {0, 2}, {2, 3}, {3, 1}});
  for (std::int64_t x = 36; x < 44; ++x) f.gap_cells.push_back({0, 32, x});
  f.corrupted = f.clean.map;
  raise_around(f.corrupted, f.gap_cells, 2.0, 5.0f);
  return f;
}

}  // namespace cape::testing
