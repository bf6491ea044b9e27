#include "cape/skeleton.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <map>
#include <set>

#include "cape/error.hpp"

namespace cape {

namespace {

// Neighbourhood in Zhang-Suen order P2..P9: N, NE, E, SE, S, SW, W, NW.
constexpr std::array<std::array<int, 2>, 8> kRing{{{-1, 0}, {-1, 1}, {0, 1}, {1, 1}, {1, 0}, {1, -1}, {0, -1}, {-1, -1}}};

struct Ring {
  std::array<int, 8> p{};
  int count = 0;
  int transitions = 0;
};

Ring ring_at(const BinaryMask& m, std::int64_t y, std::int64_t x) {
  Ring r;
  const Shape& s = m.shape();
  for (std::size_t i = 0; i < 8; ++i) {
    const GridIndex q{0, y + kRing[i][0], x + kRing[i][1]};
    r.p[i] = s.contains(q) && m.test(q) ? 1 : 0;
    r.count += r.p[i];
  }
  for (std::size_t i = 0; i < 8; ++i)
    if (r.p[i] == 0 && r.p[(i + 1) % 8] == 1) ++r.transitions;
  return r;
}

bool removable(const Ring& r, int pass) {
  if (r.count < 2 || r.count > 6 || r.transitions != 1) return false;
  const int n = r.p[0], e = r.p[2], s = r.p[4], w = r.p[6];
  if (pass == 0) return n * e * s == 0 && e * s * w == 0;
  return n * e * w == 0 && n * s * w == 0;
}

// 8-connectivity number of the centre cell (Yokoi). Removing the cell keeps
// the topology of an 8-connected foreground iff this is 1.
int connectivity_number(const Ring& r) {
  int n = 0;
  for (std::size_t k = 0; k < 8; k += 2) {
    const int a = 1 - r.p[k], b = 1 - r.p[(k + 1) % 8], c = 1 - r.p[(k + 2) % 8];
    n += a - a * b * c;
  }
  return n;
}

int l1(const GridIndex& a, const GridIndex& b) {
  return static_cast<int>(std::abs(a.z - b.z) + std::abs(a.y - b.y) + std::abs(a.x - b.x));
}

bool chebyshev_adjacent(const GridIndex& a, const GridIndex& b) {
  return a != b && std::abs(a.z - b.z) <= 1 && std::abs(a.y - b.y) <= 1 && std::abs(a.x - b.x) <= 1;
}

Point cell_point(const Shape& s, std::size_t lin) {
  const GridIndex g = s.unravel(lin);
  return {static_cast<double>(g.z), static_cast<double>(g.y), static_cast<double>(g.x)};
}

}  // namespace

double step_length(const GridIndex& a, const GridIndex& b) { return std::sqrt(static_cast<double>(l1(a, b))); }

BinaryMask skeletonize_2d(const BinaryMask& mask) {
  if (mask.shape().ndim() != 2) {
    throw Error(ErrorKind::unsupported_dimensionality, "skeletonize_2d: unsupported dimensionality (3D input)");
  }
  BinaryMask img = mask;
  const Shape& s = img.shape();
  const auto H = static_cast<std::int64_t>(s.rows()), W = static_cast<std::int64_t>(s.cols());
  bool changed = true;
  std::vector<GridIndex> marked;
  while (changed) {
    changed = false;
    for (int pass = 0; pass < 2; ++pass) {
      marked.clear();
      for (std::int64_t y = 0; y < H; ++y)
        for (std::int64_t x = 0; x < W; ++x)
          if (img.test({0, y, x}) && removable(ring_at(img, y, x), pass)) marked.push_back({0, y, x});
      for (const auto& c : marked) {
        if (removable(ring_at(img, c.y, c.x), pass)) {
          img.set(c, false);
          changed = true;
        }
      }
    }
  }
  return img;
}

BinaryMask thin_by_priority(const BinaryMask& mask, const ScalarGrid& priority) {
  if (mask.shape().ndim() != 2) {
    throw Error(ErrorKind::unsupported_dimensionality, "thin_by_priority: unsupported dimensionality (3D input)");
  }
  if (priority.shape() != mask.shape()) throw Error(ErrorKind::shape_mismatch, "thin_by_priority: shapes differ");
  BinaryMask img = mask;
  const Shape& s = img.shape();
  const auto fg = [&](const GridIndex& g) { return s.contains(g) && img.test(g); };
  const auto border = [&](const GridIndex& g) {
    return !fg({0, g.y - 1, g.x}) || !fg({0, g.y + 1, g.x}) || !fg({0, g.y, g.x - 1}) || !fg({0, g.y, g.x + 1});
  };
  std::vector<std::size_t> candidates;
  for (bool changed = true; changed;) {
    changed = false;
    candidates.clear();
    for (std::size_t lin : img.foreground())
      if (border(s.unravel(lin))) candidates.push_back(lin);
    std::stable_sort(candidates.begin(), candidates.end(),
                     [&](std::size_t a, std::size_t b) { return priority[a] > priority[b]; });
    for (std::size_t lin : candidates) {
      const GridIndex c = s.unravel(lin);
      const Ring r = ring_at(img, c.y, c.x);
      if (connectivity_number(r) != 1) continue;
      bool downhill = false;
      for (std::size_t i = 0; i < 8 && !downhill; ++i) {
        const GridIndex q{0, c.y + kRing[i][0], c.x + kRing[i][1]};
        downhill = r.p[i] && priority.at(q) < priority[lin];
      }
      if (!downhill) continue;
      img.set(lin, false);
      changed = true;
    }
  }
  return img;
}

std::vector<std::vector<std::size_t>> thin_adjacency(const BinaryMask& mask) {
  const Shape& s = mask.shape();
  const auto offsets = neighbour_offsets(s.ndim());
  std::vector<std::vector<std::size_t>> adj(s.size());
  const auto fg = [&](const GridIndex& g) { return s.contains(g) && mask.test(g); };
  for (std::size_t lin : mask.foreground()) {
    const GridIndex p = s.unravel(lin);
    for (const auto& o : offsets) {
      const GridIndex q{p.z + o.z, p.y + o.y, p.x + o.x};
      if (!fg(q)) continue;
      const int pq = l1(p, q);
      bool bridged = false;
      if (pq > 1) {
        for (const auto& o2 : offsets) {
          const GridIndex r{p.z + o2.z, p.y + o2.y, p.x + o2.x};
          if (r == q || !fg(r) || !chebyshev_adjacent(r, q)) continue;
          if (l1(p, r) < pq && l1(r, q) < pq) {
            bridged = true;
            break;
          }
        }
      }
      if (!bridged) adj[lin].push_back(s.linear(q));
    }
    std::sort(adj[lin].begin(), adj[lin].end());
  }
  return adj;
}

ChainDecomposition extract_chains(const BinaryMask& mask) {
  const Shape& s = mask.shape();
  const auto adj = thin_adjacency(mask);
  const auto fg = mask.foreground();

  ChainDecomposition out;
  std::vector<std::uint8_t> is_node(s.size(), 0);
  for (std::size_t c : fg) {
    if (adj[c].size() != 2) {
      is_node[c] = 1;
      out.node_cells.push_back(c);
    }
  }

  std::vector<std::uint8_t> visited(s.size(), 0);  // degree-2 cells already on a chain
  std::set<std::pair<std::size_t, std::size_t>> direct;  // node-node links already emitted

  const auto walk = [&](std::size_t start, std::size_t first) {
    Chain ch;
    ch.cells = {start, first};
    ch.length = step_length(s.unravel(start), s.unravel(first));
    std::size_t prev = start, cur = first;
    while (!is_node[cur]) {
      visited[cur] = 1;
      const std::size_t next = adj[cur][0] == prev ? adj[cur][1] : adj[cur][0];
      ch.length += step_length(s.unravel(cur), s.unravel(next));
      ch.cells.push_back(next);
      prev = cur;
      cur = next;
    }
    return ch;
  };

  for (std::size_t n : out.node_cells) {
    for (std::size_t nb : adj[n]) {
      if (is_node[nb]) {
        if (direct.insert(std::minmax(n, nb)).second) out.chains.push_back(walk(n, nb));
      } else if (!visited[nb]) {
        out.chains.push_back(walk(n, nb));
      }
    }
  }

  // Whatever is left are pure cycles; scanning in ascending order makes the
  // first unvisited cell of each cycle its smallest.
  for (std::size_t c : fg) {
    if (is_node[c] || visited[c]) continue;
    is_node[c] = 1;
    out.node_cells.push_back(c);
    out.chains.push_back(walk(c, adj[c][0]));
  }
  std::sort(out.node_cells.begin(), out.node_cells.end());
  return out;
}

GroundTruthGraph graph_from_mask(const BinaryMask& mask, std::size_t max_chain_cells) {
  if (mask.count() == 0) throw Error(ErrorKind::empty_foreground, "graph_from_mask: empty foreground");
  const Shape& s = mask.shape();
  const auto dec = extract_chains(mask);

  std::vector<Point> nodes;
  std::map<std::size_t, NodeId> node_of_cell;
  const auto node_for = [&](std::size_t cell) {
    auto [it, inserted] = node_of_cell.try_emplace(cell, nodes.size());
    if (inserted) nodes.push_back(cell_point(s, cell));
    return it->second;
  };
  for (std::size_t c : dec.node_cells) node_for(c);

  // A piece is a sub-run of a chain's cells; its weight is its step length.
  struct Piece {
    std::vector<std::size_t> cells;
  };
  const auto piece_length = [&](const std::vector<std::size_t>& cells) {
    double len = 0.0;
    for (std::size_t i = 0; i + 1 < cells.size(); ++i) len += step_length(s.unravel(cells[i]), s.unravel(cells[i + 1]));
    return len;
  };
  const auto cut = [](const std::vector<std::size_t>& cells, std::vector<std::size_t> at) {
    std::vector<Piece> out;
    std::size_t from = 0;
    at.push_back(cells.size() - 1);
    for (std::size_t k : at) {
      if (k <= from) continue;
      out.push_back({{cells.begin() + static_cast<std::ptrdiff_t>(from), cells.begin() + static_cast<std::ptrdiff_t>(k) + 1}});
      from = k;
    }
    return out;
  };

  std::vector<Piece> pieces;
  for (const auto& ch : dec.chains) {
    std::vector<std::size_t> at;
    if (max_chain_cells > 0)
      for (std::size_t k = max_chain_cells; k + 1 < ch.cells.size(); k += max_chain_cells) at.push_back(k);
    for (auto& p : cut(ch.cells, at)) pieces.push_back(std::move(p));
  }
  // Single-step pieces first: they are unique links, so any collision is
  // resolved on a longer piece that has interior cells to split at.
  std::stable_sort(pieces.begin(), pieces.end(),
                   [](const Piece& a, const Piece& b) { return (a.cells.size() == 2) > (b.cells.size() == 2); });

  std::vector<Edge> edges;
  std::set<std::pair<NodeId, NodeId>> used;
  const auto emit = [&](const std::vector<std::size_t>& cells) {
    const NodeId a = node_for(cells.front()), b = node_for(cells.back());
    used.insert(std::minmax(a, b));
    edges.push_back({a, b, piece_length(cells)});
  };
  for (const auto& p : pieces) {
    const std::size_t steps = p.cells.size() - 1;
    const bool loop = p.cells.front() == p.cells.back();
    const NodeId a = node_for(p.cells.front()), b = node_for(p.cells.back());
    if (loop) {
      // A cycle of cells has at least 3 steps.
      for (auto& sub : cut(p.cells, {steps / 3, (2 * steps) / 3})) emit(sub.cells);
    } else if (used.count(std::minmax(a, b))) {
      for (auto& sub : cut(p.cells, {steps / 2})) emit(sub.cells);
    } else {
      emit(p.cells);
    }
  }
  return GroundTruthGraph::with_weights(s.ndim(), std::move(nodes), std::move(edges));
}

GroundTruthGraph with_euclidean_weights(const GroundTruthGraph& g) {
  std::vector<std::pair<NodeId, NodeId>> pairs;
  pairs.reserve(g.edge_count());
  for (const auto& e : g.edges()) pairs.emplace_back(e.a, e.b);
  return GroundTruthGraph::from_coordinates(g.ndim(), g.nodes(), pairs);
}

}  // namespace cape
