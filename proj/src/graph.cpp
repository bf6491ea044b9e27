#include "cape/graph.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <queue>
#include <set>

#include "cape/error.hpp"

namespace cape {

GroundTruthGraph GroundTruthGraph::from_coordinates(int ndim, std::vector<Point> nodes,
                                                    std::span<const std::pair<NodeId, NodeId>> edges) {
  std::vector<Edge> weighted;
  weighted.reserve(edges.size());
  for (const auto& [a, b] : edges) {
    if (a >= nodes.size() || b >= nodes.size()) {
      throw Error(ErrorKind::invalid_argument, "edge (" + std::to_string(a) + ", " + std::to_string(b) +
                                                   ") references a missing node");
    }
    weighted.push_back({a, b, distance(nodes[a], nodes[b])});
  }
  return with_weights(ndim, std::move(nodes), std::move(weighted));
}

GroundTruthGraph GroundTruthGraph::with_weights(int ndim, std::vector<Point> nodes, std::vector<Edge> edges) {
  if (ndim != 2 && ndim != 3) {
    throw Error(ErrorKind::unsupported_dimensionality, "graph ndim must be 2 or 3");
  }
  std::set<std::pair<NodeId, NodeId>> seen;
  for (const auto& e : edges) {
    const std::string tag = "edge (" + std::to_string(e.a) + ", " + std::to_string(e.b) + ")";
    if (e.a >= nodes.size() || e.b >= nodes.size())
      throw Error(ErrorKind::invalid_argument, tag + " references a missing node");
    if (e.a == e.b) throw Error(ErrorKind::invalid_argument, tag + " is a self-loop");
    if (!(e.weight > 0.0) || !std::isfinite(e.weight))
      throw Error(ErrorKind::invalid_argument, tag + " must have a positive finite weight");
    if (!seen.insert(std::minmax(e.a, e.b)).second)
      throw Error(ErrorKind::invalid_argument, tag + " is duplicated");
  }
  for (const auto& p : nodes) {
    if (!std::isfinite(p.x) || !std::isfinite(p.y) || !std::isfinite(p.z) || (ndim == 2 && p.z != 0.0))
      throw Error(ErrorKind::invalid_argument, "graph node has invalid coordinates");
  }
  GroundTruthGraph g;
  g.ndim_ = ndim;
  g.nodes_ = std::move(nodes);
  g.edges_ = std::move(edges);
  g.build_adjacency();
  return g;
}

void GroundTruthGraph::build_adjacency() {
  adjacency_.assign(nodes_.size(), {});
  for (EdgeId e = 0; e < edges_.size(); ++e) {
    adjacency_[edges_[e].a].push_back({edges_[e].b, e});
    adjacency_[edges_[e].b].push_back({edges_[e].a, e});
  }
  for (auto& adj : adjacency_)
    std::sort(adj.begin(), adj.end(), [](const Neighbour& l, const Neighbour& r) { return l.node < r.node; });
}

void GroundTruthGraph::require_within(const Shape& shape) const {
  if (shape.ndim() != ndim_) {
    throw Error(ErrorKind::shape_mismatch, "graph is " + std::to_string(ndim_) + "D but grid is " +
                                               std::to_string(shape.ndim()) + "D");
  }
  for (NodeId n = 0; n < nodes_.size(); ++n) {
    const auto idx = round_point(nodes_[n]);
    if (!shape.contains(idx)) {
      throw Error(ErrorKind::out_of_bounds,
                  "graph node " + std::to_string(n) + " at " + to_string(idx) + " outside grid " + to_string(shape));
    }
  }
}

EdgeSet::EdgeSet(const GroundTruthGraph& g) : EdgeSet(g.edge_count(), true) {}

EdgeSet::EdgeSet(std::size_t universe, bool full) : live_(universe, full ? 1 : 0), count_(full ? universe : 0) {}

void EdgeSet::erase(EdgeId e) {
  if (live_[e]) {
    live_[e] = 0;
    --count_;
  }
}

std::vector<EdgeId> EdgeSet::members() const {
  std::vector<EdgeId> out;
  out.reserve(count_);
  for (EdgeId e = 0; e < live_.size(); ++e)
    if (live_[e]) out.push_back(e);
  return out;
}

namespace {

bool edge_usable(const EdgeSet* live, EdgeId e) { return live == nullptr || live->contains(e); }

void require_node(const GroundTruthGraph& g, NodeId n) {
  if (n >= g.node_count()) throw Error(ErrorKind::invalid_argument, "node id " + std::to_string(n) + " out of range");
}

}  // namespace

std::vector<double> shortest_path_lengths(const GroundTruthGraph& g, NodeId source, const EdgeSet* live) {
  require_node(g, source);
  std::vector<double> dist(g.node_count(), std::numeric_limits<double>::infinity());
  using Item = std::pair<double, NodeId>;
  std::priority_queue<Item, std::vector<Item>, std::greater<>> heap;
  dist[source] = 0.0;
  heap.push({0.0, source});
  while (!heap.empty()) {
    const auto [d, u] = heap.top();
    heap.pop();
    if (d > dist[u]) continue;
    for (const auto& nb : g.neighbours(u)) {
      if (!edge_usable(live, nb.edge)) continue;
      const double nd = d + g.edge(nb.edge).weight;
      if (nd < dist[nb.node]) {
        dist[nb.node] = nd;
        heap.push({nd, nb.node});
      }
    }
  }
  return dist;
}

GraphPath graph_dijkstra(const GroundTruthGraph& g, NodeId from, NodeId to, const EdgeSet* live) {
  require_node(g, from);
  require_node(g, to);
  if (from == to) throw Error(ErrorKind::invalid_argument, "path endpoints must differ");

  // Distances to the target let us walk forward greedily, always taking the
  // smallest next node that stays on some shortest path.
  const auto to_target = shortest_path_lengths(g, to, live);
  if (!std::isfinite(to_target[from])) {
    throw Error(ErrorKind::unreachable,
                "nodes " + std::to_string(from) + " and " + std::to_string(to) + " are unreachable from each other");
  }
  const auto tight = [](double lhs, double rhs) {
    return std::abs(lhs - rhs) <= 1e-9 * std::max(1.0, std::abs(lhs));
  };

  GraphPath path;
  path.nodes.push_back(from);
  NodeId cur = from;
  while (cur != to) {
    bool advanced = false;
    for (const auto& nb : g.neighbours(cur)) {  // sorted by node id
      if (!edge_usable(live, nb.edge)) continue;
      const double w = g.edge(nb.edge).weight;
      if (to_target[nb.node] < to_target[cur] && tight(to_target[cur], w + to_target[nb.node])) {
        path.nodes.push_back(nb.node);
        path.edges.push_back(nb.edge);
        path.length += w;
        cur = nb.node;
        advanced = true;
        break;
      }
    }
    if (!advanced) throw Error(ErrorKind::unreachable, "shortest-path reconstruction failed");
  }
  return path;
}

std::vector<std::size_t> connected_components(const GroundTruthGraph& g, const EdgeSet* live) {
  constexpr auto unset = std::numeric_limits<std::size_t>::max();
  std::vector<std::size_t> label(g.node_count(), unset);
  std::size_t next = 0;
  std::vector<NodeId> stack;
  for (NodeId s = 0; s < g.node_count(); ++s) {
    if (label[s] != unset) continue;
    label[s] = next;
    stack.push_back(s);
    while (!stack.empty()) {
      const NodeId u = stack.back();
      stack.pop_back();
      for (const auto& nb : g.neighbours(u)) {
        if (edge_usable(live, nb.edge) && label[nb.node] == unset) {
          label[nb.node] = next;
          stack.push_back(nb.node);
        }
      }
    }
    ++next;
  }
  return label;
}

std::pair<NodeId, NodeId> sample_pair(const GroundTruthGraph& g, const EdgeSet& live, std::mt19937_64& rng) {
  if (live.empty()) throw Error(ErrorKind::invalid_argument, "sample_pair: no live edges");
  const auto members = live.members();

  std::vector<NodeId> incident;
  for (EdgeId e : members) {
    incident.push_back(g.edge(e).a);
    incident.push_back(g.edge(e).b);
  }
  std::sort(incident.begin(), incident.end());
  incident.erase(std::unique(incident.begin(), incident.end()), incident.end());

  const auto label = connected_components(g, &live);
  std::uniform_int_distribution<std::size_t> pick(0, incident.size() - 1);
  for (int attempt = 0; attempt < kPairSampleRetries; ++attempt) {
    const NodeId a = incident[pick(rng)];
    const NodeId b = incident[pick(rng)];
    if (a != b && label[a] == label[b]) return {a, b};
  }
  std::uniform_int_distribution<std::size_t> pick_edge(0, members.size() - 1);
  const Edge& e = g.edge(members[pick_edge(rng)]);
  return {e.a, e.b};
}

EdgeSet remove_path_edges(EdgeSet live, const GraphPath& path) {
  for (EdgeId e : path.edges) live.erase(e);
  return live;
}

}  // namespace cape
