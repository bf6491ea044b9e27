#pragma once

#include <cstddef>
#include <cstdint>
#include <random>
#include <span>
#include <utility>
#include <vector>

#include "cape/grid.hpp"

namespace cape {

using NodeId = std::size_t;
using EdgeId = std::size_t;

struct Edge {
  NodeId a = 0;
  NodeId b = 0;
  double weight = 0.0;
};

/// Geometric graph with undirected, positively weighted edges.
///
/// Graphs built from coordinates (JSON, synthetic samples) carry Euclidean
/// edge weights. Graphs extracted from masks may carry the accumulated step
/// length of the chain an edge stands for, see graph_from_mask().
class GroundTruthGraph {
 public:
  struct Neighbour {
    NodeId node;
    EdgeId edge;
  };

  GroundTruthGraph() = default;

  /// Euclidean weights derived from node coordinates.
  static GroundTruthGraph from_coordinates(int ndim, std::vector<Point> nodes,
                                           std::span<const std::pair<NodeId, NodeId>> edges);

  /// Explicit weights; each must be positive.
  static GroundTruthGraph with_weights(int ndim, std::vector<Point> nodes, std::vector<Edge> edges);

  int ndim() const { return ndim_; }
  std::size_t node_count() const { return nodes_.size(); }
  std::size_t edge_count() const { return edges_.size(); }
  bool empty() const { return nodes_.empty(); }

  const Point& node(NodeId n) const { return nodes_[n]; }
  const std::vector<Point>& nodes() const { return nodes_; }
  const Edge& edge(EdgeId e) const { return edges_[e]; }
  const std::vector<Edge>& edges() const { return edges_; }
  std::span<const Neighbour> neighbours(NodeId n) const { return adjacency_[n]; }

  /// Throws out_of_bounds if a node rounds to a cell outside the shape.
  void require_within(const Shape& shape) const;

 private:
  void build_adjacency();

  int ndim_ = 2;
  std::vector<Point> nodes_;
  std::vector<Edge> edges_;
  std::vector<std::vector<Neighbour>> adjacency_;
};

/// Subset of a graph's edges still to be processed.
class EdgeSet {
 public:
  EdgeSet() = default;
  /// All edges of g present.
  explicit EdgeSet(const GroundTruthGraph& g);
  EdgeSet(std::size_t universe, bool full);

  bool contains(EdgeId e) const { return live_[e] != 0; }
  void erase(EdgeId e);
  std::size_t size() const { return count_; }
  bool empty() const { return count_ == 0; }
  std::size_t universe() const { return live_.size(); }
  std::vector<EdgeId> members() const;

  bool operator==(const EdgeSet&) const = default;

 private:
  std::vector<std::uint8_t> live_;
  std::size_t count_ = 0;
};

struct GraphPath {
  std::vector<NodeId> nodes;
  std::vector<EdgeId> edges;
  double length = 0.0;
};

/// Minimum-weight path over the edges in `live` (all edges when null).
/// Among equal-length paths the lexicographically smallest node sequence wins.
GraphPath graph_dijkstra(const GroundTruthGraph& g, NodeId from, NodeId to, const EdgeSet* live = nullptr);

/// Shortest-path lengths from `source` to every node; +inf when unreachable.
std::vector<double> shortest_path_lengths(const GroundTruthGraph& g, NodeId source, const EdgeSet* live = nullptr);

/// Component label per node (in the subgraph of `live` edges when given).
/// Labels are dense and numbered in order of the smallest node id.
std::vector<std::size_t> connected_components(const GroundTruthGraph& g, const EdgeSet* live = nullptr);

inline constexpr int kPairSampleRetries = 64;

/// Two distinct vertices connected through `live` edges. Draws vertices
/// uniformly from those incident to live edges and retries until the pair is
/// connected; after kPairSampleRetries failures falls back to the endpoints
/// of a uniformly drawn live edge.
std::pair<NodeId, NodeId> sample_pair(const GroundTruthGraph& g, const EdgeSet& live, std::mt19937_64& rng);

EdgeSet remove_path_edges(EdgeSet live, const GraphPath& path);

}  // namespace cape
