#pragma once

// Connectivity-aware path loss on predicted distance maps.
//
// Ground-truth paths are drawn from the graph until every edge has been
// covered once. For each path the two endpoints are moved to the smallest
// prediction in a small window, the graph path is rendered and dilated into
// a corridor, and the cheapest pixel path inside the corridor is found with
// a node-weighted Dijkstra where entering cell n costs pred(n)^p. The loss is
// the sum of those path costs; a disconnection along a path shows up as
// large distance values that the cheapest route cannot avoid.

#include <cstdint>
#include <span>
#include <vector>

#include "cape/graph.hpp"
#include "cape/grid.hpp"

namespace cape {

struct CapeConfig {
  int window_radius = 3;           // 7x7 (7x7x7) projection window
  double dilation_radius = 10.0;   // corridor half-width, Euclidean
  double cost_exponent = 2.0;
  double alpha = 1.0;              // weight of the path term in total_loss()
  std::uint64_t seed = 0;
  bool mask_paths = true;          // false searches the whole grid
  unsigned threads = 1;            // 0: all hardware threads

  /// 8 in 2D, 26 in 3D.
  static int connectivity(int ndim) { return ndim == 3 ? 26 : 8; }

  void validate() const;
};

struct PixelPath {
  std::vector<GridIndex> cells;  // start to end, Chebyshev steps
  double cost = 0.0;
};

struct PathRecord {
  NodeId v1 = 0;
  NodeId v2 = 0;
  GridIndex v1_projected;
  GridIndex v2_projected;
  GraphPath graph_path;
  PixelPath pixel_path;
  double loss = 0.0;
};

struct CapeResult {
  double total_loss = 0.0;
  std::vector<PathRecord> records;
  ScalarGrid gradient;
};

/// v^p, with the square computed as v * v.
double cell_cost(double value, double exponent);
/// d(v^p)/dv. At v == 0 this is 1 for p == 1 and 0 otherwise (including p < 1,
/// where the true derivative is unbounded).
double cell_cost_derivative(double value, double exponent);

/// Argmin of pred over the (2r+1)^d window around the rounded vertex,
/// clipped to the grid. Ties go to the smallest linear index.
GridIndex project_vertex(const ScalarGrid& pred, const Point& v, int window_radius);

/// Cheapest Chebyshev-connected route from start to end over cells with
/// mask = 1 (every cell when mask is null). The start cell is charged once.
/// Heap order is (cost, linear index, insertion order).
PixelPath masked_grid_dijkstra(const ScalarGrid& pred, const BinaryMask* mask, const GridIndex& start,
                               const GridIndex& end, double exponent);

double path_cost(const ScalarGrid& pred, std::span<const GridIndex> path, double exponent);

/// One ground-truth path chosen by the sampling loop.
struct SampledPath {
  NodeId v1 = 0;
  NodeId v2 = 0;
  GraphPath graph_path;
};

/// The sequential half of the loss: repeatedly sample a connected pair over
/// the remaining edges, take the graph shortest path and retire its edges.
/// Every edge ends up on exactly one returned path.
std::vector<SampledPath> sample_paths(const GroundTruthGraph& g, std::uint64_t seed);

/// Sampled paths together with their dilated corridors. Reusing one
/// PathSet across calls keeps the path selection fixed while the
/// prediction changes.
struct PathSet {
  Shape shape;
  std::vector<SampledPath> paths;
  std::vector<BinaryMask> corridors;  // empty when masking is disabled

  static PathSet build(const GroundTruthGraph& g, const Shape& shape, const CapeConfig& cfg);
};

/// Render of a graph path: the polyline through its node coordinates.
BinaryMask render_graph_path(const GroundTruthGraph& g, const GraphPath& path, const Shape& shape);

/// Projection, corridor snapping and pixel search for one sampled path.
PathRecord evaluate_path(const GroundTruthGraph& g, const ScalarGrid& pred, const SampledPath& sp,
                         const BinaryMask* corridor, const CapeConfig& cfg);

CapeResult cape_forward(const GroundTruthGraph& g, const ScalarGrid& pred, const CapeConfig& cfg);
CapeResult cape_forward(const GroundTruthGraph& g, const ScalarGrid& pred, const PathSet& paths,
                        const CapeConfig& cfg);

/// Gradient of the loss with each selected pixel path held fixed.
ScalarGrid cape_backward(const CapeResult& result, const ScalarGrid& pred, const CapeConfig& cfg);

struct CombinedLoss {
  double total = 0.0;
  double mse = 0.0;
  double cape = 0.0;
  ScalarGrid gradient;
};

/// mean((gt - pred)^2) + alpha * cape, with its gradient.
CombinedLoss total_loss(const ScalarGrid& gt_map, const ScalarGrid& pred, const GroundTruthGraph& g,
                        const CapeConfig& cfg);

}  // namespace cape
