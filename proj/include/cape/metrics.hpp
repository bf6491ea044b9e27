#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "cape/graph.hpp"
#include "cape/grid.hpp"

namespace cape {

double dice(const BinaryMask& pred, const BinaryMask& gt);

struct Ccq {
  double correctness = 0.0;
  double completeness = 0.0;
  double quality = 0.0;
  std::size_t pred_pixels = 0;
  std::size_t gt_pixels = 0;
  std::size_t matched_pred = 0;  // predicted pixels within tolerance of GT
  std::size_t matched_gt = 0;    // GT pixels within tolerance of the prediction
};

/// Correctness / completeness / quality with a Euclidean matching tolerance.
Ccq ccq(const BinaryMask& pred, const BinaryMask& gt, double tolerance = 3.0);

inline constexpr double kDefaultPredictionThreshold = 1.5;

/// Graph of the cells with pred < threshold. 2D predictions are thinned
/// first (valley flanks by value, then Zhang-Suen); 3D voxel sets are used
/// as they are. Chains are cut into pieces of at most max_chain_cells steps
/// (0: one edge per chain); the default matches synthetic ground truth.
inline constexpr std::size_t kPredictionChainCells = 8;
GroundTruthGraph graph_from_prediction(const ScalarGrid& pred, double threshold = kDefaultPredictionThreshold,
                                       std::size_t max_chain_cells = kPredictionChainCells);

struct PathMetricConfig {
  double snap_radius = 5.0;
  std::size_t num_pairs = 200;
  std::uint64_t seed = 0;
  double tlts_tolerance = 0.15;
};

/// Where a ground-truth node lands on the predicted graph: a point on an
/// edge (or an isolated node) at most snap_radius away.
struct Snap {
  EdgeId edge = 0;
  double t = 0.0;  // fraction of the way from edge.a to edge.b
  std::optional<NodeId> isolated;
  double distance = 0.0;
};

/// Nearest location within radius; exact ties go to a location on a node.
std::optional<Snap> snap_to_graph(const GroundTruthGraph& g, const Point& p, double radius);

/// Path length on g between two snapped locations; +inf when disconnected.
double snapped_path_length(const GroundTruthGraph& g, const Snap& from, const Snap& to);

/// Pairs of connected ground-truth nodes; all of them when there are at most
/// num_pairs, otherwise num_pairs distinct pairs drawn with the given seed.
std::vector<std::pair<NodeId, NodeId>> sample_node_pairs(const GroundTruthGraph& gt, std::size_t num_pairs,
                                                         std::uint64_t seed);

struct PathComparison {
  std::size_t pairs = 0;
  std::size_t missing = 0;     // unsnappable endpoint or disconnected prediction
  std::size_t within_tol = 0;  // |Lp - Lg| / Lg < tlts tolerance
  double apls = 0.0;
  double tlts = 0.0;
};

/// Ground truth -> prediction path comparison shared by APLS and TLTS.
PathComparison compare_paths(const GroundTruthGraph& gt, const GroundTruthGraph& pred, const PathMetricConfig& cfg);

double apls(const GroundTruthGraph& gt, const GroundTruthGraph& pred, const PathMetricConfig& cfg = {});
double tlts(const GroundTruthGraph& gt, const GroundTruthGraph& pred, const PathMetricConfig& cfg = {});

struct MetricReport {
  double dice = 0.0;
  Ccq ccq;
  PathComparison paths;
};

struct MetricConfig {
  double ccq_tolerance = 3.0;
  double threshold = kDefaultPredictionThreshold;
  PathMetricConfig path;
};

MetricReport evaluate(const GroundTruthGraph& gt_graph, const BinaryMask& gt_mask, const ScalarGrid& pred,
                      const MetricConfig& cfg = {});

/// Fixed key order; headline scores x100 with one decimal.
std::string report_to_json(const MetricReport& r);

}  // namespace cape
