#include "cape/bridge.hpp"

#include "cape/error.hpp"

namespace cape {

const char* version() { return "1.0.0"; }

namespace {

Shape checked_shape(std::span<const std::size_t> shape) {
  if (shape.size() != 2 && shape.size() != 3) {
    throw Error(ErrorKind::unsupported_dimensionality, "shape must have 2 or 3 extents, got " +
                                                           std::to_string(shape.size()));
  }
  for (auto e : shape)
    if (e == 0) throw Error(ErrorKind::invalid_argument, "shape has a zero extent");
  return Shape(shape);
}

}  // namespace

GroundTruthGraph bridge_graph(int ndim, const BridgeGraph& graph) {
  const auto d = static_cast<std::size_t>(ndim);
  if (graph.coords.size() % d != 0) {
    throw Error(ErrorKind::invalid_argument, "node coordinate buffer is not a multiple of ndim");
  }
  if (graph.edges.size() % 2 != 0) throw Error(ErrorKind::invalid_argument, "edge buffer has odd length");
  std::vector<Point> nodes;
  for (std::size_t i = 0; i < graph.coords.size(); i += d) {
    nodes.push_back(ndim == 3 ? Point{graph.coords[i], graph.coords[i + 1], graph.coords[i + 2]}
                              : Point{0.0, graph.coords[i], graph.coords[i + 1]});
  }
  std::vector<std::pair<NodeId, NodeId>> edges;
  for (std::size_t i = 0; i < graph.edges.size(); i += 2) {
    const auto a = graph.edges[i], b = graph.edges[i + 1];
    if (a < 0 || b < 0 || static_cast<std::size_t>(a) >= nodes.size() ||
        static_cast<std::size_t>(b) >= nodes.size()) {
      throw Error(ErrorKind::invalid_argument, "edge " + std::to_string(i / 2) + " refers to a missing node");
    }
    edges.emplace_back(static_cast<NodeId>(a), static_cast<NodeId>(b));
  }
  return GroundTruthGraph::from_coordinates(ndim, std::move(nodes), edges);
}

BridgePaths prepare_paths(std::span<const std::size_t> shape, const BridgeGraph& graph, const CapeConfig& cfg) {
  const Shape s = checked_shape(shape);
  const auto g = bridge_graph(s.ndim(), graph);
  BridgePaths out;
  out.paths_ = std::make_shared<const PathSet>(PathSet::build(g, s, cfg));
  out.seed_ = cfg.seed;
  return out;
}

BridgeResult forward_backward(std::span<const float> pred, std::span<const std::size_t> shape,
                              const BridgeGraph& graph, const CapeConfig& cfg, const BridgePaths* fixed) {
  const Shape s = checked_shape(shape);
  if (pred.size() != s.size()) {
    throw Error(ErrorKind::shape_mismatch, "buffer holds " + std::to_string(pred.size()) + " values but shape " +
                                               to_string(s) + " needs " + std::to_string(s.size()));
  }
  const auto g = bridge_graph(s.ndim(), graph);
  ScalarGrid grid(s, std::vector<float>(pred.begin(), pred.end()));
  require_distance_map(grid, "prediction");
  const CapeResult r = fixed ? cape_forward(g, grid, fixed->paths(), cfg) : cape_forward(g, grid, cfg);
  const auto grad = r.gradient.values();
  return {r.total_loss, std::vector<float>(grad.begin(), grad.end())};
}

}  // namespace cape
