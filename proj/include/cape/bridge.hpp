#pragma once

// Entry points for host-language bindings: flat buffers in, flat buffers out.
// Nothing is cached between calls; callers that want to keep the sampled
// paths across a forward/backward pair hold on to a BridgePaths handle.

#include <cstddef>
#include <cstdint>
#include <memory>
#include <span>
#include <vector>

#include "cape/cape_loss.hpp"

namespace cape {

const char* version();

struct BridgeGraph {
  std::span<const double> coords;        // node_count x ndim, row-major ([y,x] or [z,y,x])
  std::span<const std::int64_t> edges;   // edge_count x 2
};

/// Sampled paths frozen for a given graph, shape and seed.
class BridgePaths {
 public:
  const PathSet& paths() const { return *paths_; }
  std::uint64_t seed() const { return seed_; }

 private:
  friend BridgePaths prepare_paths(std::span<const std::size_t>, const BridgeGraph&, const CapeConfig&);
  std::shared_ptr<const PathSet> paths_;
  std::uint64_t seed_ = 0;
};

struct BridgeResult {
  double loss = 0.0;
  std::vector<float> gradient;  // same layout as the input buffer
};

GroundTruthGraph bridge_graph(int ndim, const BridgeGraph& graph);

BridgePaths prepare_paths(std::span<const std::size_t> shape, const BridgeGraph& graph, const CapeConfig& cfg);

/// Loss and gradient for a row-major float buffer. Throws cape::Error on
/// malformed input.
BridgeResult forward_backward(std::span<const float> pred, std::span<const std::size_t> shape,
                              const BridgeGraph& graph, const CapeConfig& cfg, const BridgePaths* fixed = nullptr);

}  // namespace cape
