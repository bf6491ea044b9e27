#pragma once

#include <cstddef>
#include <vector>

#include "cape/graph.hpp"
#include "cape/grid.hpp"

namespace cape {

/// Zhang-Suen thinning. Candidates of each sub-iteration are re-validated
/// one at a time before removal, which keeps the number of 8-connected
/// components unchanged (plain parallel Zhang-Suen erases 2x2 blocks).
BinaryMask skeletonize_2d(const BinaryMask& mask);

/// Topology-preserving thinning that peels border cells in order of
/// decreasing priority, removing a cell only when a foreground neighbour has
/// a lower priority. On a distance map this strips the flanks of each valley
/// and leaves its floor intact, tips included. Flat plateaus are left for
/// skeletonize_2d.
BinaryMask thin_by_priority(const BinaryMask& mask, const ScalarGrid& priority);

/// Cell adjacency of a thin structure. Two Chebyshev neighbours are linked
/// unless a third foreground cell bridges them with two strictly shorter
/// (fewer changed axes) steps; this drops the redundant diagonal of every
/// staircase corner so that centreline cells have exactly two links.
std::vector<std::vector<std::size_t>> thin_adjacency(const BinaryMask& mask);

/// Maximal run of degree-2 cells between two node cells. cells.front() and
/// cells.back() are node cells (equal for a cycle anchored on one node).
struct Chain {
  std::vector<std::size_t> cells;
  double length = 0.0;  // accumulated step length: 1, sqrt(2), sqrt(3)
};

struct ChainDecomposition {
  std::vector<std::size_t> node_cells;  // ascending linear index
  std::vector<Chain> chains;
};

/// Nodes are cells whose link count is not 2, plus one anchor (smallest
/// linear index) per pure cycle. Every other foreground cell lies on exactly
/// one chain.
ChainDecomposition extract_chains(const BinaryMask& mask);

/// Graph of a thin mask. Node cells become nodes; every chain becomes an
/// edge weighted by its step length. With max_chain_cells > 0 chains are cut
/// into pieces of at most that many steps. Chains that would form a
/// self-loop or repeat an existing node pair get extra nodes on interior
/// cells so the result stays a simple graph.
GroundTruthGraph graph_from_mask(const BinaryMask& mask, std::size_t max_chain_cells = 0);

/// Same node/edge structure with weights replaced by node-to-node Euclidean
/// distances.
GroundTruthGraph with_euclidean_weights(const GroundTruthGraph& g);

double step_length(const GridIndex& a, const GridIndex& b);

}  // namespace cape
