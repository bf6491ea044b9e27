#pragma once

// File formats:
//
//   CGRD   "CGRD" magic, u8 version (1), u8 ndim (2|3), ndim x u64 LE extents
//          (slowest first), then size x f32 LE values. Masks use 0.0 / 1.0.
//   PGM    binary P5 preview of a 2D grid, linearly scaled to 0..255.
//   Graph  {"ndim":2, "nodes":[[y,x],...], "edges":[[i,j],...]}; 3D nodes
//          are [z,y,x]. Weights are always re-derived from coordinates.

#include <filesystem>
#include <iosfwd>
#include <string>

#include "cape/graph.hpp"
#include "cape/grid.hpp"

namespace cape {

void write_cgrd(std::ostream& os, const ScalarGrid& grid);
void write_cgrd(const std::filesystem::path& path, const ScalarGrid& grid);
void write_cgrd(const std::filesystem::path& path, const BinaryMask& mask);
ScalarGrid read_cgrd(std::istream& is);
ScalarGrid read_cgrd(const std::filesystem::path& path);
/// Nonzero cells become foreground.
BinaryMask read_cgrd_mask(const std::filesystem::path& path);

void write_pgm(const std::filesystem::path& path, const ScalarGrid& grid);

std::string graph_to_json(const GroundTruthGraph& g);
GroundTruthGraph graph_from_json(const std::string& text);
void write_graph(const std::filesystem::path& path, const GroundTruthGraph& g);
GroundTruthGraph read_graph(const std::filesystem::path& path);

std::string read_text(const std::filesystem::path& path);
void write_text(const std::filesystem::path& path, const std::string& text);

}  // namespace cape
