#pragma once

#include <cstdint>
#include <filesystem>
#include <random>
#include <vector>

#include "cape/graph.hpp"
#include "cape/grid.hpp"

namespace cape {

struct Structure {
  GroundTruthGraph graph;
  BinaryMask mask;
  std::vector<std::vector<Point>> curves;  // closed curves repeat their first point
};

/// Spacing (in chain steps) between graph nodes of generated structures.
inline constexpr std::size_t kSynthNodeSpacing = 8;
inline constexpr double kSynthMinSeparation = 8.0;

/// Smooth random curves: open random walks with a persistent, bounded turn
/// rate, some starting on an earlier curve (branches), and with probability
/// loop_prob a closed wobbly ellipse instead. New curves stop (or are
/// redrawn) when they come closer than kSynthMinSeparation to existing
/// ones. Deterministic per seed.
Structure gen_structure(std::uint64_t seed, const Shape& shape, int n_curves, double loop_prob);

struct CorruptionEntry {
  std::vector<GridIndex> cells;  // centreline run
  float value = 0.0f;
};

struct Corruption {
  ScalarGrid map;
  std::vector<CorruptionEntry> log;
};

inline constexpr double kGapRadius = 2.0;

/// Raises a run of gap_len centreline cells, and everything within
/// kGapRadius of it, to at least gap_value. Runs are drawn from the middle
/// half of a chain of gt_mask, chains drawn with probability proportional
/// to their length.
Corruption corrupt(const ScalarGrid& gt_map, const BinaryMask& gt_mask, std::mt19937_64& rng, int n_gaps,
                   int gap_len, double gap_value);

struct SynthConfig {
  std::vector<std::size_t> shape{128, 128};
  std::uint64_t seed = 0;
  int n_curves = 3;
  double loop_prob = 0.2;
  int n_gaps = 1;
  int gap_len = 8;
  double gap_value = 5.0;
  double d_max = kDefaultDistanceCap;
};

struct SynthSample {
  GroundTruthGraph graph;
  BinaryMask gt_mask;
  ScalarGrid gt_map;
  ScalarGrid corrupted_map;
  std::vector<CorruptionEntry> corruption_log;
};

SynthSample make_sample(const SynthConfig& cfg);

/// graph.json, gt_mask.cgrd, gt_map.cgrd, corrupted.cgrd, meta.json.
void write_sample(const std::filesystem::path& dir, const SynthSample& sample, const SynthConfig& cfg);
SynthSample read_sample(const std::filesystem::path& dir);

}  // namespace cape
