#pragma once

#include <cstdint>
#include <utility>
#include <vector>

#include "cape/cape_loss.hpp"
#include "cape/metrics.hpp"
#include "cape/synth.hpp"

namespace cape {

struct GradCheck {
  double max_rel_error = 0.0;
  std::size_t checked = 0;
  std::size_t skipped = 0;  // the perturbation changed a selected path
};

/// Central differences against cape_backward at up to n_cells cells drawn
/// from the selected pixel paths. The path set is frozen; a cell is only
/// compared when the +h and -h searches pick the same pixel paths as the
/// unperturbed one. Relative error uses max(|analytic|, 1e-6).
GradCheck finite_diff_check(const GroundTruthGraph& g, const ScalarGrid& pred, const CapeConfig& cfg,
                            double h = 1e-3, std::size_t n_cells = 50);

struct RepairConfig {
  int steps = 200;
  double learning_rate = 0.1;
  double alpha = 1.0;
  double prox_weight = 0.01;  // beta, pulls towards the corrupted input
  double clamp_min = 0.0;
  int resample_paths_every = 10;
  PathMetricConfig metric;
  double threshold = kDefaultPredictionThreshold;

  void validate() const;
};

struct RepairStep {
  double total = 0.0;
  double cape = 0.0;
  double apls = 0.0;
};

using RepairTrace = std::vector<RepairStep>;

/// Seed of the k-th path resampling.
std::uint64_t resample_seed(std::uint64_t seed, std::uint64_t k);

/// Gradient descent on beta * |y - y0|^2 + alpha * cape(y), clamped below at
/// clamp_min. The trace holds steps + 1 rows, the first one for y0.
std::pair<ScalarGrid, RepairTrace> repair(const SynthSample& sample, const RepairConfig& rcfg,
                                          const CapeConfig& ccfg);

}  // namespace cape
