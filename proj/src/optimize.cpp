#include "cape/optimize.hpp"

#include <algorithm>
#include <cmath>
#include <optional>
#include <random>

#include "cape/error.hpp"
#include "cape/parallel.hpp"

namespace cape {

namespace {

double loss_with_override(const CapeResult& base, const ScalarGrid& pred, std::size_t lin, double value,
                          double exponent) {
  const Shape& s = pred.shape();
  double sum = 0.0;
  for (const auto& rec : base.records)
    for (const auto& c : rec.pixel_path.cells) {
      const std::size_t k = s.linear(c);
      sum += cell_cost(k == lin ? value : static_cast<double>(pred[k]), exponent);
    }
  return sum;
}

}  // namespace

GradCheck finite_diff_check(const GroundTruthGraph& g, const ScalarGrid& pred, const CapeConfig& cfg, double h,
                            std::size_t n_cells) {
  if (!(h > 0.0)) throw Error(ErrorKind::invalid_argument, "finite difference step must be > 0");
  for (float v : pred.values())
    if (!std::isfinite(v)) throw Error(ErrorKind::invalid_argument, "finite_diff_check: prediction has non-finite values");

  const PathSet paths = PathSet::build(g, pred.shape(), cfg);
  const CapeResult base = cape_forward(g, pred, paths, cfg);
  const Shape& s = pred.shape();
  const bool masked = cfg.mask_paths && !paths.corridors.empty();

  std::vector<std::size_t> cells;
  for (const auto& rec : base.records)
    for (const auto& c : rec.pixel_path.cells) cells.push_back(s.linear(c));
  std::sort(cells.begin(), cells.end());
  cells.erase(std::unique(cells.begin(), cells.end()), cells.end());
  std::mt19937_64 rng(cfg.seed);
  std::shuffle(cells.begin(), cells.end(), rng);
  if (cells.size() > n_cells) cells.resize(n_cells);

  std::vector<std::optional<double>> errors(cells.size());
  parallel_for(cells.size(), cfg.threads, [&](std::size_t i) {
    const std::size_t lin = cells[i];
    const double v = pred[lin];
    ScalarGrid shifted = pred;
    for (double sign : {1.0, -1.0}) {
      shifted[lin] = static_cast<float>(v + sign * h);
      for (std::size_t r = 0; r < paths.paths.size(); ++r) {
        const auto rec = evaluate_path(g, shifted, paths.paths[r], masked ? &paths.corridors[r] : nullptr, cfg);
        if (rec.pixel_path.cells != base.records[r].pixel_path.cells) return;
      }
    }
    const double fd = (loss_with_override(base, pred, lin, v + h, cfg.cost_exponent) -
                       loss_with_override(base, pred, lin, v - h, cfg.cost_exponent)) /
                      (2.0 * h);
    const double analytic = base.gradient[lin];
    errors[i] = std::abs(fd - analytic) / std::max(std::abs(analytic), 1e-6);
  });

  GradCheck out;
  for (const auto& e : errors) {
    if (!e) {
      ++out.skipped;
      continue;
    }
    ++out.checked;
    out.max_rel_error = std::max(out.max_rel_error, *e);
  }
  return out;
}

void RepairConfig::validate() const {
  if (steps < 1) throw Error(ErrorKind::invalid_argument, "repair steps must be >= 1");
  if (!(learning_rate > 0.0)) throw Error(ErrorKind::invalid_argument, "learning rate must be > 0");
  if (!(alpha >= 0.0) || !(prox_weight >= 0.0)) throw Error(ErrorKind::invalid_argument, "weights must be >= 0");
  if (resample_paths_every < 1) throw Error(ErrorKind::invalid_argument, "resample_paths_every must be >= 1");
}

std::uint64_t resample_seed(std::uint64_t seed, std::uint64_t k) { return seed ^ (k * 0x9e3779b97f4a7c15ull); }

std::pair<ScalarGrid, RepairTrace> repair(const SynthSample& sample, const RepairConfig& rcfg,
                                          const CapeConfig& ccfg) {
  rcfg.validate();
  ccfg.validate();
  const ScalarGrid& y0 = sample.corrupted_map;
  require_distance_map(y0, "corrupted map");
  const Shape& shape = y0.shape();
  ScalarGrid y = y0;
  RepairTrace trace;
  trace.reserve(static_cast<std::size_t>(rcfg.steps) + 1);

  PathSet paths;
  for (int step = 0;; ++step) {
    if (step % rcfg.resample_paths_every == 0) {
      CapeConfig c = ccfg;
      c.seed = resample_seed(ccfg.seed, static_cast<std::uint64_t>(step / rcfg.resample_paths_every));
      paths = PathSet::build(sample.graph, shape, c);
    }
    const CapeResult cape = cape_forward(sample.graph, y, paths, ccfg);
    double prox = 0.0;
    for (std::size_t i = 0; i < y.size(); ++i) {
      const double d = static_cast<double>(y[i]) - y0[i];
      prox += d * d;
    }
    RepairStep row;
    row.cape = cape.total_loss;
    row.total = rcfg.prox_weight * prox + rcfg.alpha * cape.total_loss;
    row.apls = apls(sample.graph, graph_from_prediction(y, rcfg.threshold), rcfg.metric);
    trace.push_back(row);
    if (trace.front().total > 0.0 && row.total > 10.0 * trace.front().total) {
      throw Error(ErrorKind::divergence, "repair diverged at step " + std::to_string(step) + ": loss " +
                                             std::to_string(row.total) + " vs initial " +
                                             std::to_string(trace.front().total));
    }
    if (step == rcfg.steps) break;

    for (std::size_t i = 0; i < y.size(); ++i) {
      const double grad = 2.0 * rcfg.prox_weight * (static_cast<double>(y[i]) - y0[i]) +
                          rcfg.alpha * static_cast<double>(cape.gradient[i]);
      y[i] = static_cast<float>(std::max(rcfg.clamp_min, static_cast<double>(y[i]) - rcfg.learning_rate * grad));
    }
  }
  return {std::move(y), std::move(trace)};
}

}  // namespace cape
