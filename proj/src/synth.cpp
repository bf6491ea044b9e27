#include "cape/synth.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <numbers>

#include "json.hpp"

#include "cape/error.hpp"
#include "cape/io.hpp"
#include "cape/skeleton.hpp"

namespace cape {

namespace {

using Vec = std::array<double, 3>;  // z, y, x

Vec operator+(const Vec& a, const Vec& b) { return {a[0] + b[0], a[1] + b[1], a[2] + b[2]}; }
Vec operator*(double s, const Vec& a) { return {s * a[0], s * a[1], s * a[2]}; }
double dot(const Vec& a, const Vec& b) { return a[0] * b[0] + a[1] * b[1] + a[2] * b[2]; }
Vec normalized(const Vec& a) { return (1.0 / std::sqrt(dot(a, a))) * a; }
Vec cross(const Vec& a, const Vec& b) {
  return {a[1] * b[2] - a[2] * b[1], a[2] * b[0] - a[0] * b[2], a[0] * b[1] - a[1] * b[0]};
}
Point to_point(const Vec& v) { return {v[0], v[1], v[2]}; }
Vec to_vec(const Point& p) { return {p.z, p.y, p.x}; }

constexpr double kMargin = 4.0;
constexpr double kStep = 1.0;
constexpr double kMaxTurnRate = 0.10;  // rad per step: bends no tighter than the default corridor
constexpr double kTurnJitter = 0.03;
constexpr double kMinCurveLength = 16.0;
constexpr int kCurveAttempts = 30;

class CurveBuilder {
 public:
  CurveBuilder(const Shape& shape, std::mt19937_64& rng) : shape_(shape), rng_(rng) {}

  void add(int n_curves, double loop_prob) {
    for (int c = 0; c < n_curves; ++c) {
      bool done = false;
      if (uniform(0.0, 1.0) < loop_prob) done = try_loop();
      if (!done) try_open();
    }
  }

  std::vector<std::vector<Point>> curves;

 private:
  double uniform(double lo, double hi) { return std::uniform_real_distribution<double>(lo, hi)(rng_); }

  bool is_3d() const { return shape_.ndim() == 3; }
  double extent(int axis) const {
    return static_cast<double>(axis == 0 ? shape_.depth() : axis == 1 ? shape_.rows() : shape_.cols());
  }
  double min_extent() const {
    double m = std::min(extent(1), extent(2));
    return is_3d() ? std::min(m, extent(0)) : m;
  }

  bool inside(const Vec& p) const {
    for (int a = is_3d() ? 0 : 1; a < 3; ++a)
      if (p[a] < kMargin || p[a] > extent(a) - 1.0 - kMargin) return false;
    return true;
  }

  // True if p is closer than `radius` to a point of an accepted curve.
  bool crowded(const Vec& p, double radius) const {
    for (const auto& c : curves)
      for (const auto& q : c) {
        const Vec d = p + (-1.0) * to_vec(q);
        if (dot(d, d) < radius * radius) return true;
      }
    return false;
  }

  Vec random_direction() {
    if (!is_3d()) {
      const double a = uniform(0.0, 2.0 * std::numbers::pi);
      return {0.0, std::sin(a), std::cos(a)};
    }
    std::normal_distribution<double> n(0.0, 1.0);
    return normalized({n(rng_), n(rng_), n(rng_)});
  }

  // Unit vector perpendicular to h (in-plane for 2D).
  Vec perpendicular(const Vec& h) {
    if (!is_3d()) return {0.0, h[2], -h[1]};
    const Vec r = random_direction();
    Vec p = cross(h, r);
    if (dot(p, p) < 1e-9) p = cross(h, Vec{1.0, 0.0, 0.0});
    return normalized(p);
  }

  void try_open() {
    const double target = uniform(0.5, 1.0) * min_extent();
    std::vector<Point> best;
    double best_length = 0.0;
    for (int attempt = 0; attempt < kCurveAttempts && best_length < 0.75 * target; ++attempt) {
      Vec pos{};
      Vec heading = random_direction();
      bool branch = false;
      if (!curves.empty() && uniform(0.0, 1.0) < 0.5) {
        const auto& parent = curves[std::uniform_int_distribution<std::size_t>(0, curves.size() - 1)(rng_)];
        if (parent.size() < 8) continue;
        const std::size_t k = std::uniform_int_distribution<std::size_t>(2, parent.size() - 3)(rng_);
        pos = to_vec(parent[k]);
        const Vec tangent = normalized(to_vec(parent[k + 1]) + (-1.0) * to_vec(parent[k - 1]));
        const double side = uniform(0.0, 1.0) < 0.5 ? -1.0 : 1.0;
        heading = normalized(uniform(-0.35, 0.35) * tangent + side * perpendicular(tangent));
        branch = true;
      } else {
        for (int a = is_3d() ? 0 : 1; a < 3; ++a)
          pos[a] = uniform(kMargin + kSynthMinSeparation, extent(a) - 1.0 - kMargin - kSynthMinSeparation);
        if (crowded(pos, kSynthMinSeparation)) continue;
      }

      std::vector<Point> pts{to_point(pos)};
      Vec turn{};  // persistent turn rate, applied perpendicular to heading
      double length = 0.0;
      const std::size_t own_skip = static_cast<std::size_t>(2.0 * kSynthMinSeparation / kStep);
      while (length < target) {
        for (int a = is_3d() ? 0 : 1; a < 3; ++a) turn[a] += uniform(-kTurnJitter, kTurnJitter);
        turn = turn + (-dot(turn, heading)) * heading;
        const double rate = std::sqrt(dot(turn, turn));
        if (rate > kMaxTurnRate) turn = (kMaxTurnRate / rate) * turn;
        heading = normalized(heading + turn);
        const Vec next = pos + kStep * heading;
        if (!inside(next)) break;
        // A branch has to move away from its parent steeply; the clearance
        // grows with the distance travelled.
        const double clearance = branch ? std::min(kSynthMinSeparation, 0.8 * (length + kStep)) : kSynthMinSeparation;
        if (crowded(next, clearance)) break;
        bool self_close = false;
        for (std::size_t i = 0; i + own_skip < pts.size() && !self_close; ++i) {
          const Vec d = next + (-1.0) * to_vec(pts[i]);
          self_close = dot(d, d) < kSynthMinSeparation * kSynthMinSeparation;
        }
        if (self_close) break;
        pos = next;
        pts.push_back(to_point(pos));
        length += kStep;
      }
      const double needed = branch ? kSynthMinSeparation + 8.0 : kMinCurveLength;
      if (length >= needed && length > best_length) {
        best = std::move(pts);
        best_length = length;
      }
    }
    if (!best.empty()) curves.push_back(std::move(best));
  }

  bool try_loop() {
    const double m = min_extent();
    for (int attempt = 0; attempt < kCurveAttempts; ++attempt) {
      const double ra = uniform(0.12, 0.3) * m, rb = uniform(0.12, 0.3) * m;
      Vec centre{};
      for (int a = is_3d() ? 0 : 1; a < 3; ++a) centre[a] = uniform(0.0, extent(a) - 1.0);
      const Vec u = is_3d() ? random_direction() : Vec{0.0, 0.0, 1.0};
      const Vec v = is_3d() ? perpendicular(u) : Vec{0.0, 1.0, 0.0};
      const double rot = uniform(0.0, 2.0 * std::numbers::pi);
      const double wobble = uniform(0.0, 0.15), phase = uniform(0.0, 2.0 * std::numbers::pi);
      const int lobes = uniform(0.0, 1.0) < 0.5 ? 2 : 3;
      const int n = std::max(24, static_cast<int>(2.0 * std::numbers::pi * std::max(ra, rb) / kStep));
      std::vector<Point> pts;
      bool ok = true;
      for (int i = 0; i < n && ok; ++i) {
        const double t = 2.0 * std::numbers::pi * i / n;
        const double s = 1.0 + wobble * std::sin(lobes * t + phase);
        const double a = ra * s * std::cos(t), b = rb * s * std::sin(t);
        const double ca = std::cos(rot), sa = std::sin(rot);
        const Vec p = centre + (a * ca - b * sa) * u + (a * sa + b * ca) * v;
        ok = inside(p) && !crowded(p, kSynthMinSeparation);
        pts.push_back(to_point(p));
      }
      if (!ok) continue;
      pts.push_back(pts.front());
      curves.push_back(std::move(pts));
      return true;
    }
    return false;
  }

  const Shape& shape_;
  std::mt19937_64& rng_;
};

}  // namespace

Structure gen_structure(std::uint64_t seed, const Shape& shape, int n_curves, double loop_prob) {
  for (auto e : shape.extents())
    if (e < 32) throw Error(ErrorKind::invalid_argument, "degenerate shape " + to_string(shape) + ": need >= 32 per axis");
  if (n_curves < 1) throw Error(ErrorKind::invalid_argument, "n_curves must be >= 1");
  if (!(loop_prob >= 0.0 && loop_prob <= 1.0)) throw Error(ErrorKind::invalid_argument, "loop_prob must be in [0, 1]");

  std::mt19937_64 rng(seed);
  CurveBuilder builder(shape, rng);
  builder.add(n_curves, loop_prob);
  if (builder.curves.empty()) throw Error(ErrorKind::invalid_argument, "could not place any curve in " + to_string(shape));

  Structure out;
  out.mask = BinaryMask(shape);
  for (const auto& c : builder.curves) {
    const auto m = rasterize_polyline(c, shape);
    for (std::size_t i = 0; i < m.size(); ++i)
      if (m[i]) out.mask.set(i);
  }
  // Thinning is a no-op on clean digital curves and removes the odd 2x2
  // clump where rounded samples double back.
  if (shape.ndim() == 2) out.mask = skeletonize_2d(out.mask);
  out.graph = with_euclidean_weights(graph_from_mask(out.mask, kSynthNodeSpacing));
  out.curves = std::move(builder.curves);
  return out;
}

Corruption corrupt(const ScalarGrid& gt_map, const BinaryMask& gt_mask, std::mt19937_64& rng, int n_gaps,
                   int gap_len, double gap_value) {
  if (gt_map.shape() != gt_mask.shape()) throw Error(ErrorKind::shape_mismatch, "corrupt: map and mask shapes differ");
  if (n_gaps < 0 || gap_len < 1) throw Error(ErrorKind::invalid_argument, "corrupt: need n_gaps >= 0 and gap_len >= 1");
  Corruption out{gt_map, {}};
  if (n_gaps == 0) return out;

  const Shape& s = gt_mask.shape();
  const auto chains = extract_chains(gt_mask).chains;
  const auto len = static_cast<std::size_t>(gap_len);
  std::vector<const Chain*> eligible;
  std::vector<double> weights;
  for (const auto& c : chains)
    if (c.cells.size() >= len + 2) {
      eligible.push_back(&c);
      weights.push_back(static_cast<double>(c.cells.size()));
    }
  if (eligible.empty()) {
    throw Error(ErrorKind::invalid_argument,
                "corrupt: gap_len " + std::to_string(gap_len) + " exceeds the longest chain");
  }

  const auto r = static_cast<std::int64_t>(std::ceil(kGapRadius));
  const int zr = s.ndim() == 3 ? static_cast<int>(r) : 0;
  for (int g = 0; g < n_gaps; ++g) {
    // Chains weighted by length, i.e. a uniformly drawn centreline cell.
    const Chain& chain = *eligible[std::discrete_distribution<std::size_t>(weights.begin(), weights.end())(rng)];
    const std::size_t n = chain.cells.size();
    // Interior cells only; prefer the middle half of the chain.
    std::size_t lo = std::max<std::size_t>(1, n / 4);
    std::size_t hi = (3 * n) / 4 >= len ? (3 * n) / 4 - len : 0;
    hi = std::min(hi, n - 1 - len);
    if (hi < lo) {
      lo = 1;
      hi = n - 1 - len;
    }
    const std::size_t start = std::uniform_int_distribution<std::size_t>(lo, hi)(rng);

    CorruptionEntry entry;
    entry.value = static_cast<float>(gap_value);
    for (std::size_t k = start; k < start + len; ++k) {
      const GridIndex c = s.unravel(chain.cells[k]);
      entry.cells.push_back(c);
      for (std::int64_t dz = -zr; dz <= zr; ++dz)
        for (std::int64_t dy = -r; dy <= r; ++dy)
          for (std::int64_t dx = -r; dx <= r; ++dx) {
            if (static_cast<double>(dz * dz + dy * dy + dx * dx) > kGapRadius * kGapRadius) continue;
            const GridIndex q{c.z + dz, c.y + dy, c.x + dx};
            if (!s.contains(q)) continue;
            float& v = out.map.at(q);
            v = std::max(v, entry.value);
          }
    }
    out.log.push_back(std::move(entry));
  }
  return out;
}

SynthSample make_sample(const SynthConfig& cfg) {
  const Shape shape(cfg.shape);
  auto structure = gen_structure(cfg.seed, shape, cfg.n_curves, cfg.loop_prob);
  SynthSample s;
  s.graph = std::move(structure.graph);
  s.gt_mask = std::move(structure.mask);
  s.gt_map = distance_transform(s.gt_mask, cfg.d_max);
  // Separate stream so that corruption settings do not alter the structure.
  std::mt19937_64 rng(cfg.seed ^ 0x9e3779b97f4a7c15ull);
  auto c = corrupt(s.gt_map, s.gt_mask, rng, cfg.n_gaps, cfg.gap_len, cfg.gap_value);
  s.corrupted_map = std::move(c.map);
  s.corruption_log = std::move(c.log);
  return s;
}

namespace {

nlohmann::ordered_json index_json(const GridIndex& g, int ndim) {
  if (ndim == 3) return {g.z, g.y, g.x};
  return {g.y, g.x};
}

}  // namespace

void write_sample(const std::filesystem::path& dir, const SynthSample& sample, const SynthConfig& cfg) {
  std::filesystem::create_directories(dir);
  write_graph(dir / "graph.json", sample.graph);
  write_cgrd(dir / "gt_mask.cgrd", sample.gt_mask);
  write_cgrd(dir / "gt_map.cgrd", sample.gt_map);
  write_cgrd(dir / "corrupted.cgrd", sample.corrupted_map);

  const int ndim = sample.gt_map.shape().ndim();
  nlohmann::ordered_json meta;
  meta["seed"] = cfg.seed;
  nlohmann::ordered_json params;
  params["shape"] = cfg.shape;
  params["n_curves"] = cfg.n_curves;
  params["loop_prob"] = cfg.loop_prob;
  params["n_gaps"] = cfg.n_gaps;
  params["gap_len"] = cfg.gap_len;
  params["gap_value"] = cfg.gap_value;
  params["d_max"] = cfg.d_max;
  meta["parameters"] = params;
  auto log = nlohmann::ordered_json::array();
  for (const auto& e : sample.corruption_log) {
    nlohmann::ordered_json entry;
    auto cells = nlohmann::ordered_json::array();
    for (const auto& c : e.cells) cells.push_back(index_json(c, ndim));
    entry["cells"] = cells;
    entry["value"] = e.value;
    log.push_back(entry);
  }
  meta["corruption_log"] = log;
  write_text(dir / "meta.json", meta.dump(2) + "\n");
}

SynthSample read_sample(const std::filesystem::path& dir) {
  SynthSample s;
  s.graph = read_graph(dir / "graph.json");
  s.gt_mask = read_cgrd_mask(dir / "gt_mask.cgrd");
  s.gt_map = read_cgrd(dir / "gt_map.cgrd");
  s.corrupted_map = read_cgrd(dir / "corrupted.cgrd");
  if (s.gt_map.shape() != s.corrupted_map.shape() || s.gt_map.shape() != s.gt_mask.shape()) {
    throw Error(ErrorKind::shape_mismatch, dir.string() + ": sample grids have different shapes");
  }
  if (std::filesystem::exists(dir / "meta.json")) {
    try {
      const auto meta = nlohmann::json::parse(read_text(dir / "meta.json"));
      const int ndim = s.gt_map.shape().ndim();
      for (const auto& e : meta.at("corruption_log")) {
        CorruptionEntry entry;
        entry.value = e.at("value").get<float>();
        for (const auto& c : e.at("cells")) {
          const auto v = c.get<std::vector<std::int64_t>>();
          entry.cells.push_back(ndim == 3 ? GridIndex{v.at(0), v.at(1), v.at(2)} : GridIndex{0, v.at(0), v.at(1)});
        }
        s.corruption_log.push_back(std::move(entry));
      }
    } catch (const nlohmann::json::exception& e) {
      throw Error(ErrorKind::parse, (dir / "meta.json").string() + ": " + e.what());
    }
  }
  return s;
}

}  // namespace cape
