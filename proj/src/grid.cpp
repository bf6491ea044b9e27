#include "cape/grid.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "cape/error.hpp"

namespace cape {

double distance(const Point& a, const Point& b) {
  const double dz = a.z - b.z, dy = a.y - b.y, dx = a.x - b.x;
  return std::sqrt(dz * dz + dy * dy + dx * dx);
}

std::string to_string(const GridIndex& idx) {
  std::ostringstream os;
  os << "(" << idx.z << ", " << idx.y << ", " << idx.x << ")";
  return os.str();
}

std::int64_t round_half_down(double v) { return static_cast<std::int64_t>(std::ceil(v - 0.5)); }

GridIndex round_point(const Point& p) { return {round_half_down(p.z), round_half_down(p.y), round_half_down(p.x)}; }

Shape::Shape(std::span<const std::size_t> extents) {
  if (extents.size() != 2 && extents.size() != 3) {
    throw Error(ErrorKind::unsupported_dimensionality,
                "grid must have 2 or 3 dimensions, got " + std::to_string(extents.size()));
  }
  for (auto e : extents) {
    if (e == 0) throw Error(ErrorKind::invalid_argument, "grid extents must be positive");
  }
  ndim_ = static_cast<int>(extents.size());
  const std::size_t off = 3 - extents.size();
  for (std::size_t i = 0; i < extents.size(); ++i) dims_[off + i] = extents[i];
}

Shape::Shape(std::initializer_list<std::size_t> extents)
    : Shape(std::span<const std::size_t>(extents.begin(), extents.size())) {}

std::vector<std::size_t> Shape::extents() const {
  if (ndim_ == 2) return {dims_[1], dims_[2]};
  return {dims_[0], dims_[1], dims_[2]};
}

bool Shape::contains(const Point& p) const { return contains(round_point(p)); }

std::string to_string(const Shape& shape) {
  std::ostringstream os;
  const auto ext = shape.extents();
  for (std::size_t i = 0; i < ext.size(); ++i) os << (i ? "x" : "") << ext[i];
  return os.str();
}

namespace {

std::vector<GridIndex> make_offsets(int ndim) {
  std::vector<GridIndex> out;
  const int zr = ndim == 3 ? 1 : 0;
  for (int dz = -zr; dz <= zr; ++dz)
    for (int dy = -1; dy <= 1; ++dy)
      for (int dx = -1; dx <= 1; ++dx)
        if (dz || dy || dx) out.push_back({dz, dy, dx});
  return out;
}

}  // namespace

std::span<const GridIndex> neighbour_offsets(int ndim) {
  static const std::vector<GridIndex> two = make_offsets(2);
  static const std::vector<GridIndex> three = make_offsets(3);
  return ndim == 3 ? std::span<const GridIndex>(three) : std::span<const GridIndex>(two);
}

ScalarGrid::ScalarGrid(Shape shape, float fill) : shape_(shape), data_(shape.size(), fill) {}

ScalarGrid::ScalarGrid(Shape shape, std::vector<float> data) : shape_(shape), data_(std::move(data)) {
  if (data_.size() != shape_.size()) {
    throw Error(ErrorKind::shape_mismatch, "grid data has " + std::to_string(data_.size()) +
                                               " values but shape " + to_string(shape_) + " needs " +
                                               std::to_string(shape_.size()));
  }
}

void require_distance_map(const ScalarGrid& grid, const char* what) {
  for (std::size_t i = 0; i < grid.size(); ++i) {
    const float v = grid[i];
    if (!std::isfinite(v) || v < 0.0f) {
      throw Error(ErrorKind::invalid_argument, std::string(what) + ": value at " +
                                                   to_string(grid.shape().unravel(i)) +
                                                   " is not a finite non-negative distance");
    }
  }
}

BinaryMask::BinaryMask(Shape shape, bool fill) : shape_(shape), bits_(shape.size(), fill ? 1 : 0) {}

std::size_t BinaryMask::count() const {
  return static_cast<std::size_t>(std::count(bits_.begin(), bits_.end(), std::uint8_t{1}));
}

std::vector<std::size_t> BinaryMask::foreground() const {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < bits_.size(); ++i)
    if (bits_[i]) out.push_back(i);
  return out;
}

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

// One pass of the Felzenszwalb-Huttenlocher lower envelope over a strided
// line. Entries equal to +inf carry no parabola.
void envelope_pass(double* line, std::size_t n, std::size_t stride, std::vector<double>& f,
                   std::vector<std::size_t>& v, std::vector<double>& z) {
  f.resize(n);
  v.resize(n);
  z.resize(n + 1);
  for (std::size_t i = 0; i < n; ++i) f[i] = line[i * stride];

  std::size_t k = 0;
  bool any = false;
  for (std::size_t q = 0; q < n; ++q) {
    if (f[q] == kInf) continue;
    if (!any) {
      v[0] = q;
      z[0] = -kInf;
      z[1] = kInf;
      any = true;
      continue;
    }
    const double qd = static_cast<double>(q);
    const auto intersect = [&](std::size_t p) {
      const double pd = static_cast<double>(p);
      return ((f[q] + qd * qd) - (f[p] + pd * pd)) / (2.0 * (qd - pd));
    };
    double s = intersect(v[k]);
    while (s <= z[k]) {  // z[0] is -inf, so this stops at k == 0
      --k;
      s = intersect(v[k]);
    }
    ++k;
    v[k] = q;
    z[k] = s;
    z[k + 1] = kInf;
  }
  if (!any) return;  // line stays +inf

  k = 0;
  for (std::size_t q = 0; q < n; ++q) {
    const double qd = static_cast<double>(q);
    while (z[k + 1] < qd) ++k;
    const double d = qd - static_cast<double>(v[k]);
    line[q * stride] = d * d + f[v[k]];
  }
}

}  // namespace

std::vector<double> squared_distance_transform(const BinaryMask& mask) {
  const Shape& s = mask.shape();
  const std::size_t D = s.depth(), H = s.rows(), W = s.cols();
  std::vector<double> out(s.size(), kInf);

  // Rows: two-scan exact 1D distance.
  for (std::size_t r = 0; r < D * H; ++r) {
    double* row = out.data() + r * W;
    double last = kInf;
    for (std::size_t x = 0; x < W; ++x) {
      if (mask[r * W + x]) last = static_cast<double>(x);
      if (last != kInf) row[x] = static_cast<double>(x) - last;
    }
    last = kInf;
    for (std::size_t x = W; x-- > 0;) {
      if (mask[r * W + x]) last = static_cast<double>(x);
      if (last != kInf) row[x] = std::min(row[x], last - static_cast<double>(x));
    }
    for (std::size_t x = 0; x < W; ++x)
      if (row[x] != kInf) row[x] *= row[x];
  }

  std::vector<double> f;
  std::vector<std::size_t> v;
  std::vector<double> z;
  if (H > 1) {
    for (std::size_t d = 0; d < D; ++d)
      for (std::size_t x = 0; x < W; ++x) envelope_pass(out.data() + d * H * W + x, H, W, f, v, z);
  }
  if (D > 1) {
    for (std::size_t i = 0; i < H * W; ++i) envelope_pass(out.data() + i, D, H * W, f, v, z);
  }
  return out;
}

ScalarGrid distance_transform(const BinaryMask& mask, double d_max) {
  if (!(d_max > 0.0)) throw Error(ErrorKind::invalid_argument, "d_max must be positive");
  if (mask.count() == 0) throw Error(ErrorKind::empty_foreground, "distance transform: empty foreground");
  const auto sq = squared_distance_transform(mask);
  ScalarGrid out(mask.shape());
  for (std::size_t i = 0; i < sq.size(); ++i) out[i] = static_cast<float>(std::min(std::sqrt(sq[i]), d_max));
  return out;
}

BinaryMask dilate(const BinaryMask& mask, double radius) {
  if (!(radius > 0.0)) throw Error(ErrorKind::invalid_argument, "dilation radius must be positive");
  BinaryMask out(mask.shape());
  if (mask.count() == 0) return out;
  const auto sq = squared_distance_transform(mask);
  const double r2 = radius * radius;
  for (std::size_t i = 0; i < sq.size(); ++i)
    if (sq[i] <= r2) out.set(i);
  return out;
}

namespace {

// floor(num / den) for den > 0.
std::int64_t floor_div(std::int64_t num, std::int64_t den) {
  std::int64_t q = num / den;
  if ((num % den != 0) && (num < 0)) --q;
  return q;
}

}  // namespace

void append_line_cells(const GridIndex& a, const GridIndex& b, std::vector<GridIndex>& out) {
  const std::int64_t dz = b.z - a.z, dy = b.y - a.y, dx = b.x - a.x;
  const std::int64_t n = std::max({std::abs(dz), std::abs(dy), std::abs(dx)});
  if (n == 0) {
    out.push_back(a);
    return;
  }
  // Each coordinate advances by round(i * d / n), so no axis moves more than
  // one cell per step.
  const auto step = [n](std::int64_t origin, std::int64_t d, std::int64_t i) {
    return origin + floor_div(2 * i * d + n, 2 * n);
  };
  for (std::int64_t i = 0; i <= n; ++i) out.push_back({step(a.z, dz, i), step(a.y, dy, i), step(a.x, dx, i)});
}

BinaryMask rasterize_polyline(std::span<const Point> points, const Shape& shape) {
  if (points.size() < 2) throw Error(ErrorKind::invalid_argument, "polyline needs at least 2 points");
  std::vector<GridIndex> cells;
  cells.reserve(points.size());
  for (const auto& p : points) {
    const GridIndex idx = round_point(p);
    if (!shape.contains(idx)) {
      throw Error(ErrorKind::out_of_bounds,
                  "polyline vertex " + to_string(idx) + " outside grid " + to_string(shape));
    }
    cells.push_back(idx);
  }
  BinaryMask out(shape);
  std::vector<GridIndex> seg;
  for (std::size_t i = 0; i + 1 < cells.size(); ++i) {
    seg.clear();
    append_line_cells(cells[i], cells[i + 1], seg);
    for (const auto& c : seg) out.set(c);
  }
  return out;
}

BinaryMask threshold_below(const ScalarGrid& grid, float threshold) {
  BinaryMask out(grid.shape());
  for (std::size_t i = 0; i < grid.size(); ++i)
    if (grid[i] < threshold) out.set(i);
  return out;
}

}  // namespace cape
